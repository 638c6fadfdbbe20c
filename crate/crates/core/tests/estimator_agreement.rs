//! Cross-validation of the two local-time estimators on sampled paths of
//! every process family, plus the occupation identity and mass conservation
//! on rough trajectories.

use ltlab_core::localtime::{
    default_bin_width, default_freq_step, fourier_resolution_ok, occupation_histogram,
    occupation_identity_check, FourierEstimator, SpatialBox,
};
use ltlab_core::sim::PathSampler;
use ltlab_core::{
    FieldKind, ProcessClass, ProcessSpec, SamplePath, SdeScheme, StreamFamily, TimeGrid,
};

fn sampled_path(class: ProcessClass, n_steps: usize, seed: u64) -> (SamplePath, f64) {
    let spec = ProcessSpec::new(class, 1).unwrap();
    let alpha = spec.alpha();
    let grid = TimeGrid::new(0.0, 1.0, n_steps).unwrap();
    let sampler = PathSampler::new(&spec, grid).unwrap();
    let mut rng = StreamFamily::new(seed, 1).stream(0);
    (sampler.sample(&mut rng).unwrap(), alpha)
}

// (tag, process, grid size, bin width in units of the resolution floor):
// rough-local-time processes need wider cells so the cutoff covers several
// sinc lobes of the cell average, smooth ones tolerate the floor itself
fn smoke_cases() -> Vec<(&'static str, ProcessClass, usize, f64)> {
    vec![
        ("brownian", ProcessClass::Fbm { hurst: 0.5 }, 1 << 14, 4.0),
        ("fbm-smooth", ProcessClass::Fbm { hurst: 0.7 }, 1 << 13, 8.0),
        ("fbm-rough", ProcessClass::Fbm { hurst: 0.3 }, 1 << 13, 2.0),
        (
            "second-chaos",
            ProcessClass::Rosenblatt {
                hurst: 0.7,
                rank: 1024,
            },
            1 << 10,
            8.0,
        ),
        (
            "driven-sde",
            ProcessClass::FbmSde {
                hurst: 0.6,
                scheme: SdeScheme::EulerYoung,
                field: FieldKind::Trigonometric,
                x0: 0.0,
            },
            1 << 12,
            4.0,
        ),
    ]
}

#[test]
fn fourier_matches_histogram_on_interior_cells() {
    for (tag, class, n_steps, mult) in smoke_cases() {
        let (path, alpha) = sampled_path(class, n_steps, 3301);
        let step = path.grid.step();
        let eps = mult * default_bin_width(step, alpha);
        let window = (0.0, 1.0);
        let region = SpatialBox::covering(&path, 0, path.n_points() - 1, &[eps]).unwrap();
        let field = occupation_histogram(&path, window, &region).unwrap();

        let cutoff = (0.999 * step.powf(-alpha)).min(512.0);
        assert!(fourier_resolution_ok(step, alpha, cutoff), "{tag}");
        let center = vec![region.lower(0) + 0.5 * region.cell_width(0) * region.n_cells() as f64];
        let freq_step = default_freq_step(&path, window, &center, cutoff);
        let est = FourierEstimator::new(&path, window, cutoff, freq_step, Some(&[eps])).unwrap();

        let sup = field.sup_density();
        let mut worst = 0.0f64;
        for &cell in &field.interior_cells() {
            let x = region.cell_center(&region.multi_index(cell));
            worst = worst.max((est.evaluate(&x) - field.density(cell)).abs());
        }
        assert!(
            worst <= 0.05 * sup,
            "{tag}: worst gap {worst} vs sup density {sup}"
        );
    }
}

#[test]
fn occupation_identity_and_mass_conservation() {
    for (tag, class, n_steps, _) in smoke_cases() {
        let (path, alpha) = sampled_path(class, n_steps, 3302);
        let eps = default_bin_width(path.grid.step(), alpha);
        let region = SpatialBox::covering(&path, 0, path.n_points() - 1, &[eps]).unwrap();
        let field = occupation_histogram(&path, (0.0, 1.0), &region).unwrap();

        // the covering box catches every segment, so inside + outside time
        // reproduces the window length to round-off
        assert!(field.outside_time == 0.0, "{tag}: leaked outside");
        assert!(field.mass_defect() <= 1e-6, "{tag}: {}", field.mass_defect());

        // integral of a smooth function along the path vs the cell sums
        let defect = occupation_identity_check(&path, &field, |x| 1.0 + x[0] * x[0]).unwrap();
        assert!(defect <= 0.01, "{tag}: occupation identity defect {defect}");
    }
}
