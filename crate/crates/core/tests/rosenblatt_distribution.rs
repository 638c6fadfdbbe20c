//! Monte Carlo checks for the second-chaos sampler: moments and covariance
//! against the closed forms, and the central cross-check of the empirical
//! characteristic function against the eigenvalue product (the two sides
//! are implemented independently).

mod common;

use ltlab_core::gaussian::fbm_covariance;
use ltlab_core::rosenblatt::{variance_se, ChaosKernel};
use ltlab_core::{numeric, StreamFamily, TimeGrid};

fn kernel(h: f64, n_steps: usize, rank: usize) -> ChaosKernel {
    ChaosKernel::build(h, TimeGrid::new(0.0, 1.0, n_steps).unwrap(), rank).unwrap()
}

fn terminal_samples(k: &ChaosKernel, family: &StreamFamily, n: usize) -> Vec<f64> {
    let last = k.grid().n_steps();
    (0..n)
        .map(|rep| {
            let mut rng = family.stream(rep as u32);
            k.sample(&mut rng).scalar(last)
        })
        .collect()
}

#[test]
fn terminal_moments_match_second_chaos_theory() {
    let k = kernel(0.7, 8, 256);
    let lambdas = k.endpoint_eigenvalues().unwrap();
    let theory_var: f64 = 2.0 * lambdas.iter().map(|l| l * l).sum::<f64>();
    let theory_m3: f64 = 8.0 * lambdas.iter().map(|l| l.powi(3)).sum::<f64>();

    let n = 100_000usize;
    let z = terminal_samples(&k, &StreamFamily::new(2201, 0), n);
    let mean = numeric::mean(&z);
    assert!(
        mean.abs() <= 3.0 * (theory_var / n as f64).sqrt(),
        "mean {mean} not centered"
    );

    let var = numeric::variance(&z);
    let se_var = variance_se(&lambdas, n);
    assert!(
        (var - theory_var).abs() <= 3.0 * se_var,
        "Var(Z_1) = {var} vs {theory_var}, se {se_var}"
    );

    // third central moment: strictly positive and equal to 8 sum lambda^3
    let cubes: Vec<f64> = z.iter().map(|&v| (v - mean).powi(3)).collect();
    let m3 = numeric::mean(&cubes);
    let se3 = (numeric::variance(&cubes) / n as f64).sqrt();
    assert!(m3 > 5.0 * se3, "third moment {m3} vs se {se3}");
    assert!(
        (m3 - theory_m3).abs() <= 5.0 * se3,
        "third moment {m3} vs theory {theory_m3}, se {se3}"
    );
}

#[test]
fn charfn_magnitude_cross_check_at_twenty_frequencies() {
    let k = kernel(0.7, 4, 256);
    let n = 200_000usize;
    let z = terminal_samples(&k, &StreamFamily::new(2202, 0), n);
    for &xi in &numeric::linspace(0.25, 5.0, 20) {
        let exact = k.charfn_magnitude(&[0.0, 1.0], &[xi]).unwrap().value;
        let (r, se) = common::charfn_radius(&z, xi);
        assert!(
            (r - exact).abs() <= 3.0 * se,
            "xi = {xi}: |phi| = {r} vs eigen product {exact}, se = {se}"
        );
    }
}

#[test]
fn simulated_covariance_tracks_fractional_brownian_target() {
    let h = 0.7;
    let k = kernel(h, 8, 256);

    // kernel-implied covariance against the closed form
    for &(s, t) in &[(0.5, 1.0), (0.25, 0.75), (0.125, 1.0)] {
        let implied = k.implied_covariance(s, t).unwrap();
        let target = fbm_covariance(s, t, h).unwrap();
        assert!(
            (implied - target).abs() <= 0.02 * target.abs(),
            "implied Cov(Z_{s}, Z_{t}) = {implied} vs {target}"
        );
    }

    // empirical covariance on the grid against the kernel-implied one
    let n = 100_000usize;
    let family = StreamFamily::new(2203, 0);
    let m = k.grid().n_points();
    let mut acc = vec![0.0f64; m * m];
    let mut acc2 = vec![0.0f64; m * m];
    for rep in 0..n {
        let mut rng = family.stream(rep as u32);
        let p = k.sample(&mut rng);
        for i in 1..m {
            for j in i..m {
                let prod = p.scalar(i) * p.scalar(j);
                acc[i * m + j] += prod;
                acc2[i * m + j] += prod * prod;
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 1..m {
        for j in i..m {
            let mean = acc[i * m + j] / n as f64;
            let var = acc2[i * m + j] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            let target = k
                .implied_covariance(k.grid().point(i), k.grid().point(j))
                .unwrap();
            worst = worst.max((mean - target).abs() / se);
        }
    }
    assert!(worst <= 3.5, "worst covariance deviation {worst:.2} se");
}

#[test]
fn single_increment_magnitude_dominated_by_power_bounds() {
    let h = 0.7;
    let k = kernel(h, 8, 256);
    // Polynomial constant from the eight largest unit-increment eigenvalues:
    // each factor (1 + 4 xi^2 l^2)^{-1/4} <= (2 xi |l|)^{-1/2}, so the product
    // over those eight alone is <= (2 xi)^{-4} prod |l|^{-1/2}; the eight
    // factors of l ~ dt^H then supply the dt^{-4H} power. A factor 2 absorbs
    // the discretization wobble in the eigenvalue scaling law.
    let unit = k.charfn_magnitude(&[0.0, 1.0], &[1.0]).unwrap().sorted_abs();
    let c4: f64 = 2.0 / 16.0 * unit[..8].iter().map(|l| 1.0 / l.sqrt()).product::<f64>();

    for &dt in &[0.25f64, 0.5, 1.0] {
        // operator eigenvalues scale like dt^H (their squares sum to the
        // dt^{2H} variance)
        let lam = k.charfn_magnitude(&[0.0, dt], &[1.0]).unwrap().sorted_abs();
        let ratio = lam[0] / (dt.powf(h) * unit[0]);
        assert!(
            (ratio - 1.0).abs() <= 0.05,
            "top eigenvalue scaling off by {ratio} at dt = {dt}"
        );
        for &xi in &[0.5f64, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let v = k.charfn_magnitude(&[0.0, dt], &[xi]).unwrap().value;
            assert!(v <= 1.0, "flat bound fails at xi = {xi}, dt = {dt}");
            if xi >= 1.0 {
                let bound = c4 * xi.powi(-4) * dt.powf(-4.0 * h);
                assert!(
                    v <= bound,
                    "power bound fails at xi = {xi}, dt = {dt}: {v} > {bound}"
                );
            }
        }
    }
}
