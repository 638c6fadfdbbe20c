//! Randomized invariants of the occupation histogram and its spatial boxes.

use proptest::prelude::*;

use ltlab_core::localtime::{occupation_histogram, SpatialBox};
use ltlab_core::{SamplePath, TimeGrid};

fn path_from(vals: Vec<f64>) -> SamplePath {
    let n = vals.len() - 1;
    SamplePath::new(TimeGrid::new(0.0, 1.0, n).unwrap(), 1, vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_conservation_on_random_paths(
        vals in prop::collection::vec(-1.0f64..1.0, 17..129),
        eps in 0.01f64..0.2,
    ) {
        let path = path_from(vals);
        let n = path.grid.n_steps();
        let region = SpatialBox::covering(&path, 0, n, &[eps]).unwrap();
        let field = occupation_histogram(&path, (0.0, 1.0), &region).unwrap();
        prop_assert_eq!(field.outside_time, 0.0);
        prop_assert!(field.mass_defect() <= 1e-9);
        for flat in 0..region.n_cells() {
            prop_assert!(field.cell_time(flat) >= 0.0);
        }
    }

    #[test]
    fn window_additivity_at_random_splits(
        vals in prop::collection::vec(-1.0f64..1.0, 33..65),
        split_k in 1usize..32,
    ) {
        let path = path_from(vals);
        let n = path.grid.n_steps();
        let split = split_k as f64 / 32.0;
        let region = SpatialBox::covering(&path, 0, n, &[0.05]).unwrap();
        let full = occupation_histogram(&path, (0.0, 1.0), &region).unwrap();
        let mut merged = occupation_histogram(&path, (0.0, split), &region).unwrap();
        merged
            .merge_adjacent(&occupation_histogram(&path, (split, 1.0), &region).unwrap())
            .unwrap();
        for flat in 0..region.n_cells() {
            let (x, y) = (full.cell_time(flat), merged.cell_time(flat));
            // re-slicing the segment that contains the split perturbs its
            // crossing arithmetic, so the round-off scale is that segment's
            // duration, not the accumulated cell total
            let tol = 4.0 * f64::EPSILON * x.abs().max(y.abs())
                + 64.0 * f64::EPSILON * path.grid.step();
            prop_assert!((x - y).abs() <= tol, "cell {}: {} vs {}", flat, x, y);
        }
    }

    #[test]
    fn box_cell_lookup_round_trips(
        center in -2.0f64..2.0,
        half in 0.1f64..3.0,
        bins in 1usize..40,
    ) {
        let bx = SpatialBox::new(vec![center], vec![half], vec![bins]).unwrap();
        for flat in 0..bx.n_cells() {
            let idx = bx.multi_index(flat);
            let x = bx.cell_center(&idx);
            prop_assert_eq!(bx.cell_of(&x), Some(idx));
        }
    }
}
