//! Uniform time grids.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid on `[t_start, t_end]` with `n_steps` equal steps
/// (`n_steps + 1` points).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Build a grid; rejects empty spans, negative times and zero steps.
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidGrid("non-finite endpoint".into()));
        }
        if t_start < 0.0 {
            return Err(Error::InvalidGrid(format!("t_start = {t_start} < 0")));
        }
        if t_end <= t_start {
            return Err(Error::InvalidGrid(format!(
                "t_end = {t_end} must exceed t_start = {t_start}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps = 0".into()));
        }
        Ok(Self {
            t_start,
            t_end,
            n_steps,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// k-th grid point, computed by multiplication (no drift from repeated adds).
    pub fn point(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + self.step() * k as f64
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.point(k))
    }

    /// Index of the last grid point ≤ t (t clamped into the span).
    pub fn index_at(&self, t: f64) -> usize {
        let raw = ((t - self.t_start) / self.step()).floor();
        (raw.max(0.0) as usize).min(self.n_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_grid() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.step(), 0.25);
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn offset_grid() {
        let g = TimeGrid::new(0.5, 1.0, 2).unwrap();
        assert_eq!(g.step(), 0.25);
        assert_eq!(g.point(1), 0.75);
        assert_eq!(g.n_points(), 3);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(2.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(f64::NAN, 1.0, 4).is_err());
    }

    #[test]
    fn endpoints_are_exact() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        assert_eq!(g.point(3), 1.0);
        assert_eq!(g.point(0), 0.0);
    }

    #[test]
    fn index_lookup() {
        let g = TimeGrid::new(0.0, 1.0, 8).unwrap();
        assert_eq!(g.index_at(0.0), 0);
        assert_eq!(g.index_at(0.124), 0);
        assert_eq!(g.index_at(0.125), 1);
        assert_eq!(g.index_at(1.0), 8);
        assert_eq!(g.index_at(2.0), 8);
    }
}
