//! Process families, their exponent conventions, and sampled paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Time-stepping scheme for driven equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeScheme {
    /// First-order Euler scheme for Young-regular drivers (H > 1/2).
    EulerYoung,
    /// Adds the level-2 correction term; valid down to H > 1/3.
    MilsteinLevel2,
}

/// Named diffusion fields available to driven equations. All are diagonal,
/// so one name covers every dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// V = I: additive noise, solved exactly by every scheme.
    Identity,
    /// V(x) = diag(x): geometric equation, closed form exp(driver).
    Linear,
    /// V(x) = diag(sin(x_l) + 2): smooth, elliptic, bounded.
    Trigonometric,
    /// V(x) = diag(1/(1+x_l^2) + 1): smooth, elliptic, bounded.
    Logistic,
}

/// Which process a simulation draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ProcessClass {
    Fbm {
        hurst: f64,
    },
    /// Mixture covariance a*R_h + b*R_h2 (h2 >= h), whose increment
    /// variance is sandwiched between a*|t-s|^2h and (a+b)*|t-s|^2h on
    /// horizons <= 1.
    GaussianQuasiHelix {
        hurst: f64,
        hurst2: f64,
        a: f64,
        b: f64,
    },
    Rosenblatt {
        hurst: f64,
        #[serde(default = "default_rank")]
        rank: usize,
    },
    FbmSde {
        hurst: f64,
        scheme: SdeScheme,
        field: FieldKind,
        #[serde(default = "default_x0")]
        x0: f64,
    },
}

fn default_rank() -> usize {
    512
}

fn default_x0() -> f64 {
    1.0
}

/// A process family together with its dimension and exponent conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub class: ProcessClass,
    pub dim: usize,
}

impl ProcessSpec {
    pub fn new(class: ProcessClass, dim: usize) -> Result<Self> {
        let spec = Self { class, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        match &self.class {
            ProcessClass::Fbm { hurst } => check_hurst(*hurst, 0.0)?,
            ProcessClass::GaussianQuasiHelix {
                hurst,
                hurst2,
                a,
                b,
            } => {
                check_hurst(*hurst, 0.0)?;
                check_hurst(*hurst2, 0.0)?;
                if hurst2 < hurst {
                    return Err(Error::InvalidParameter(format!(
                        "quasi-helix needs hurst2 >= hurst, got {hurst2} < {hurst}"
                    )));
                }
                if !(*a > 0.0) || !(*b >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "quasi-helix weights need a > 0, b >= 0, got a={a}, b={b}"
                    )));
                }
            }
            ProcessClass::Rosenblatt { hurst, rank } => {
                check_hurst(*hurst, 0.5)?;
                if self.dim != 1 {
                    return Err(Error::InvalidParameter(
                        "the second-chaos process is one-dimensional".into(),
                    ));
                }
                if *rank < 16 {
                    return Err(Error::InvalidParameter(format!(
                        "chaos rank must be >= 16, got {rank}"
                    )));
                }
            }
            ProcessClass::FbmSde { hurst, scheme, .. } => {
                check_hurst(*hurst, 0.0)?;
                let floor = match scheme {
                    SdeScheme::EulerYoung => 0.5,
                    SdeScheme::MilsteinLevel2 => 1.0 / 3.0,
                };
                if *hurst <= floor {
                    return Err(Error::SchemeMismatch(format!(
                        "scheme {scheme:?} needs hurst > {floor:.4}, got {hurst}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn hurst(&self) -> f64 {
        match &self.class {
            ProcessClass::Fbm { hurst }
            | ProcessClass::GaussianQuasiHelix { hurst, .. }
            | ProcessClass::Rosenblatt { hurst, .. }
            | ProcessClass::FbmSde { hurst, .. } => *hurst,
        }
    }

    /// Path regularity exponent; equals the Hurst parameter for every
    /// implemented family.
    pub fn alpha(&self) -> f64 {
        self.hurst()
    }

    /// Growth exponent entering the iterated-logarithm normalizers.
    pub fn theta(&self) -> f64 {
        match &self.class {
            ProcessClass::Fbm { .. }
            | ProcessClass::GaussianQuasiHelix { .. }
            | ProcessClass::Rosenblatt { .. } => 0.0,
            ProcessClass::FbmSde { hurst, .. } => 4.0 / hurst,
        }
    }

    /// Exponent of the logarithmic factor in the path modulus.
    pub fn iota(&self) -> f64 {
        match &self.class {
            ProcessClass::Rosenblatt { .. } => 1.0,
            _ => 0.5,
        }
    }

    /// Local-time experiments need `alpha * d < 1`.
    pub fn check_local_time_regime(&self) -> Result<()> {
        let ad = self.alpha() * self.dim as f64;
        if ad >= 1.0 {
            return Err(Error::NotApplicable(format!(
                "local-time hypotheses need alpha*d < 1 (alpha in (0, 1/d)); \
                 got alpha={}, d={}, alpha*d={ad}",
                self.alpha(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn check_hurst(h: f64, lower: f64) -> Result<()> {
    if !(h > lower && h < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hurst exponent must lie in ({lower}, 1), got {h}"
        )));
    }
    Ok(())
}

/// A discretized path: (n_steps + 1) points in R^dim on a uniform grid.
/// Values are stored row-major, one dim-vector per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        let want = (grid.n_steps() + 1) * dim;
        if values.len() != want {
            return Err(Error::InvalidParameter(format!(
                "path needs {want} values ({} points x {dim} components), got {}",
                grid.n_steps() + 1,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite path value at flat index {bad}"
            )));
        }
        Ok(Self { grid, dim, values })
    }

    /// Assembles a path from independent per-component series.
    pub fn from_components(grid: TimeGrid, components: &[Vec<f64>]) -> Result<Self> {
        let dim = components.len();
        let n = grid.n_steps() + 1;
        if dim == 0 || components.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter(
                "each component series must have n_steps + 1 values".into(),
            ));
        }
        let mut values = Vec::with_capacity(n * dim);
        for k in 0..n {
            for comp in components {
                values.push(comp[k]);
            }
        }
        Self::new(grid, dim, values)
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_steps() + 1
    }

    /// The dim-vector at grid index `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Component `l` at grid index `k`.
    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.dim + l]
    }

    /// Scalar value at index `k`; panics unless dim == 1.
    pub fn scalar(&self, k: usize) -> f64 {
        assert_eq!(self.dim, 1);
        self.values[k]
    }

    pub fn component(&self, l: usize) -> Vec<f64> {
        (0..self.n_points()).map(|k| self.value(k, l)).collect()
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }

    /// Per-component (min, max) over grid indices `lo..=hi`.
    pub fn component_range(&self, lo: usize, hi: usize) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for k in lo..=hi {
            for (l, r) in out.iter_mut().enumerate() {
                let v = self.value(k, l);
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        out
    }

    /// Max-norm deviation from the point at `center` over indices `lo..=hi`.
    pub fn sup_deviation(&self, center: usize, lo: usize, hi: usize) -> f64 {
        let c = self.at(center).to_vec();
        let mut best: f64 = 0.0;
        for k in lo..=hi {
            let mut dev: f64 = 0.0;
            for l in 0..self.dim {
                dev = dev.max((self.value(k, l) - c[l]).abs());
            }
            best = best.max(dev);
        }
        best
    }

    /// Keeps every `stride`-th point (endpoints included), producing the
    /// same path on a grid coarsened by that factor.
    pub fn restrict(&self, stride: usize) -> Result<SamplePath> {
        if stride == 0 || self.grid.n_steps() % stride != 0 {
            return Err(Error::InvalidGrid(format!(
                "stride {stride} does not divide {} steps",
                self.grid.n_steps()
            )));
        }
        let coarse = TimeGrid::new(
            self.grid.t_start(),
            self.grid.t_end(),
            self.grid.n_steps() / stride,
        )?;
        let mut values = Vec::with_capacity((coarse.n_steps() + 1) * self.dim);
        for k in 0..=coarse.n_steps() {
            values.extend_from_slice(self.at(k * stride));
        }
        SamplePath::new(coarse, self.dim, values)
    }

    /// Maximal max-norm oscillation over all index pairs at distance
    /// <= `lag` steps: sliding-window min/max per component, O(n) per call.
    pub fn oscillation(&self, lag: usize) -> f64 {
        assert!(lag >= 1);
        let n = self.n_points();
        let mut best: f64 = 0.0;
        for l in 0..self.dim {
            // monotonic deques over windows of lag+1 points
            let mut maxq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
            let mut minq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
            for k in 0..n {
                let v = self.value(k, l);
                while maxq.back().is_some_and(|&j| self.value(j, l) <= v) {
                    maxq.pop_back();
                }
                maxq.push_back(k);
                while minq.back().is_some_and(|&j| self.value(j, l) >= v) {
                    minq.pop_back();
                }
                minq.push_back(k);
                let start = k.saturating_sub(lag);
                while *maxq.front().unwrap() < start {
                    maxq.pop_front();
                }
                while *minq.front().unwrap() < start {
                    minq.pop_front();
                }
                if k >= lag {
                    let w = self.value(*maxq.front().unwrap(), l)
                        - self.value(*minq.front().unwrap(), l);
                    best = best.max(w);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn exponent_conventions() {
        let fbm = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.3 }, 1).unwrap();
        assert_eq!(fbm.alpha(), 0.3);
        assert_eq!(fbm.theta(), 0.0);
        assert_eq!(fbm.iota(), 0.5);

        let ros = ProcessSpec::new(
            ProcessClass::Rosenblatt {
                hurst: 0.7,
                rank: 64,
            },
            1,
        )
        .unwrap();
        assert_eq!(ros.theta(), 0.0);
        assert_eq!(ros.iota(), 1.0);

        let sde = ProcessSpec::new(
            ProcessClass::FbmSde {
                hurst: 0.8,
                scheme: SdeScheme::EulerYoung,
                field: FieldKind::Linear,
                x0: 1.0,
            },
            1,
        )
        .unwrap();
        assert_eq!(sde.theta(), 5.0);
        assert_eq!(sde.iota(), 0.5);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(ProcessSpec::new(ProcessClass::Fbm { hurst: 1.0 }, 1).is_err());
        assert!(ProcessSpec::new(ProcessClass::Fbm { hurst: 0.5 }, 0).is_err());
        assert!(ProcessSpec::new(
            ProcessClass::Rosenblatt {
                hurst: 0.4,
                rank: 64
            },
            1
        )
        .is_err());
        assert!(ProcessSpec::new(
            ProcessClass::Rosenblatt {
                hurst: 0.7,
                rank: 64
            },
            2
        )
        .is_err());
        // Young scheme requires H > 1/2
        assert!(ProcessSpec::new(
            ProcessClass::FbmSde {
                hurst: 0.4,
                scheme: SdeScheme::EulerYoung,
                field: FieldKind::Linear,
                x0: 1.0,
            },
            1,
        )
        .is_err());
        // the level-2 scheme reaches down to 1/3
        assert!(ProcessSpec::new(
            ProcessClass::FbmSde {
                hurst: 0.4,
                scheme: SdeScheme::MilsteinLevel2,
                field: FieldKind::Linear,
                x0: 1.0,
            },
            1,
        )
        .is_ok());
    }

    #[test]
    fn local_time_regime_gate() {
        let ok = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.45 }, 2).unwrap();
        assert!(ok.check_local_time_regime().is_ok());
        let bad = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.6 }, 2).unwrap();
        assert!(bad.check_local_time_regime().is_err());
    }

    #[test]
    fn path_layout_round_trip() {
        let g = grid(2);
        let p =
            SamplePath::from_components(g, &[vec![0.0, 1.0, 2.0], vec![5.0, 6.0, 7.0]]).unwrap();
        assert_eq!(p.dim, 2);
        assert_eq!(p.at(1), &[1.0, 6.0]);
        assert_eq!(p.value(2, 1), 7.0);
        assert_eq!(p.component(0), vec![0.0, 1.0, 2.0]);
        assert!(SamplePath::new(g, 2, vec![0.0; 5]).is_err());
        assert!(SamplePath::new(g, 1, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn restriction_keeps_endpoints_and_stride_points() {
        let g = grid(8);
        let vals: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let p = SamplePath::new(g, 1, vals).unwrap();
        let r = p.restrict(4).unwrap();
        assert_eq!(r.grid.n_steps(), 2);
        assert_eq!(r.component(0), vec![0.0, 4.0, 8.0]);
        assert!(p.restrict(3).is_err());
        assert!(p.restrict(0).is_err());
    }

    #[test]
    fn oscillation_matches_brute_force() {
        let g = grid(7);
        let vals = vec![0.0, 1.0, -0.5, 0.25, 2.0, 1.5, -1.0, 0.0];
        let p = SamplePath::new(g, 1, vals.clone()).unwrap();
        for lag in 1..=7usize {
            let mut want: f64 = 0.0;
            for i in 0..vals.len() {
                for j in i..(i + lag + 1).min(vals.len()) {
                    want = want.max((vals[j] - vals[i]).abs());
                }
            }
            assert_eq!(p.oscillation(lag), want, "lag {lag}");
        }
    }

    #[test]
    fn sup_deviation_and_range() {
        let g = grid(3);
        let p = SamplePath::new(g, 1, vec![0.0, 3.0, -1.0, 0.5]).unwrap();
        assert_eq!(p.sup_deviation(0, 0, 3), 3.0);
        assert_eq!(p.sup_deviation(2, 1, 3), 4.0);
        assert_eq!(p.component_range(0, 3), vec![(-1.0, 3.0)]);
    }
}
