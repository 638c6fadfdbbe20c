//! Exact simulation of centered Gaussian processes with fBm-type
//! covariances, plus covariance-exact diagnostics: characteristic functions
//! of increment combinations and a local-nondeterminism probe.
//!
//! Both samplers are exact in law: Cholesky factors the target covariance
//! on the grid directly; the circulant embedding diagonalizes the
//! stationary increment covariance with an FFT. Neither introduces
//! discretization bias, so sampled paths can back exact distributional
//! tests.

use nalgebra::DMatrix;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numeric::KahanSum;
use crate::process::{ProcessClass, SamplePath};
use crate::rng::RngStream;

/// Covariance of fractional Brownian motion,
/// `R(s,t) = (t^2H + s^2H - |t-s|^2H) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hurst exponent must lie in (0,1), got {hurst}"
        )));
    }
    if s < 0.0 || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative time: s={s}, t={t}"
        )));
    }
    let two_h = 2.0 * hurst;
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// One-dimensional covariance function for a path component. Multi-
/// dimensional paths use independent copies per component.
#[derive(Clone)]
pub enum Covariance {
    Fbm {
        hurst: f64,
    },
    /// `a * R_h + b * R_h2` with `h2 >= h`: increment variance sandwiched
    /// between `a|t-s|^2h` and `(a+b)|t-s|^2h` on horizons <= 1.
    Mixture {
        hurst: f64,
        hurst2: f64,
        a: f64,
        b: f64,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Covariance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Covariance::Fbm { hurst } => write!(f, "Fbm {{ hurst: {hurst} }}"),
            Covariance::Mixture {
                hurst,
                hurst2,
                a,
                b,
            } => {
                write!(
                    f,
                    "Mixture {{ hurst: {hurst}, hurst2: {hurst2}, a: {a}, b: {b} }}"
                )
            }
            Covariance::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Covariance {
    pub fn fbm(hurst: f64) -> Result<Self> {
        fbm_covariance(0.0, 0.0, hurst)?;
        Ok(Covariance::Fbm { hurst })
    }

    pub fn quasi_helix(hurst: f64, hurst2: f64, a: f64, b: f64) -> Result<Self> {
        fbm_covariance(0.0, 0.0, hurst)?;
        fbm_covariance(0.0, 0.0, hurst2)?;
        if hurst2 < hurst || !(a > 0.0) || !(b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture needs hurst2 >= hurst, a > 0, b >= 0; got ({hurst}, {hurst2}, {a}, {b})"
            )));
        }
        Ok(Covariance::Mixture {
            hurst,
            hurst2,
            a,
            b,
        })
    }

    pub fn custom<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(r: F) -> Self {
        Covariance::Custom(Arc::new(r))
    }

    /// The Gaussian families in `ProcessClass`; other classes have none.
    pub fn from_process(class: &ProcessClass) -> Option<Self> {
        match class {
            ProcessClass::Fbm { hurst } => Some(Covariance::Fbm { hurst: *hurst }),
            ProcessClass::GaussianQuasiHelix {
                hurst,
                hurst2,
                a,
                b,
            } => Some(Covariance::Mixture {
                hurst: *hurst,
                hurst2: *hurst2,
                a: *a,
                b: *b,
            }),
            _ => None,
        }
    }

    /// r(s, t).
    pub fn r(&self, s: f64, t: f64) -> f64 {
        match self {
            Covariance::Fbm { hurst } => {
                let two_h = 2.0 * hurst;
                0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
            }
            Covariance::Mixture {
                hurst,
                hurst2,
                a,
                b,
            } => {
                let r1 = Covariance::Fbm { hurst: *hurst }.r(s, t);
                let r2 = Covariance::Fbm { hurst: *hurst2 }.r(s, t);
                a * r1 + b * r2
            }
            Covariance::Custom(f) => f(s, t),
        }
    }

    /// E (X_t - X_s)^2 per component.
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        (self.r(t, t) + self.r(s, s) - 2.0 * self.r(s, t)).max(0.0)
    }

    /// Declared sandwich `c_minus |t-s|^2h <= E(X_t-X_s)^2 <= c_plus |t-s|^2h`
    /// (valid on horizons <= 1 for the mixture).
    pub fn declared_sandwich(&self) -> Option<(f64, f64, f64)> {
        match self {
            Covariance::Fbm { hurst } => Some((*hurst, 1.0, 1.0)),
            Covariance::Mixture { hurst, a, b, .. } => Some((*hurst, *a, *a + *b)),
            Covariance::Custom(_) => None,
        }
    }

    /// Whether increments on a uniform grid are stationary, enabling the
    /// FFT-based sampler.
    pub fn stationary_increments(&self) -> bool {
        matches!(self, Covariance::Fbm { .. } | Covariance::Mixture { .. })
    }

    /// Autocovariance of unit-lag increments on a uniform grid of step
    /// `dt`: gamma(k) = Cov(X_{(k+1)dt} - X_{k dt}, X_dt - X_0).
    fn increment_autocov(&self, k: usize, dt: f64) -> f64 {
        fn fgn(hurst: f64, k: usize, dt: f64) -> f64 {
            let two_h = 2.0 * hurst;
            let kf = k as f64;
            0.5 * dt.powf(two_h)
                * ((kf + 1.0).powf(two_h) - 2.0 * kf.powf(two_h) + (kf - 1.0).abs().powf(two_h))
        }
        match self {
            Covariance::Fbm { hurst } => fgn(*hurst, k, dt),
            Covariance::Mixture {
                hurst,
                hurst2,
                a,
                b,
            } => a * fgn(*hurst, k, dt) + b * fgn(*hurst2, k, dt),
            Covariance::Custom(_) => unreachable!("custom covariances use Cholesky"),
        }
    }
}

/// Verifies the declared increment-variance sandwich on the given time pairs.
pub fn verify_sandwich(cov: &Covariance, pairs: &[(f64, f64)]) -> Result<()> {
    let Some((h, c_minus, c_plus)) = cov.declared_sandwich() else {
        return Err(Error::NotApplicable(
            "no declared sandwich for this covariance".into(),
        ));
    };
    for &(s, t) in pairs {
        let v = cov.increment_variance(s, t);
        let gap = (t - s).abs().powf(2.0 * h);
        let slack = 1e-12 * gap.max(1.0);
        if v < c_minus * gap - slack || v > c_plus * gap + slack {
            return Err(Error::InvalidParameter(format!(
                "increment variance {v} outside [{}, {}] at (s,t)=({s},{t})",
                c_minus * gap,
                c_plus * gap
            )));
        }
    }
    Ok(())
}

/// Sampler selection. `Auto` uses the FFT path for stationary-increment
/// covariances on long grids starting at 0 and Cholesky otherwise, falling
/// back to Cholesky when the embedding is not nonnegative definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    #[default]
    Auto,
    Cholesky,
    CirculantEmbedding,
}

/// Grids longer than this default to the FFT sampler when eligible.
pub const CIRCULANT_THRESHOLD: usize = 512;

// relative tolerance for clipping round-off negative embedding eigenvalues
const EIG_CLIP_REL: f64 = 1e-9;

enum Backend {
    Cholesky {
        // lower-triangular factor over the grid points with positive time
        factor: DMatrix<f64>,
        // true when the first grid point is t = 0 and pinned to X = 0
        pinned_origin: bool,
    },
    Circulant {
        // sqrt(lambda_j / M), M = 2 n_steps, after clipping
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
        clipped: usize,
    },
}

/// Factorized sampler for one covariance on one grid; immutable and
/// shareable across replicas. All `dim` components are drawn independently
/// from one stream per call.
pub struct GaussianSampler {
    grid: TimeGrid,
    dim: usize,
    backend: Backend,
}

impl GaussianSampler {
    pub fn new(
        cov: &Covariance,
        dim: usize,
        grid: TimeGrid,
        method: SamplingMethod,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let circulant_ok =
            cov.stationary_increments() && grid.t_start() == 0.0 && grid.n_steps() >= 2;
        match method {
            SamplingMethod::Cholesky => Self::build_cholesky(cov, dim, grid),
            SamplingMethod::CirculantEmbedding => {
                if !circulant_ok {
                    return Err(Error::NotApplicable(
                        "circulant embedding needs stationary increments and t_start = 0".into(),
                    ));
                }
                Self::build_circulant(cov, dim, grid)
            }
            SamplingMethod::Auto => {
                if circulant_ok && grid.n_steps() > CIRCULANT_THRESHOLD {
                    match Self::build_circulant(cov, dim, grid) {
                        Ok(s) => Ok(s),
                        Err(Error::EmbeddingFallback { .. }) => {
                            Self::build_cholesky(cov, dim, grid)
                        }
                        Err(e) => Err(e),
                    }
                } else {
                    Self::build_cholesky(cov, dim, grid)
                }
            }
        }
    }

    fn build_cholesky(cov: &Covariance, dim: usize, grid: TimeGrid) -> Result<Self> {
        let pinned_origin = grid.t_start() == 0.0;
        let first = if pinned_origin { 1 } else { 0 };
        let n = grid.n_steps() + 1 - first;
        let m = DMatrix::from_fn(n, n, |i, j| {
            cov.r(grid.point(first + i), grid.point(first + j))
        });
        // tiny diagonal lift absorbs round-off when the matrix is merely PSD
        let lift = 1e-12 * m.diagonal().amax().max(1.0);
        let lifted = &m + DMatrix::from_diagonal_element(n, n, lift);
        let chol = lifted.cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite(format!(
                "covariance on {n} grid points failed Cholesky factorization"
            ))
        })?;
        Ok(Self {
            grid,
            dim,
            backend: Backend::Cholesky {
                factor: chol.unpack(),
                pinned_origin,
            },
        })
    }

    fn build_circulant(cov: &Covariance, dim: usize, grid: TimeGrid) -> Result<Self> {
        let n = grid.n_steps();
        let m = 2 * n;
        let dt = grid.step();
        // first row of the circulant: gamma(0..n), then mirrored
        let mut c: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
        for k in 0..=n {
            c[k].re = cov.increment_autocov(k, dt);
        }
        for k in 1..n {
            c[m - k].re = c[k].re;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut c);
        let lambda: Vec<f64> = c.iter().map(|z| z.re).collect();
        let lam_max = lambda.iter().cloned().fold(0.0, f64::max);
        let lam_min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        if lam_min < -EIG_CLIP_REL * lam_max {
            return Err(Error::EmbeddingFallback { min_eig: lam_min });
        }
        let clipped = lambda.iter().filter(|&&l| l < 0.0).count();
        let scale: Vec<f64> = lambda
            .iter()
            .map(|&l| (l.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self {
            grid,
            dim,
            backend: Backend::Circulant {
                scale,
                fft,
                clipped,
            },
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn method_used(&self) -> SamplingMethod {
        match self.backend {
            Backend::Cholesky { .. } => SamplingMethod::Cholesky,
            Backend::Circulant { .. } => SamplingMethod::CirculantEmbedding,
        }
    }

    /// Number of embedding eigenvalues clipped to zero (round-off only).
    pub fn clipped_eigenvalues(&self) -> usize {
        match &self.backend {
            Backend::Cholesky { .. } => 0,
            Backend::Circulant { clipped, .. } => *clipped,
        }
    }

    /// Draws one path; exact finite-dimensional law on the grid.
    pub fn sample(&self, rng: &mut RngStream) -> SamplePath {
        let n_pts = self.grid.n_steps() + 1;
        let mut components: Vec<Vec<f64>> = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            components.push(self.sample_component(rng, n_pts));
        }
        SamplePath::from_components(self.grid, &components).expect("sampler output is well-formed")
    }

    fn sample_component(&self, rng: &mut RngStream, n_pts: usize) -> Vec<f64> {
        match &self.backend {
            Backend::Cholesky {
                factor,
                pinned_origin,
            } => {
                let n = factor.nrows();
                let z = rng.normal_vec(n);
                let mut out = Vec::with_capacity(n_pts);
                if *pinned_origin {
                    out.push(0.0);
                }
                // lower-triangular multiply
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += factor[(i, j)] * z[j];
                    }
                    out.push(acc);
                }
                out
            }
            Backend::Circulant { scale, fft, .. } => {
                let m = scale.len();
                let n = m / 2;
                let mut w = vec![Complex::new(0.0, 0.0); m];
                w[0] = Complex::new(scale[0] * rng.standard_normal(), 0.0);
                let half = std::f64::consts::FRAC_1_SQRT_2;
                for j in 1..n {
                    let a = rng.standard_normal();
                    let b = rng.standard_normal();
                    let s = scale[j] * half;
                    w[j] = Complex::new(s * a, s * b);
                    w[m - j] = w[j].conj();
                }
                w[n] = Complex::new(scale[n] * rng.standard_normal(), 0.0);
                fft.process(&mut w);
                // first n outputs are exact stationary increments; integrate
                let mut out = Vec::with_capacity(n_pts);
                out.push(0.0);
                let mut acc = KahanSum::new();
                for wj in w.iter().take(n) {
                    acc.add(wj.re);
                    out.push(acc.value());
                }
                out
            }
        }
    }

    /// Covariance of the sampled path implied by the factorization itself
    /// (per component), over all grid points. Used by exactness checks.
    pub fn implied_covariance(&self) -> DMatrix<f64> {
        let n_pts = self.grid.n_steps() + 1;
        match &self.backend {
            Backend::Cholesky {
                factor,
                pinned_origin,
            } => {
                let ll = factor * factor.transpose();
                if !pinned_origin {
                    return ll;
                }
                let mut full = DMatrix::zeros(n_pts, n_pts);
                for i in 1..n_pts {
                    for j in 1..n_pts {
                        full[(i, j)] = ll[(i - 1, j - 1)];
                    }
                }
                full
            }
            Backend::Circulant { scale, .. } => {
                let m = scale.len();
                let n = m / 2;
                // increment autocovariance implied by the (clipped) spectrum:
                // inverse DFT of lambda
                let mut planner = FftPlanner::new();
                let ifft = planner.plan_fft_inverse(m);
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|&s| Complex::new(s * s * m as f64, 0.0))
                    .collect();
                ifft.process(&mut buf);
                let gamma: Vec<f64> = buf.iter().map(|z| z.re / m as f64).collect();
                let mut cov_inc = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        cov_inc[(i, j)] = gamma[(i as isize - j as isize).unsigned_abs()];
                    }
                }
                // path covariance by cumulative double sums
                let mut full = DMatrix::zeros(n_pts, n_pts);
                for i in 1..n_pts {
                    for j in 1..n_pts {
                        full[(i, j)] = full[(i - 1, j)] + full[(i, j - 1)] - full[(i - 1, j - 1)]
                            + cov_inc[(i - 1, j - 1)];
                    }
                }
                full
            }
        }
    }
}

/// Covariance matrix of the increments over a strictly increasing partition
/// (one component; components are independent and identical).
pub fn increment_covariance(cov: &Covariance, partition: &[f64]) -> Result<DMatrix<f64>> {
    if partition.len() < 2 {
        return Err(Error::InvalidParameter(
            "partition needs at least two times".into(),
        ));
    }
    if partition.windows(2).any(|w| w[1] <= w[0]) || partition[0] < 0.0 {
        return Err(Error::InvalidParameter(
            "partition must be strictly increasing and nonnegative".into(),
        ));
    }
    let m = partition.len() - 1;
    Ok(DMatrix::from_fn(m, m, |j, k| {
        let (a0, a1) = (partition[j], partition[j + 1]);
        let (b0, b1) = (partition[k], partition[k + 1]);
        cov.r(a1, b1) - cov.r(a1, b0) - cov.r(a0, b1) + cov.r(a0, b0)
    }))
}

/// Exact magnitude of the characteristic function of
/// `sum_j <xi_j, X_{t_j} - X_{t_{j-1}}>`: equals `exp(-Var/2)`.
///
/// `xi` holds one frequency d-vector per increment, flattened; components
/// of the process are independent copies of `cov`.
pub fn gaussian_charfn(cov: &Covariance, dim: usize, partition: &[f64], xi: &[f64]) -> Result<f64> {
    let m = partition.len().saturating_sub(1);
    if xi.len() != m * dim {
        return Err(Error::InvalidParameter(format!(
            "need {m} increments x {dim} components = {} frequencies, got {}",
            m * dim,
            xi.len()
        )));
    }
    let cov_inc = increment_covariance(cov, partition)?;
    let mut var = 0.0;
    for l in 0..dim {
        for j in 0..m {
            for k in 0..m {
                var += xi[j * dim + l] * xi[k * dim + l] * cov_inc[(j, k)];
            }
        }
    }
    Ok((-0.5 * var).exp())
}

/// Outcome of the local-nondeterminism probe: the smallest observed ratio
///
///   Var(sum_k <xi_k, dX_k>) / sum_k |xi_k|^2 Var(dX_k)
///
/// over random and adversarial (partition, xi) choices. Strictly positive
/// ratios bounded away from 0 indicate that no increment combination is
/// degenerate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LndReport {
    pub m_max: usize,
    pub trials: usize,
    pub min_ratio: f64,
    pub worst_partition: Vec<f64>,
    pub worst_xi: Vec<f64>,
}

fn lnd_ratio(cov_inc: &DMatrix<f64>, dim: usize, xi: &[f64]) -> f64 {
    let m = cov_inc.nrows();
    let mut num = 0.0;
    let mut den = 0.0;
    for l in 0..dim {
        for j in 0..m {
            den += xi[j * dim + l] * xi[j * dim + l] * cov_inc[(j, j)];
            for k in 0..m {
                num += xi[j * dim + l] * xi[k * dim + l] * cov_inc[(j, k)];
            }
        }
    }
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Probes the local-nondeterminism ratio with random partitions/frequencies
/// plus a deterministic adversarial family (uniform and geometric dyadic
/// partitions with alternating-sign frequencies). Ratios are computed from
/// the exact covariance quadratic form, never from simulation.
pub fn check_lnd(
    cov: &Covariance,
    dim: usize,
    m_max: usize,
    trials: usize,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<LndReport> {
    if m_max < 1 || trials < 1 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter(
            "lnd probe needs m_max >= 1, trials >= 1, horizon > 0".into(),
        ));
    }
    let mut min_ratio = f64::INFINITY;
    let mut worst_partition = Vec::new();
    let mut worst_xi = Vec::new();
    let mut consider = |partition: &[f64], xi: &[f64]| -> Result<()> {
        let cov_inc = increment_covariance(cov, partition)?;
        let ratio = lnd_ratio(&cov_inc, dim, xi);
        if ratio < min_ratio {
            min_ratio = ratio;
            worst_partition = partition.to_vec();
            worst_xi = xi.to_vec();
        }
        Ok(())
    };

    // adversarial family: equispaced and geometric partitions, alternating xi
    for m in 1..=m_max {
        for geometric in [false, true] {
            let mut partition = Vec::with_capacity(m + 1);
            if geometric {
                // 0, T 2^{-m+1}, ..., T/2, T: increments pile up near 0
                partition.push(0.0);
                for k in (0..m).rev() {
                    partition.push(horizon * 0.5f64.powi(k as i32));
                }
            } else {
                for k in 0..=m {
                    partition.push(horizon * k as f64 / m as f64);
                }
            }
            let xi: Vec<f64> = (0..m * dim)
                .map(|j| if (j / dim) % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            consider(&partition, &xi)?;
        }
    }

    // random probes: sorted uniform partitions, standard-normal frequencies
    for _ in 0..trials {
        let m = 1 + (rng.below(m_max as u64) as usize);
        let mut inner: Vec<f64> = (0..m).map(|_| horizon * rng.uniform()).collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        inner.dedup();
        let mut partition = vec![0.0];
        partition.extend(inner.into_iter().filter(|&t| t > 0.0));
        if partition.len() < 2 {
            continue;
        }
        let m_eff = partition.len() - 1;
        let mut xi = rng.normal_vec(m_eff * dim);
        if xi.iter().all(|&v| v == 0.0) {
            xi[0] = 1.0;
        }
        consider(&partition, &xi)?;
    }

    Ok(LndReport {
        m_max,
        trials,
        min_ratio,
        worst_partition,
        worst_xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngStream, StreamId};

    fn stream(replica: u32) -> RngStream {
        RngStream::substream(0xA5A5, StreamId::new(90, replica))
    }

    #[test]
    fn fbm_covariance_values() {
        for h in [0.3, 0.5, 0.7] {
            assert!((fbm_covariance(1.0, 1.0, h).unwrap() - 1.0).abs() < 1e-15);
            let t: f64 = 1.7;
            assert!((fbm_covariance(t, t, h).unwrap() - t.powf(2.0 * h)).abs() < 1e-15);
        }
        // H = 1/2 is Brownian motion: R(s,t) = min(s,t)
        assert!((fbm_covariance(1.0, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(fbm_covariance(1.0, 2.0, 0.0).is_err());
        assert!(fbm_covariance(-1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn sandwich_holds_for_mixture() {
        let cov = Covariance::quasi_helix(0.4, 0.6, 1.0, 0.5).unwrap();
        let pairs: Vec<(f64, f64)> = (0..50)
            .map(|k| (0.013 * k as f64, 0.013 * k as f64 + 0.31))
            .collect();
        verify_sandwich(&cov, &pairs).unwrap();
    }

    #[test]
    fn cholesky_factorization_implies_target_covariance() {
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        for h in [0.3, 0.5, 0.7] {
            let cov = Covariance::fbm(h).unwrap();
            let sampler = GaussianSampler::new(&cov, 1, grid, SamplingMethod::Cholesky).unwrap();
            let implied = sampler.implied_covariance();
            for i in 0..=8 {
                for j in 0..=8 {
                    let want = cov.r(grid.point(i), grid.point(j));
                    assert!(
                        (implied[(i, j)] - want).abs() < 1e-8,
                        "H={h} ({i},{j}): {} vs {want}",
                        implied[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn circulant_embedding_implies_target_covariance() {
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        for h in [0.3, 0.5, 0.7] {
            let cov = Covariance::fbm(h).unwrap();
            let sampler =
                GaussianSampler::new(&cov, 1, grid, SamplingMethod::CirculantEmbedding).unwrap();
            let implied = sampler.implied_covariance();
            for i in 0..=64 {
                for j in 0..=64 {
                    let want = cov.r(grid.point(i), grid.point(j));
                    assert!(
                        (implied[(i, j)] - want).abs() < 1e-8,
                        "H={h} ({i},{j}): {} vs {want}",
                        implied[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn offset_grid_uses_unpinned_cholesky() {
        let grid = TimeGrid::new(0.5, 1.0, 4).unwrap();
        let cov = Covariance::fbm(0.7).unwrap();
        let sampler = GaussianSampler::new(&cov, 1, grid, SamplingMethod::Auto).unwrap();
        assert_eq!(sampler.method_used(), SamplingMethod::Cholesky);
        let implied = sampler.implied_covariance();
        // first point has the full marginal variance 0.5^{2H}
        assert!((implied[(0, 0)] - 0.5f64.powf(1.4)).abs() < 1e-8);
        let mut rng = stream(0);
        let p = sampler.sample(&mut rng);
        assert_eq!(p.n_points(), 5);
        assert_ne!(p.scalar(0), 0.0);
    }

    #[test]
    fn auto_switches_to_fft_on_long_grids() {
        let cov = Covariance::fbm(0.7).unwrap();
        let short = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let long = TimeGrid::new(0.0, 1.0, 1024).unwrap();
        let s1 = GaussianSampler::new(&cov, 1, short, SamplingMethod::Auto).unwrap();
        let s2 = GaussianSampler::new(&cov, 1, long, SamplingMethod::Auto).unwrap();
        assert_eq!(s1.method_used(), SamplingMethod::Cholesky);
        assert_eq!(s2.method_used(), SamplingMethod::CirculantEmbedding);
    }

    #[test]
    fn sampling_is_reproducible_and_starts_at_zero() {
        let grid = TimeGrid::new(0.0, 1.0, 32).unwrap();
        let cov = Covariance::fbm(0.3).unwrap();
        let sampler = GaussianSampler::new(&cov, 2, grid, SamplingMethod::Cholesky).unwrap();
        let p1 = sampler.sample(&mut stream(1));
        let p2 = sampler.sample(&mut stream(1));
        assert_eq!(p1, p2);
        assert_eq!(p1.at(0), &[0.0, 0.0]);
        let p3 = sampler.sample(&mut stream(2));
        assert_ne!(p1, p3);
    }

    #[test]
    fn charfn_single_brownian_increment() {
        let cov = Covariance::fbm(0.5).unwrap();
        let v = gaussian_charfn(&cov, 1, &[0.0, 1.0], &[1.0]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        let one = gaussian_charfn(&cov, 1, &[0.0, 1.0], &[0.0]).unwrap();
        assert_eq!(one, 1.0);
        assert!(gaussian_charfn(&cov, 1, &[1.0, 0.5], &[1.0]).is_err());
        assert!(gaussian_charfn(&cov, 1, &[0.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn charfn_decay_dominated_by_power_bounds() {
        // single increment: value = exp(-x^2/2) with x = |xi| dt^H;
        // dominated by 1 (k=0) and by (4/e)^2 x^-4 (k=4) whenever x >= 2
        let c4 = 16.0 * (-2.0f64).exp();
        for &h in &[0.3, 0.5, 0.7] {
            let cov = Covariance::fbm(h).unwrap();
            for &dt in &[0.25, 0.0625, 0.015625] {
                for &xi in &[1.0, 4.0, 16.0, 64.0, 256.0] {
                    let v = gaussian_charfn(&cov, 1, &[0.0, dt], &[xi]).unwrap();
                    assert!(v <= 1.0);
                    let x = xi * dt.powf(h);
                    if x >= 2.0 {
                        assert!(
                            v <= c4 * x.powi(-4) + 1e-300,
                            "H={h} dt={dt} xi={xi}: {v} vs {}",
                            c4 * x.powi(-4)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lnd_ratio_is_one_for_brownian_motion() {
        let cov = Covariance::fbm(0.5).unwrap();
        let mut rng = stream(3);
        let report = check_lnd(&cov, 1, 6, 1000, 1.0, &mut rng).unwrap();
        assert!(
            (report.min_ratio - 1.0).abs() < 1e-10,
            "min_ratio = {}",
            report.min_ratio
        );
    }

    #[test]
    fn lnd_single_increment_is_exactly_one() {
        let cov = Covariance::fbm(0.7).unwrap();
        let mut rng = stream(4);
        let report = check_lnd(&cov, 1, 1, 50, 1.0, &mut rng).unwrap();
        assert!((report.min_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lnd_stays_positive_for_fbm() {
        let mut rng = stream(5);
        for h in [0.3, 0.7] {
            let cov = Covariance::fbm(h).unwrap();
            let report = check_lnd(&cov, 1, 6, 2000, 1.0, &mut rng).unwrap();
            assert!(
                report.min_ratio > 0.05,
                "H={h}: min_ratio = {}",
                report.min_ratio
            );
            assert!(report.min_ratio < 1.0 + 1e-12);
        }
    }
}
