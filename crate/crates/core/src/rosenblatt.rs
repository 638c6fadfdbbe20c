//! Second-chaos self-similar process (Rosenblatt type): a centered
//! quadratic form in Gaussian variables sharing the fBm covariance with the
//! same Hurst exponent while being non-Gaussian.
//!
//! Construction: project the chaos kernel onto `rank` uniform bands of the
//! time-like integration variable. The band functionals are increments of
//! an auxiliary fBm with exponent (H+1)/2, so their Gram matrix is closed
//! form, and
//!
//!   Z_t = c * sum_{q < Q(t)} (W_q^2 - E W_q^2),    W ~ N(0, G),
//!
//! i.e. Z_t = sum_{ij} A_ij(t) (xi_i xi_j - delta_ij) with
//! A(t) = c L^T P(t) L, G = L L^T, P(t) the projector onto the first Q(t)
//! bands. Everything distributional about Z is a function of eigenvalues
//! of compressions of G:
//!
//!   |E exp(i sum_j xi_j (Z_{t_j} - Z_{t_j-1}))| = prod_k (1+4 lambda_k^2)^(-1/4).
//!
//! The sampler draws W as exact fGn (via the Gaussian sampler) and squares
//! it, sharing only the band layout and the normalization constant with the
//! eigenvalue route above, so the two can cross-validate each other.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianSampler, SamplingMethod};
use crate::grid::TimeGrid;
use crate::numeric::KahanSum;
use crate::process::SamplePath;
use crate::rng::RngStream;

/// Band-projected chaos kernel on a grid; immutable, shareable.
pub struct ChaosKernel {
    hurst: f64,
    grid: TimeGrid,
    rank: usize,
    band_width: f64,
    bands_per_step: usize,
    /// Gram matrix of the normalized band functionals W_q.
    gram: DMatrix<f64>,
    /// Lower-triangular factor, gram = factor * factor^T.
    factor: DMatrix<f64>,
    /// Normalization making Var(Z_{t_end}) = t_end^{2H}.
    c_norm: f64,
    band_sampler: GaussianSampler,
}

/// Eigenvalues of a frequency-weighted kernel compression and the resulting
/// characteristic-function magnitude `prod_k (1 + 4 lambda_k^2)^(-1/4)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenProduct {
    pub lambdas: Vec<f64>,
    pub value: f64,
}

impl EigenProduct {
    fn from_lambdas(lambdas: Vec<f64>) -> Self {
        let mut log_val = KahanSum::new();
        for &l in &lambdas {
            log_val.add(-0.25 * (1.0 + 4.0 * l * l).ln());
        }
        Self {
            lambdas,
            value: log_val.value().exp(),
        }
    }

    /// |lambda| sorted descending; the decay rate of this sequence drives
    /// the high-frequency behaviour of the characteristic function.
    pub fn sorted_abs(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lambdas.iter().map(|l| l.abs()).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }
}

impl ChaosKernel {
    /// Builds the kernel. `rank` is rounded up to a multiple of the grid's
    /// step count so every grid time falls on a band boundary.
    pub fn build(hurst: f64, grid: TimeGrid, rank: usize) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "second-chaos process needs hurst in (1/2, 1), got {hurst}"
            )));
        }
        if rank < 16 {
            return Err(Error::InvalidParameter(format!(
                "rank must be >= 16, got {rank}"
            )));
        }
        if grid.t_start() != 0.0 {
            return Err(Error::InvalidGrid(
                "chaos kernel grids must start at t = 0".into(),
            ));
        }
        let n_steps = grid.n_steps();
        let bands_per_step = rank.div_ceil(n_steps);
        let rank = bands_per_step * n_steps;
        let band_width = grid.t_end() / rank as f64;

        // Gram of W_q = (B'_{(q+1)d} - B'_{qd}) / sqrt(d) for an auxiliary
        // fBm B' with exponent (H+1)/2: a scaled fGn Toeplitz form.
        let hp = 0.5 * (hurst + 1.0);
        let gamma: Vec<f64> = (0..rank)
            .map(|m| {
                let mf = m as f64;
                0.5 * band_width.powf(hurst)
                    * ((mf + 1.0).powf(2.0 * hp) - 2.0 * mf.powf(2.0 * hp)
                        + (mf - 1.0).abs().powf(2.0 * hp))
            })
            .collect();
        let gram = DMatrix::from_fn(rank, rank, |i, j| gamma[i.abs_diff(j)]);
        let factor = gram
            .clone()
            .cholesky()
            .ok_or_else(|| {
                Error::NotPositiveDefinite("band Gram matrix failed factorization".into())
            })?
            .unpack();

        // Var(Z_t) of the unnormalized form is 2 ||G_{Q x Q}||_F^2; pin the
        // endpoint variance to t_end^{2H}
        let mut frob2 = KahanSum::new();
        for v in gram.iter() {
            frob2.add(v * v);
        }
        let c_norm = grid.t_end().powf(hurst) / (2.0 * frob2.value()).sqrt();

        let band_grid = TimeGrid::new(0.0, grid.t_end(), rank)?;
        let band_sampler =
            GaussianSampler::new(&Covariance::fbm(hp)?, 1, band_grid, SamplingMethod::Auto)?;

        Ok(Self {
            hurst,
            grid,
            rank,
            band_width,
            bands_per_step,
            gram,
            factor,
            c_norm,
            band_sampler,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Gaussian degrees of freedom (after rounding).
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn normalization(&self) -> f64 {
        self.c_norm
    }

    /// Number of whole bands below time `t` (t must sit on a band boundary
    /// up to round-off).
    fn band_count(&self, t: f64) -> Result<usize> {
        let q = (t / self.band_width).round();
        if (t - q * self.band_width).abs() > 1e-9 * self.grid.t_end() {
            return Err(Error::InvalidParameter(format!(
                "time {t} is not aligned with the band resolution {}",
                self.band_width
            )));
        }
        let q = q as usize;
        if q > self.rank {
            return Err(Error::InvalidParameter(format!(
                "time {t} beyond the kernel horizon {}",
                self.grid.t_end()
            )));
        }
        Ok(q)
    }

    /// The symmetric PSD coefficient matrix A(t) = c L^T P(t) L.
    pub fn a_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        let q = self.band_count(t)?;
        let block = self.factor.rows(0, q);
        Ok(self.c_norm * block.transpose() * block)
    }

    /// Cov(Z_s, Z_t) implied by the kernel: 2 c^2 ||G[0..Qs, 0..Qt]||_F^2.
    pub fn implied_covariance(&self, s: f64, t: f64) -> Result<f64> {
        let qs = self.band_count(s)?;
        let qt = self.band_count(t)?;
        let mut acc = KahanSum::new();
        for i in 0..qs {
            for j in 0..qt {
                let g = self.gram[(i, j)];
                acc.add(g * g);
            }
        }
        Ok(2.0 * self.c_norm * self.c_norm * acc.value())
    }

    /// Eigenvalues lambda_k of `sum_j xi_j (A(t_j) - A(t_{j-1}))` and the
    /// characteristic-function magnitude they induce. Partition times must
    /// sit on band boundaries.
    pub fn charfn_magnitude(&self, partition: &[f64], xi: &[f64]) -> Result<EigenProduct> {
        if partition.len() < 2 || xi.len() != partition.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "need one frequency per increment: {} times, {} frequencies",
                partition.len(),
                xi.len()
            )));
        }
        if partition.windows(2).any(|w| w[1] <= w[0]) || partition[0] < 0.0 {
            return Err(Error::InvalidParameter(
                "partition must be strictly increasing and nonnegative".into(),
            ));
        }
        if xi.iter().all(|&x| x == 0.0) {
            return Ok(EigenProduct::from_lambdas(vec![0.0; self.rank]));
        }
        // per-band frequency weights
        let mut weights = vec![0.0; self.rank];
        let mut q_prev = self.band_count(partition[0])?;
        for (j, &t) in partition.iter().skip(1).enumerate() {
            let q = self.band_count(t)?;
            for w in weights.iter_mut().take(q).skip(q_prev) {
                *w = xi[j];
            }
            q_prev = q;
        }
        // restrict to the touched bands: eig(L^T D L) on the active range
        let lo = self.band_count(partition[0])?;
        let hi = q_prev;
        if lo == hi {
            return Ok(EigenProduct::from_lambdas(vec![0.0; self.rank]));
        }
        let block = self.factor.rows(lo, hi - lo);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            hi - lo,
            weights[lo..hi].iter().cloned(),
        ));
        let m = self.c_norm * block.transpose() * d * block;
        let sym = SymmetricEigen::new(m);
        Ok(EigenProduct::from_lambdas(
            sym.eigenvalues.iter().cloned().collect(),
        ))
    }

    /// Eigenvalues of A(t_end) itself (frequency 1, single increment).
    pub fn endpoint_eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self
            .charfn_magnitude(&[0.0, self.grid.t_end()], &[1.0])?
            .lambdas)
    }

    /// Nonzero eigenvalues of A(tau) with tau rounded to the band
    /// resolution (the kernel is constant across each band). Works at any
    /// lag, unlike the aligned-partition path; empty below half a band.
    ///
    /// Uses the q x q Gram form c L_q L_q^T, which shares its nonzero
    /// spectrum with the rank x rank product.
    pub fn increment_eigenvalues(&self, tau: f64) -> Vec<f64> {
        let q = ((tau / self.band_width).round() as usize).min(self.rank);
        if q == 0 {
            return Vec::new();
        }
        let block = self.factor.rows(0, q);
        let m = self.c_norm * &block * block.transpose();
        SymmetricEigen::new(m).eigenvalues.iter().cloned().collect()
    }

    /// Draws one path on the kernel's grid by squaring exact fGn band
    /// functionals.
    pub fn sample(&self, rng: &mut RngStream) -> SamplePath {
        let aux = self.band_sampler.sample(rng);
        let inv_sqrt_width = 1.0 / self.band_width.sqrt();
        let mut acc = KahanSum::new();
        let mut values = Vec::with_capacity(self.grid.n_steps() + 1);
        values.push(0.0);
        for q in 0..self.rank {
            let w = (aux.scalar(q + 1) - aux.scalar(q)) * inv_sqrt_width;
            acc.add(w * w - self.gram[(q, q)]);
            if (q + 1) % self.bands_per_step == 0 {
                values.push(self.c_norm * acc.value());
            }
        }
        SamplePath::new(self.grid, 1, values).expect("kernel output is well-formed")
    }
}

/// Standard error of the sample variance of Z_{t_end} over `n` replicas,
/// from the exact fourth cumulant 48 sum lambda^4 of the quadratic form.
pub fn variance_se(lambdas: &[f64], n: usize) -> f64 {
    let var: f64 = 2.0 * lambdas.iter().map(|l| l * l).sum::<f64>();
    let kappa4: f64 = 48.0 * lambdas.iter().map(|l| l.powi(4)).sum::<f64>();
    ((kappa4 + 2.0 * var * var) / n as f64).sqrt()
}
