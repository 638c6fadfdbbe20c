//! Existence criterion for square-integrable local times via the
//! characteristic function: nested quadrature of
//! `int_{R^d} int int |E exp(i<xi, X_t - X_s>)| ds dt dxi`
//! over a doubling ladder of frequency shells, with a ratio test on the
//! shell contributions.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Covariance;
use crate::numeric::KahanSum;
use crate::quad::GaussLegendre;
use crate::rosenblatt::ChaosKernel;

/// |E exp(i<xi, X_{s+tau} - X_s>)| for a process with stationary
/// increments, as a function of (xi, tau). Assumed even in every component
/// of xi (true for centered Gaussian laws and for the second-chaos law).
pub struct StationaryCharfn<'a> {
    dim: usize,
    magnitude: Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync + 'a>,
}

impl<'a> StationaryCharfn<'a> {
    pub fn new(dim: usize, magnitude: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'a) -> Self {
        Self {
            dim,
            magnitude: Box::new(magnitude),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, xi: &[f64], tau: f64) -> f64 {
        (self.magnitude)(xi, tau)
    }
}

/// Exact Gaussian magnitude `exp(-|xi|^2 Var(X_{s+tau} - X_s) / 2)` with
/// i.i.d. components.
pub fn gaussian_charfn_provider(cov: Covariance, dim: usize) -> StationaryCharfn<'static> {
    StationaryCharfn::new(dim, move |xi: &[f64], tau: f64| {
        let v = cov.increment_variance(0.0, tau);
        let q: f64 = xi.iter().map(|&x| x * x).sum();
        (-0.5 * q * v).exp()
    })
}

/// Second-chaos magnitude from the eigenvalues of the increment kernel,
/// `prod_k (1 + 4 xi^2 lambda_k^2)^{-1/4}`, with the per-lag eigenvalues
/// cached (they do not depend on xi).
pub fn rosenblatt_charfn_provider(kernel: &ChaosKernel) -> StationaryCharfn<'_> {
    let cache: Mutex<HashMap<u64, Vec<f64>>> = Mutex::new(HashMap::new());
    StationaryCharfn::new(1, move |xi: &[f64], tau: f64| {
        if tau <= 0.0 {
            return 1.0;
        }
        let lambdas = {
            let mut guard = cache.lock().unwrap();
            guard
                .entry(tau.to_bits())
                .or_insert_with(|| kernel.increment_eigenvalues(tau))
                .clone()
        };
        let mut log_sum = KahanSum::new();
        for &l in &lambdas {
            let s = 2.0 * xi[0] * l;
            log_sum.add((1.0 + s * s).ln());
        }
        (-0.25 * log_sum.value()).exp()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BermanVerdict {
    Converged,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BermanReport {
    /// outer cutoff of each shell (sup-norm)
    pub shells: Vec<f64>,
    pub shell_contributions: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// successive-shell ratios
    pub ratios: Vec<f64>,
    pub verdict: BermanVerdict,
    /// geometric extrapolation of the remainder when convergent
    pub extrapolated: Option<f64>,
}

/// Double time integral for one frequency:
/// `int int_{[0,T]^2} phi(xi, |t-s|) ds dt = 2 int_0^T (T - tau) phi dtau`,
/// graded toward tau = 0 where the magnitude concentrates.
pub fn time_integral(charfn: &StationaryCharfn, xi: &[f64], horizon: f64) -> f64 {
    let rule = graded_rule();
    2.0 * rule.integrate_graded_origin(|tau| (horizon - tau) * charfn.eval(xi, tau), horizon, 48)
}

fn graded_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(24))
}

/// Ratio test on frequency shells `[-c 2^k, c 2^k]^d` for the triple
/// integral; `alpha` only informs the report consumer, the quadrature is
/// parameter-free.
pub fn berman_criterion(
    charfn: &StationaryCharfn,
    dim: usize,
    horizon: f64,
    base_cutoff: f64,
    n_shells: usize,
) -> Result<BermanReport> {
    if dim != charfn.dim() {
        return Err(Error::InvalidParameter(
            "provider dimension mismatch".into(),
        ));
    }
    if dim == 0 || dim > 2 {
        return Err(Error::InvalidParameter(
            "shell quadrature implemented for dimensions 1 and 2".into(),
        ));
    }
    if !(horizon > 0.0) || !(base_cutoff > 0.0) || n_shells < 4 {
        return Err(Error::InvalidParameter(
            "need positive horizon/cutoff and at least four shells".into(),
        ));
    }

    let rule = GaussLegendre::new(24);
    let f1 = |x: f64| time_integral(charfn, &[x], horizon);
    let f2 = |x: f64, y: f64| time_integral(charfn, &[x, y], horizon);

    // per-axis evenness: integrate the positive orthant and multiply by 2^d
    let orthant_rect = |ax: (f64, f64), ay: (f64, f64)| -> f64 {
        let mut acc = KahanSum::new();
        for i in 0..rule.nodes().len() {
            let x = 0.5 * (ay.0 + ay.1) + 0.5 * (ay.1 - ay.0) * rule.nodes()[i];
            let wx = 0.5 * (ay.1 - ay.0) * rule.weights()[i];
            let inner = rule.integrate(|u| f2(u, x), ax.0, ax.1);
            acc.add(wx * inner);
        }
        acc.value()
    };

    let mut shells = Vec::with_capacity(n_shells);
    let mut contributions = Vec::with_capacity(n_shells);
    let mut partial = Vec::with_capacity(n_shells);
    let mut total = KahanSum::new();
    let mut prev = 0.0f64;
    for k in 0..n_shells {
        let hi = base_cutoff * 2.0f64.powi(k as i32);
        let c = match dim {
            1 => 2.0 * rule.integrate(f1, prev, hi),
            _ => {
                let ring = if k == 0 {
                    orthant_rect((0.0, hi), (0.0, hi))
                } else {
                    orthant_rect((prev, hi), (0.0, prev)) + orthant_rect((0.0, hi), (prev, hi))
                };
                4.0 * ring
            }
        };
        shells.push(hi);
        contributions.push(c);
        total.add(c);
        partial.push(total.value());
        prev = hi;
    }

    let ratios: Vec<f64> = contributions.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let verdict = if tail.iter().all(|&r| r < 0.9) {
        BermanVerdict::Converged
    } else if tail.iter().all(|&r| r > 1.1) {
        BermanVerdict::Diverged
    } else {
        BermanVerdict::Inconclusive
    };
    let extrapolated = match verdict {
        BermanVerdict::Converged => {
            let rho = *ratios.last().unwrap();
            Some(partial.last().unwrap() + contributions.last().unwrap() * rho / (1.0 - rho))
        }
        _ => None,
    };

    Ok(BermanReport {
        shells,
        shell_contributions: contributions,
        partial_sums: partial,
        ratios,
        verdict,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequency_time_integral_is_horizon_squared() {
        let cov = Covariance::fbm(0.5).unwrap();
        let charfn = gaussian_charfn_provider(cov, 1);
        let t2 = time_integral(&charfn, &[0.0], 1.0);
        assert!((t2 - 1.0).abs() < 1e-10, "T^2 check: {t2}");
        let t2 = time_integral(&charfn, &[0.0], 2.0);
        assert!((t2 - 4.0).abs() < 1e-9, "T^2 check: {t2}");
    }

    #[test]
    fn bm_time_integral_matches_closed_form() {
        let charfn = gaussian_charfn_provider(Covariance::fbm(0.5).unwrap(), 1);
        for &xi in &[1.0f64, 3.0, 10.0] {
            let a = 0.5 * xi * xi;
            let exact = 2.0 * ((1.0 - (-a).exp()) / a - (1.0 - (1.0 + a) * (-a).exp()) / (a * a));
            let quad = time_integral(&charfn, &[xi], 1.0);
            assert!(
                ((quad - exact) / exact).abs() < 1e-9,
                "xi {xi}: {quad} vs {exact}"
            );
        }
    }

    #[test]
    fn bm_triple_integral_converges_geometrically() {
        let charfn = gaussian_charfn_provider(Covariance::fbm(0.5).unwrap(), 1);
        let rep = berman_criterion(&charfn, 1, 1.0, 4.0, 9).unwrap();
        assert_eq!(rep.verdict, BermanVerdict::Converged);
        // BM shells halve: ratios settle near 1/2
        let last = *rep.ratios.last().unwrap();
        assert!((last - 0.5).abs() < 0.1, "last ratio {last}");
        assert!(rep.extrapolated.unwrap() > *rep.partial_sums.last().unwrap());
    }

    #[test]
    fn supercritical_fbm_plane_diverges() {
        // alpha d = 1.2 > 1: no square-integrable local time
        let charfn = gaussian_charfn_provider(Covariance::fbm(0.6).unwrap(), 2);
        let rep = berman_criterion(&charfn, 2, 1.0, 4.0, 8).unwrap();
        assert_eq!(rep.verdict, BermanVerdict::Diverged);
        assert!(rep.extrapolated.is_none());
        // growth is asymptotic; the innermost shell still carries the
        // low-frequency bulk, so only check the tail of the ladder
        let c = &rep.shell_contributions;
        for w in c[c.len() - 4..].windows(2) {
            assert!(w[1] > w[0], "tail shell contributions must grow: {c:?}");
        }
    }

    #[test]
    fn provider_dimension_is_checked() {
        let charfn = gaussian_charfn_provider(Covariance::fbm(0.5).unwrap(), 1);
        assert!(berman_criterion(&charfn, 2, 1.0, 4.0, 6).is_err());
    }
}
