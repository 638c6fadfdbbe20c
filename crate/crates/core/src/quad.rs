//! Numerical integration: Gauss-Legendre panels, geometrically graded
//! composites, and a weighted integrator for endpoint power singularities
//! of the kind `(x-a)^alpha (b-x)^beta g(x)` with `alpha, beta > -1`.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Gauss-Legendre rule of a fixed order, nodes/weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        // Newton from cos gives descending order; flip to ascending
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes on [-1, 1], ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Single-panel integral of `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = KahanSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        half * acc.value()
    }

    /// Composite integral with panels at the given breakpoints
    /// `a = b_0 < b_1 < ... < b_m = b`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(&self, mut f: F, breaks: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        for w in breaks.windows(2) {
            acc.add(self.integrate(&mut f, w[0], w[1]));
        }
        acc.value()
    }

    /// Integral over [0, upper] with panels shrinking geometrically toward 0,
    /// for integrands that are continuous but not smooth at the origin.
    pub fn integrate_graded_origin<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        upper: f64,
        levels: usize,
    ) -> f64 {
        assert!(upper > 0.0 && levels >= 1);
        let mut acc = KahanSum::new();
        let mut hi = upper;
        for _ in 0..levels {
            let lo = hi * 0.5;
            acc.add(self.integrate(&mut f, lo, hi));
            hi = lo;
        }
        // closing panel down to zero; after the grading its contribution
        // is at the rounding level
        acc.add(self.integrate(&mut f, 0.0, hi));
        acc.value()
    }
}

// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `integral of (x-a)^alpha * (b-x)^beta * g(x) over [a, b]` for smooth `g`
/// and exponents `alpha, beta > -1`.
///
/// Each endpoint singularity is removed by the power substitution
/// `x = a + t^(1/(1+alpha))` (resp. mirrored at `b`), after which the
/// integrand is continuous and a graded composite rule converges fast.
pub fn integrate_power_endpoints<G: Fn(f64) -> f64>(
    g: G,
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let rule = default_rule();
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "endpoint exponents must exceed -1, got alpha={alpha}, beta={beta}"
        )));
    }
    if !(b > a) {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{a}, {b}]"
        )));
    }
    let mid = 0.5 * (a + b);
    let levels = 60; // panels shrink by 2^-60: far below f64 resolution

    // left half: substitute x = a + t^(1/(1+alpha)), dx = t^(-alpha/(1+alpha))/(1+alpha) dt,
    // which cancels (x-a)^alpha exactly
    let pa = 1.0 + alpha;
    let left = rule.integrate_graded_origin(
        |t| {
            let x = a + t.powf(1.0 / pa);
            g(x) * (b - x).powf(beta) / pa
        },
        (mid - a).powf(pa),
        levels,
    );

    // right half, mirrored
    let pb = 1.0 + beta;
    let right = rule.integrate_graded_origin(
        |t| {
            let x = b - t.powf(1.0 / pb);
            g(x) * (x - a).powf(alpha) / pb
        },
        (b - mid).powf(pb),
        levels,
    );

    Ok(left + right)
}

/// Shared order-16 rule for the weighted integrators.
pub(crate) fn default_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Trapezoid rule over tabulated values at arbitrary (sorted) abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut acc = KahanSum::new();
    for i in 1..xs.len() {
        acc.add(0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let rule = GaussLegendre::new(8);
        // order-8 rule integrates degree <= 15 exactly
        for k in 0..=15u32 {
            let val = rule.integrate(|x| x.powi(k as i32), 0.0, 1.0);
            let want = 1.0 / (k as f64 + 1.0);
            assert!((val - want).abs() < 1e-14, "k={k}: {val} vs {want}");
        }
    }

    #[test]
    fn composite_sine() {
        let rule = GaussLegendre::new(12);
        let breaks: Vec<f64> = (0..=4)
            .map(|k| k as f64 * std::f64::consts::PI / 4.0)
            .collect();
        let val = rule.integrate_composite(f64::sin, &breaks);
        assert!((val - 2.0).abs() < 1e-14);
    }

    #[test]
    fn power_endpoint_integrator_matches_beta_function() {
        for &(alpha, beta_exp) in &[(-0.5, -0.25), (-0.9, 0.0), (0.3, -0.7), (1.5, 2.0)] {
            let val = integrate_power_endpoints(|_| 1.0, 0.0, 1.0, alpha, beta_exp).unwrap();
            let want = beta(alpha + 1.0, beta_exp + 1.0);
            assert!(
                ((val - want) / want).abs() < 1e-10,
                "alpha={alpha} beta={beta_exp}: {val} vs {want}"
            );
        }
    }

    #[test]
    fn power_endpoint_integrator_scales_and_shifts() {
        // integral of (x-1)^(-1/2) (3-x)^(-1/2) over [1,3] = pi
        let val = integrate_power_endpoints(|_| 1.0, 1.0, 3.0, -0.5, -0.5).unwrap();
        assert!((val - std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn power_endpoint_with_smooth_factor() {
        // integral of x^(-1/2) e^x over [0,1]; reference from a series expansion:
        // sum_k 1/(k! (k + 1/2))
        let val = integrate_power_endpoints(f64::exp, 0.0, 1.0, -0.5, 0.0).unwrap();
        let mut want = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            want += 1.0 / (fact * (k as f64 + 0.5));
        }
        assert!((val - want).abs() < 1e-11, "{val} vs {want}");
    }

    #[test]
    fn trapezoid_linear_exact() {
        let xs = [0.0, 0.5, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&xs, &ys) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(integrate_power_endpoints(|_| 1.0, 0.0, 1.0, -1.0, 0.0).is_err());
        assert!(integrate_power_endpoints(|_| 1.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }
}
