//! Exact combinatorial and integral identities used by the moment
//! machinery: the block-count recursion with a brute-force set-partition
//! oracle, the Beta integral, the ordered-simplex integral with power
//! weights, and the Stirling-type Gamma-ratio bound.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::quad::integrate_power_endpoints;
use crate::rng::RngStream;

/// Exact table of alpha_h(k): the number of ways to split k indices into
/// h nonempty blocks, defined by the recursion
/// `alpha_h(k+1) = h alpha_h(k) + alpha_{h-1}(k)` with
/// `alpha_1(k) = alpha_k(k) = 1`.
#[derive(Debug, Clone)]
pub struct AlphaTable {
    /// rows[k-1][h-1] = alpha_h(k), 1 <= h <= k
    rows: Vec<Vec<BigUint>>,
}

pub fn alpha_table(k_max: usize) -> Result<AlphaTable> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("table needs k_max >= 1".into()));
    }
    let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(k_max);
    rows.push(vec![BigUint::from(1u32)]);
    for k in 1..k_max {
        let prev = &rows[k - 1];
        let mut row = Vec::with_capacity(k + 1);
        for h in 1..=k + 1 {
            let stay = if h <= k {
                BigUint::from(h) * &prev[h - 1]
            } else {
                BigUint::ZERO
            };
            let split = if h >= 2 {
                prev[h - 2].clone()
            } else {
                BigUint::ZERO
            };
            row.push(stay + split);
        }
        rows.push(row);
    }
    Ok(AlphaTable { rows })
}

impl AlphaTable {
    pub fn k_max(&self) -> usize {
        self.rows.len()
    }

    /// alpha_h(k); zero outside 1 <= h <= k.
    pub fn value(&self, h: usize, k: usize) -> BigUint {
        assert!(k >= 1 && k <= self.k_max(), "k = {k} outside the table");
        if h == 0 || h > k {
            return BigUint::ZERO;
        }
        self.rows[k - 1][h - 1].clone()
    }

    pub fn row(&self, k: usize) -> &[BigUint] {
        &self.rows[k - 1]
    }

    pub fn row_max(&self, k: usize) -> &BigUint {
        self.rows[k - 1].iter().max().expect("row is never empty")
    }

    /// Exact check of alpha_h(k) <= k^k.
    pub fn bound_ok(&self, h: usize, k: usize) -> bool {
        self.value(h, k) <= BigUint::from(k).pow(k as u32)
    }

    /// Minimal C_k with alpha_h(k) <= C_k^k k^k over h, i.e.
    /// `(max_h alpha_h(k) / k^k)^{1/k}`.
    pub fn minimal_bound_constant(&self, k: usize) -> f64 {
        let m = big_to_f64(self.row_max(k));
        ((m.ln() - k as f64 * (k as f64).ln()) / k as f64).exp()
    }
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_string()
        .parse::<f64>()
        .expect("decimal digits parse as f64")
}

/// Brute-force oracle: visits every partition of a k-set once (restricted
/// growth strings) and tallies by block count. Exhaustive, so capped at
/// k = 12 (about 4.2 million partitions).
pub fn set_partition_counts(k: usize) -> Result<Vec<u64>> {
    if k == 0 || k > 12 {
        return Err(Error::InvalidParameter(
            "exhaustive partition oracle supports 1 <= k <= 12".into(),
        ));
    }
    let mut counts = vec![0u64; k];
    fn visit(pos: usize, k: usize, used: usize, counts: &mut [u64]) {
        if pos == k {
            counts[used - 1] += 1;
            return;
        }
        for b in 0..=used {
            visit(pos + 1, k, used.max(b + 1), counts);
        }
    }
    visit(1, k, 1, &mut counts);
    Ok(counts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessEntry {
    pub k: usize,
    pub j: usize,
    /// decimal value of alpha_j(k)
    pub alpha: String,
    /// decimal value of the lower bound j^{k-j}
    pub lower: String,
    pub holds: bool,
    /// log alpha_j(k) / (k log k)
    pub trajectory: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub delta: f64,
    pub entries: Vec<SharpnessEntry>,
}

/// Checks the lower bound alpha_j(k) >= j^{k-j} at j = ceil(delta k) and
/// reports the normalized log-growth trajectory.
pub fn alpha_sharpness_probe(k_list: &[usize], delta: f64) -> Result<SharpnessReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0,1)"
        )));
    }
    let k_max = *k_list
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("need at least one k".into()))?;
    let table = alpha_table(k_max)?;
    let mut entries = Vec::with_capacity(k_list.len());
    for &k in k_list {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        let j = ((delta * k as f64).ceil() as usize).clamp(1, k);
        let alpha = table.value(j, k);
        let lower = BigUint::from(j).pow((k - j) as u32);
        let holds = alpha >= lower;
        let trajectory = if k > 1 {
            big_to_f64(&alpha).ln() / (k as f64 * (k as f64).ln())
        } else {
            0.0
        };
        entries.push(SharpnessEntry {
            k,
            j,
            alpha: alpha.to_string(),
            lower: lower.to_string(),
            holds,
            trajectory,
        });
    }
    Ok(SharpnessReport { delta, entries })
}

/// `int_0^t (t-s)^{theta1} s^{theta2} ds` by singularity-split quadrature
/// against the closed form `t^{1+theta1+theta2} B(1+theta1, 1+theta2)`.
/// Returns (quadrature, closed form).
pub fn beta_identity_check(theta1: f64, theta2: f64, t: f64) -> Result<(f64, f64)> {
    if !(theta1 > -1.0 && theta2 > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "exponents must exceed -1, got ({theta1}, {theta2})"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("need t > 0, got {t}")));
    }
    let lhs = integrate_power_endpoints(|_| 1.0, 0.0, t, theta2, theta1)?;
    let rhs = t.powf(1.0 + theta1 + theta2)
        * (ln_gamma(1.0 + theta1) + ln_gamma(1.0 + theta2) - ln_gamma(2.0 + theta1 + theta2)).exp();
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexCheck {
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_se: f64,
    pub samples: usize,
}

/// `int_{u <= t_1 < ... < t_n <= U} prod_j (t_j - t_{j-1})^{theta_j} dt`
/// (t_0 = u) against its Beta-product closed form, estimated by sorted
/// uniforms with the n! simplex weight applied analytically.
pub fn simplex_integral_check(
    thetas: &[f64],
    u: f64,
    upper: f64,
    mc_samples: usize,
    rng: &mut RngStream,
) -> Result<SimplexCheck> {
    let n = thetas.len();
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter(
            "simplex check supports 1 <= n <= 6 exponents".into(),
        ));
    }
    if !(upper > u) {
        return Err(Error::InvalidParameter(format!(
            "need U > u, got ({u}, {upper})"
        )));
    }
    if mc_samples == 0 {
        return Err(Error::InvalidParameter(
            "need at least one MC sample".into(),
        ));
    }
    let mut partial = 0.0f64;
    for (j, &th) in thetas.iter().enumerate() {
        if !(th > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "exponent {th} at position {j} must exceed -1"
            )));
        }
        if j >= 1 && !(j as f64 + partial > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Beta argument {} + partial exponent sum {partial} must be positive",
                j
            )));
        }
        partial += th;
    }
    let total: f64 = thetas.iter().sum();

    // closed form: prod_{j=2}^n B(j-1 + sum_{k<j} theta_k, 1 + theta_j)
    //              * (U-u)^{n + sum theta} / (n + sum theta)
    let mut log_prod = 0.0f64;
    let mut prefix = 0.0f64;
    for (j, &th) in thetas.iter().enumerate() {
        if j >= 1 {
            let a = j as f64 + prefix;
            let b = 1.0 + th;
            log_prod += ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        }
        prefix += th;
    }
    let span = upper - u;
    let closed = log_prod.exp() * span.powf(n as f64 + total) / (n as f64 + total);

    // MC over sorted uniforms
    let mut factorial = 1.0f64;
    for j in 2..=n {
        factorial *= j as f64;
    }
    let weight = span.powi(n as i32) / factorial;
    let mut acc = KahanSum::new();
    let mut acc_sq = KahanSum::new();
    let mut pts = vec![0.0f64; n];
    for _ in 0..mc_samples {
        for p in pts.iter_mut() {
            *p = u + span * rng.uniform();
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = u;
        let mut prod = 1.0f64;
        for (j, &p) in pts.iter().enumerate() {
            prod *= (p - prev).powf(thetas[j]);
            prev = p;
        }
        let val = prod * weight;
        acc.add(val);
        acc_sq.add(val * val);
    }
    let m = mc_samples as f64;
    let mean = acc.value() / m;
    let var = (acc_sq.value() / m - mean * mean).max(0.0);
    Ok(SimplexCheck {
        closed_form: closed,
        mc_estimate: mean,
        mc_se: (var / m).sqrt(),
        samples: mc_samples,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaRatioReport {
    pub beta: f64,
    pub n_list: Vec<usize>,
    /// minimal admissible constants C_n = (Gamma(n+1)/Gamma(beta n))^{1/n} / n^{1-beta}
    pub constants: Vec<f64>,
    pub sup: f64,
    pub tail_non_increasing: bool,
    pub pass: bool,
}

/// Scan of the minimal constant in `Gamma(n+1)/Gamma(beta n) <= C^n n^{(1-beta)n}`.
pub fn gamma_ratio_bound_check(n_list: &[usize], beta: f64) -> Result<GammaRatioReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} outside (0,1)"
        )));
    }
    if n_list.is_empty() || n_list.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("need positive orders".into()));
    }
    let constants: Vec<f64> = n_list
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let log_c = (ln_gamma(nf + 1.0) - ln_gamma(beta * nf)) / nf - (1.0 - beta) * nf.ln();
            log_c.exp()
        })
        .collect();
    let sup = constants.iter().copied().fold(0.0f64, f64::max);
    // the tail (second half of the list, in the given order) must not grow
    let half = n_list.len() / 2;
    let tail_non_increasing = constants[half..].windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let pass = sup.is_finite() && tail_non_increasing;
    Ok(GammaRatioReport {
        beta,
        n_list: n_list.to_vec(),
        constants,
        sup,
        tail_non_increasing,
        pass,
    })
}
