//! Statistics used by the verification experiments: least-squares slope
//! fits, a rank-based trend test, a two-sample distribution test, and
//! quantile/CDF helpers.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::numeric::{self, KahanSum};

/// Ordinary least-squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub n: usize,
}

impl LineFit {
    /// Two-sided 95% confidence interval for the slope (t-distribution,
    /// n - 2 degrees of freedom).
    pub fn slope_ci95(&self) -> (f64, f64) {
        if self.n < 3 || !self.slope_se.is_finite() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let t = StudentsT::new(0.0, 1.0, (self.n - 2) as f64)
            .expect("valid dof")
            .inverse_cdf(0.975);
        (
            self.slope - t * self.slope_se,
            self.slope + t * self.slope_se,
        )
    }
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "ols needs two same-length samples with n >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let nf = n as f64;
    let mx = numeric::mean(xs);
    let my = numeric::mean(ys);
    let (mut sxx, mut sxy, mut syy) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
        syy.add((y - my) * (y - my));
    }
    let sxx = sxx.value();
    let sxy = sxy.value();
    let syy = syy.value();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter(
            "ols: x values are all equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let slope_se = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        r2,
        n,
    })
}

/// OLS in log-log coordinates: fits `y ~ C * x^slope`. Points with a
/// non-positive coordinate are rejected.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "log-log fit needs strictly positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    ols(&lx, &ly)
}

/// Mann-Kendall trend test.
#[derive(Debug, Clone, Copy)]
pub struct TrendTest {
    /// Sum of pairwise increment signs; positive means upward trend.
    pub s: i64,
    pub z: f64,
    /// Two-sided p-value for "no monotone trend".
    pub p_value: f64,
}

pub fn mann_kendall(xs: &[f64]) -> Result<TrendTest> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidParameter("mann_kendall needs n >= 3".into()));
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = xs[j] - xs[i];
            if d > 0.0 {
                s += 1;
            } else if d < 0.0 {
                s -= 1;
            }
        }
    }
    // variance with tie correction
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    if var <= 0.0 {
        return Ok(TrendTest {
            s,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let z = if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var.sqrt()
    } else {
        0.0
    };
    let p = 2.0 * normal_sf(z.abs());
    Ok(TrendTest {
        s,
        z,
        p_value: p.min(1.0),
    })
}

/// Two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter(
            "ks test needs non-empty samples".into(),
        ));
    }
    let mut sa: Vec<f64> = a.to_vec();
    let mut sb: Vec<f64> = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    // asymptotic Kolmogorov tail with the usual finite-sample correction
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

pub fn normal_sf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sf(x)
}

/// Linear-interpolation quantile of an unsorted sample, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty() && (0.0..=1.0).contains(&q));
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        s[lo]
    } else {
        let w = pos - lo as f64;
        s[lo] * (1.0 - w) + s[hi] * w
    }
}
