//! Shared Monte Carlo helpers for the integration suites.
#![allow(dead_code)]

use ltlab_core::numeric;

/// Modulus of the empirical characteristic function at frequency `xi`,
/// with a delta-method standard error for the modulus.
pub fn charfn_radius(samples: &[f64], xi: f64) -> (f64, f64) {
    let n = samples.len();
    let cos: Vec<f64> = samples.iter().map(|&z| (xi * z).cos()).collect();
    let sin: Vec<f64> = samples.iter().map(|&z| (xi * z).sin()).collect();
    let (mc, ms) = (numeric::mean(&cos), numeric::mean(&sin));
    let r = mc.hypot(ms);
    let nf = n as f64;
    let vcc = numeric::variance(&cos) / nf;
    let vss = numeric::variance(&sin) / nf;
    let mut cross = 0.0;
    for k in 0..n {
        cross += (cos[k] - mc) * (sin[k] - ms);
    }
    let vcs = cross / (nf - 1.0) / nf;
    let se = if r > 1e-12 {
        ((mc * mc * vcc + 2.0 * mc * ms * vcs + ms * ms * vss).max(0.0)).sqrt() / r
    } else {
        (vcc + vss).sqrt()
    };
    (r, se)
}
