//! Moment growth of local-time increments in the window length, and spatial
//! Hölder increments, verified by log-log regression against the predicted
//! exponents.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::laws::{density_at, point_centered_box};
use crate::localtime::{self, occupation_histogram};
use crate::numeric::KahanSum;
use crate::process::ProcessSpec;
use crate::quad::integrate_power_endpoints;
use crate::rng::StreamFamily;
use crate::sim::PathSampler;
use crate::stats::{self, LineFit};

/// Exact first moment and quadrature second moment of the fBm local time
/// at the origin over `[0, 1]`: `E L(0,1)^n` for n = 1, 2.
///
/// n = 1 integrates the marginal density: `(2 pi)^{-1/2} / (1 - H)`.
/// n = 2 integrates the joint density of `(X_s, X_t)` at the origin over
/// the simplex, in a form stable against cancellation near the diagonal.
pub fn fbm_pointwise_moment(hurst: f64, order: u32) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hurst {hurst} outside (0,1)"
        )));
    }
    match order {
        1 => Ok(1.0 / ((2.0 * std::f64::consts::PI).sqrt() * (1.0 - hurst))),
        2 => {
            let h = hurst;
            let inner = |t: f64| -> f64 {
                integrate_power_endpoints(|s| scaled_joint_density(s, t, h), 0.0, t, -h, -h)
                    .unwrap_or(f64::NAN)
            };
            // inner(t) behaves like t^{1-2H} near the origin
            let outer = integrate_power_endpoints(
                |t| inner(t) * t.powf(2.0 * h - 1.0),
                0.0,
                1.0,
                1.0 - 2.0 * h,
                0.0,
            )?;
            Ok(2.0 * outer)
        }
        _ => Err(Error::NotApplicable(
            "pointwise moment oracle implemented for orders 1 and 2".into(),
        )),
    }
}

/// `(2 pi)^{-1} (det Sigma / (s^{2H} (t-s)^{2H}))^{-1/2}` for the fBm pair
/// covariance at times `0 < s < t` -- the joint density at the origin with
/// the integrable endpoint powers factored out. The determinant is expanded
/// as `(1/2 (t-s)^{2H} - 1/2 (t^H - s^H)^2)(s^H t^H + R)` so that no
/// catastrophic cancellation occurs near either endpoint.
fn scaled_joint_density(s: f64, t: f64, h: f64) -> f64 {
    let inv2pi = 0.5 / std::f64::consts::PI;
    let guard = 1e-9 * t;
    if s < guard || t - s < guard {
        return inv2pi;
    }
    let rho = (t.powf(h) - s.powf(h)) / (t - s).powf(h);
    let f1 = 0.5 * (1.0 - rho * rho);
    let r = 0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).powf(2.0 * h));
    let f2 = (s.powf(h) * t.powf(h) + r) / s.powf(2.0 * h);
    inv2pi / (f1 * f2).sqrt()
}

/// Estimates of `E |L(x, a+lag) - L(x, a)|^n` per (order, lag) with the
/// fitted lag-exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub orders: Vec<u32>,
    pub lags: Vec<f64>,
    /// estimates[i][j]: mean over replicas of the i-th order at the j-th lag
    pub estimates: Vec<Vec<f64>>,
    pub standard_errors: Vec<Vec<f64>>,
    pub fitted_slopes: Vec<LineFit>,
    pub target_slopes: Vec<f64>,
    pub slope_pass: Vec<bool>,
    /// lags whose expected increment falls below ten bin widths
    pub flagged_lags: Vec<f64>,
    pub replicas: usize,
    pub bin_width: f64,
    pub shifted: bool,
}

/// Scan of local-time window moments against the window length.
#[derive(Debug, Clone)]
pub struct MomentScan {
    pub spec: ProcessSpec,
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub orders: Vec<u32>,
    pub lags: Vec<f64>,
    pub replicas: usize,
    /// evaluate at `x + X_a` with `a` the window start
    pub shifted: bool,
    pub window_start: f64,
    /// spatial resolution; defaults to `2 step^alpha`
    pub bin_width: Option<f64>,
}

impl MomentScan {
    pub fn new(spec: ProcessSpec, grid: TimeGrid, x: Vec<f64>) -> Self {
        Self {
            spec,
            grid,
            x,
            orders: vec![1, 2],
            lags: Vec::new(),
            replicas: 0,
            shifted: false,
            window_start: grid.t_start(),
            bin_width: None,
        }
    }

    pub fn run(&self, family: &StreamFamily) -> Result<MomentReport> {
        moment_scan(self, family)
    }
}

pub fn moment_scan(scan: &MomentScan, family: &StreamFamily) -> Result<MomentReport> {
    scan.spec.check_local_time_regime()?;
    let d = scan.spec.dim;
    let alpha = scan.spec.alpha();
    let exponent = 1.0 - alpha * d as f64;
    if scan.x.len() != d {
        return Err(Error::InvalidParameter(
            "evaluation point has wrong dimension".into(),
        ));
    }
    if scan.orders.is_empty() || scan.orders.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter(
            "moment orders must be positive".into(),
        ));
    }
    if scan.lags.is_empty() {
        return Err(Error::InvalidParameter("need at least one lag".into()));
    }
    let a = scan.window_start;
    for &lag in &scan.lags {
        if !(lag > 0.0) || a + lag > scan.grid.t_end() + 1e-12 || a < scan.grid.t_start() {
            return Err(Error::InvalidParameter(format!(
                "window [{a}, {}] outside the grid span",
                a + lag
            )));
        }
    }
    if scan.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }

    let eps = scan
        .bin_width
        .unwrap_or_else(|| localtime::default_bin_width(scan.grid.step(), alpha));
    let eps_vec = vec![eps; d];
    let sampler = PathSampler::new(&scan.spec, scan.grid)?;

    let n_orders = scan.orders.len();
    let n_lags = scan.lags.len();

    // replica-parallel sampling; the reduction below is a single sequential
    // pass in replica order, so results do not depend on the thread count
    let per_rep: Vec<Vec<f64>> = (0..scan.replicas)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = family.stream(rep as u32);
            let path = sampler.sample(&mut rng)?;
            let x_eff: Vec<f64> = if scan.shifted {
                let k = scan.grid.index_at(a);
                (0..d).map(|l| scan.x[l] + path.value(k, l)).collect()
            } else {
                scan.x.clone()
            };
            scan.lags
                .iter()
                .map(|&lag| density_at(&path, (a, a + lag), &x_eff, &eps_vec))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![KahanSum::new(); n_orders * n_lags];
    let mut sq_sums = vec![KahanSum::new(); n_orders * n_lags];
    for vals in &per_rep {
        for (j, &val) in vals.iter().enumerate() {
            for (i, &n) in scan.orders.iter().enumerate() {
                let p = val.powi(n as i32);
                sums[i * n_lags + j].add(p);
                sq_sums[i * n_lags + j].add(p * p);
            }
        }
    }

    let m = scan.replicas as f64;
    let mut estimates = vec![vec![0.0; n_lags]; n_orders];
    let mut ses = vec![vec![0.0; n_lags]; n_orders];
    for i in 0..n_orders {
        for j in 0..n_lags {
            let mean = sums[i * n_lags + j].value() / m;
            let var = (sq_sums[i * n_lags + j].value() / m - mean * mean).max(0.0);
            estimates[i][j] = mean;
            ses[i][j] = (var / m).sqrt();
        }
    }

    let mut fits = Vec::with_capacity(n_orders);
    let mut targets = Vec::with_capacity(n_orders);
    let mut pass = Vec::with_capacity(n_orders);
    for (i, &n) in scan.orders.iter().enumerate() {
        let fit = stats::log_log_fit(&scan.lags, &estimates[i])?;
        let target = exponent * n as f64;
        pass.push((fit.slope - target).abs() <= 0.1 * n as f64);
        targets.push(target);
        fits.push(fit);
    }

    let flagged: Vec<f64> = scan
        .lags
        .iter()
        .copied()
        .filter(|&lag| eps > 0.1 * lag.powf(exponent))
        .collect();

    Ok(MomentReport {
        orders: scan.orders.clone(),
        lags: scan.lags.clone(),
        estimates,
        standard_errors: ses,
        fitted_slopes: fits,
        target_slopes: targets,
        slope_pass: pass,
        flagged_lags: flagged,
        replicas: scan.replicas,
        bin_width: eps,
        shifted: scan.shifted,
    })
}

/// Spatial Hölder scan: `E |L(x+y) - L(x)|` against `|y|` over one window.
#[derive(Debug, Clone)]
pub struct HolderScan {
    pub spec: ProcessSpec,
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    /// spatial offsets; snapped to the estimator lattice
    pub offsets: Vec<Vec<f64>>,
    pub gamma: f64,
    pub window: (f64, f64),
    pub replicas: usize,
    pub bin_width: Option<f64>,
}

pub fn holder_increment_scan(scan: &HolderScan, family: &StreamFamily) -> Result<MomentReport> {
    scan.spec.check_local_time_regime()?;
    let d = scan.spec.dim;
    let alpha = scan.spec.alpha();
    let alpha_d = alpha * d as f64;
    let gamma_cap = (1.0f64).min((1.0 - alpha_d) / (2.0 * alpha));
    if !(scan.gamma >= 0.0 && scan.gamma < gamma_cap) {
        return Err(Error::InvalidParameter(format!(
            "gamma {} outside [0, {gamma_cap})",
            scan.gamma
        )));
    }
    if scan.x.len() != d || scan.offsets.iter().any(|y| y.len() != d) {
        return Err(Error::InvalidParameter(
            "point/offset dimension mismatch".into(),
        ));
    }
    if scan.offsets.is_empty() || scan.replicas == 0 {
        return Err(Error::InvalidParameter("need offsets and replicas".into()));
    }

    let norms_in: Vec<f64> = scan
        .offsets
        .iter()
        .map(|y| y.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
        .collect();
    let min_positive = norms_in
        .iter()
        .copied()
        .filter(|&n| n > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut eps = scan
        .bin_width
        .unwrap_or_else(|| localtime::default_bin_width(scan.grid.step(), alpha));
    if min_positive.is_finite() {
        eps = eps.min(min_positive / 4.0);
    }
    // snap offsets to the lattice so x + y sits on a cell center
    let snapped: Vec<Vec<f64>> = scan
        .offsets
        .iter()
        .map(|y| y.iter().map(|&v| (v / eps).round() * eps).collect())
        .collect();
    let norms: Vec<f64> = snapped
        .iter()
        .map(|y: &Vec<f64>| y.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
        .collect();
    for (n_in, n_snap) in norms_in.iter().zip(&norms) {
        if *n_in > 0.0 && *n_snap == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "offset {n_in} not resolvable at bin width {eps}"
            )));
        }
    }

    let sampler = PathSampler::new(&scan.spec, scan.grid)?;
    let eps_vec = vec![eps; d];

    let per_rep: Vec<Vec<f64>> = (0..scan.replicas)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = family.stream(rep as u32);
            let path = sampler.sample(&mut rng)?;
            let lo = scan.grid.index_at(scan.window.0);
            let hi = scan.grid.index_at(scan.window.1).max(lo + 1);
            let mut range = path.component_range(lo, hi);
            for y in &snapped {
                for l in 0..d {
                    range[l].0 = range[l].0.min(scan.x[l] + y[l]);
                    range[l].1 = range[l].1.max(scan.x[l] + y[l]);
                }
            }
            let region = point_centered_box(&scan.x, &range, &eps_vec)?;
            let field = occupation_histogram(&path, scan.window, &region)?;
            let at = |pt: &[f64]| -> Result<f64> {
                let idx = region.cell_of(pt).ok_or_else(|| {
                    Error::InvalidParameter("evaluation point left the box".into())
                })?;
                Ok(field.density(region.flat_index(&idx)))
            };
            let base = at(&scan.x)?;
            snapped
                .iter()
                .map(|y| {
                    let pt: Vec<f64> = (0..d).map(|l| scan.x[l] + y[l]).collect();
                    Ok((at(&pt)? - base).abs())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![KahanSum::new(); snapped.len()];
    let mut sq_sums = vec![KahanSum::new(); snapped.len()];
    for incs in &per_rep {
        for (j, &inc) in incs.iter().enumerate() {
            sums[j].add(inc);
            sq_sums[j].add(inc * inc);
        }
    }

    let m = scan.replicas as f64;
    let mut estimates = vec![Vec::new()];
    let mut ses = vec![Vec::new()];
    for j in 0..snapped.len() {
        let mean = sums[j].value() / m;
        let var = (sq_sums[j].value() / m - mean * mean).max(0.0);
        estimates[0].push(mean);
        ses[0].push((var / m).sqrt());
    }

    // fit on strictly positive offsets only; zero offsets must come out 0
    let (fit_x, fit_y): (Vec<f64>, Vec<f64>) = norms
        .iter()
        .zip(&estimates[0])
        .filter(|(&n, _)| n > 0.0)
        .map(|(&n, &e)| (n, e))
        .unzip();
    let fit = stats::log_log_fit(&fit_x, &fit_y)?;
    let pass = fit.slope >= scan.gamma - 0.1;

    let exponent = 1.0 - alpha_d;
    let flagged: Vec<f64> = norms
        .iter()
        .copied()
        .filter(|&n| n > 0.0 && eps > 0.1 * n.powf(exponent.max(0.0)))
        .collect();

    Ok(MomentReport {
        orders: vec![1],
        lags: norms,
        estimates,
        standard_errors: ses,
        fitted_slopes: vec![fit],
        target_slopes: vec![scan.gamma],
        slope_pass: vec![pass],
        flagged_lags: flagged,
        replicas: scan.replicas,
        bin_width: eps,
        shifted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::ProcessClass;

    #[test]
    fn pointwise_moment_oracles() {
        // E L(0,1) for BM and the H = 0.7 value
        let m1 = fbm_pointwise_moment(0.5, 1).unwrap();
        assert!((m1 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        let m1_h7 = fbm_pointwise_moment(0.7, 1).unwrap();
        assert!((m1_h7 - 1.329_807_601_338_109).abs() < 1e-12, "{m1_h7}");
        // E L(0,1)^2 = 1 exactly for BM; the quadrature must hit it
        let m2 = fbm_pointwise_moment(0.5, 2).unwrap();
        assert!((m2 - 1.0).abs() < 1e-7, "BM second moment {m2}");
        assert!(fbm_pointwise_moment(0.5, 3).is_err());
    }

    #[test]
    fn second_moment_quadrature_is_finite_and_ordered() {
        // higher persistence concentrates occupation: the H = 0.7 second
        // moment exceeds the BM value
        let m2_bm = fbm_pointwise_moment(0.5, 2).unwrap();
        let m2_h7 = fbm_pointwise_moment(0.7, 2).unwrap();
        let m2_h3 = fbm_pointwise_moment(0.3, 2).unwrap();
        assert!(m2_h7 > m2_bm && m2_bm > m2_h3, "{m2_h3} {m2_bm} {m2_h7}");
        assert!(m2_h7.is_finite() && m2_h7 < 10.0);
    }

    #[test]
    fn bm_moment_scan_recovers_slope_and_level() {
        let spec = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.5 }, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1 << 12).unwrap();
        let mut scan = MomentScan::new(spec, grid, vec![0.0]);
        scan.lags = vec![0.125, 0.25, 0.5, 1.0];
        scan.orders = vec![1, 2];
        scan.replicas = 400;
        let family = StreamFamily::new(11, 2);
        let rep = scan.run(&family).unwrap();
        // slope targets 0.5 and 1.0
        assert!(
            rep.slope_pass[0],
            "order-1 slope {}",
            rep.fitted_slopes[0].slope
        );
        assert!(
            rep.slope_pass[1],
            "order-2 slope {}",
            rep.fitted_slopes[1].slope
        );
        let lvl = rep.estimates[0][3];
        let oracle = fbm_pointwise_moment(0.5, 1).unwrap();
        assert!(
            (lvl - oracle).abs() < 0.08,
            "E L(0,1) estimate {lvl} vs oracle {oracle}"
        );
        assert!(rep.flagged_lags.is_empty());
    }

    #[test]
    fn shifted_mode_recenters_on_the_running_path() {
        let spec = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.5 }, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1 << 11).unwrap();
        let mut scan = MomentScan::new(spec, grid, vec![0.0]);
        scan.lags = vec![0.25, 0.5];
        scan.orders = vec![1];
        scan.replicas = 200;
        scan.window_start = 0.5;
        scan.shifted = true;
        let family = StreamFamily::new(3, 2);
        let rep = scan.run(&family).unwrap();
        // recentring restores stationarity: level close to unshifted lag law
        assert!(
            rep.estimates[0][0] > 0.1,
            "shifted estimate {}",
            rep.estimates[0][0]
        );
        assert!(rep.shifted);
    }

    #[test]
    fn rejects_bad_configs() {
        let spec = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.6 }, 2).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let scan = MomentScan::new(spec, grid, vec![0.0, 0.0]);
        let family = StreamFamily::new(1, 2);
        // regime gate: alpha d = 1.2
        assert!(scan.run(&family).is_err());
        let spec = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.5 }, 1).unwrap();
        let mut scan = MomentScan::new(spec, grid, vec![0.0]);
        scan.lags = vec![2.0];
        scan.replicas = 1;
        assert!(scan.run(&family).is_err(), "lag beyond the horizon");
    }

    #[test]
    fn holder_scan_zero_offset_gives_zero_increment() {
        let spec = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.5 }, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1 << 10).unwrap();
        let scan = HolderScan {
            spec,
            grid,
            x: vec![0.0],
            offsets: vec![vec![0.0], vec![0.25], vec![0.125]],
            gamma: 0.4,
            window: (0.0, 1.0),
            replicas: 50,
            bin_width: None,
        };
        let family = StreamFamily::new(5, 2);
        let rep = holder_increment_scan(&scan, &family).unwrap();
        assert_eq!(
            rep.estimates[0][0], 0.0,
            "zero offset must give zero increment"
        );
        assert!(rep.estimates[0][1] > 0.0);
    }

    #[test]
    fn holder_gamma_gate() {
        let spec = ProcessSpec::new(ProcessClass::Fbm { hurst: 0.5 }, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 256).unwrap();
        let scan = HolderScan {
            spec,
            grid,
            x: vec![0.0],
            offsets: vec![vec![0.1]],
            gamma: 0.6, // cap for BM is min(1, 0.5) = 0.5
            window: (0.0, 1.0),
            replicas: 1,
            bin_width: None,
        };
        let family = StreamFamily::new(5, 2);
        assert!(holder_increment_scan(&scan, &family).is_err());
    }
}
