//! Small-window scaling of the sup of local time: exponent recovery for
//! `sup_x L(x, [s-r, s+r])` as `r` runs down a dyadic ladder, with the
//! iterated-logarithm and single-logarithm normalizers reported side by
//! side (no verdict separates them at desk scale).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::laws::loglog_inv;
use crate::localtime::{self, occupation_histogram, SpatialBox};
use crate::process::{ProcessSpec, SamplePath};
use crate::rng::StreamFamily;
use crate::sim::PathSampler;
use crate::stats::{self, LineFit};

/// Per-level scaling statistics for a dyadic radius ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    /// strictly decreasing radii
    pub radii: Vec<f64>,
    pub exponent_target: f64,
    /// per-level geometric mean of the raw statistic across replicas
    pub statistic: Vec<f64>,
    pub loglog_normalizer: Vec<f64>,
    pub log_normalizer: Vec<f64>,
    pub loglog_ratio_mean: Vec<f64>,
    pub loglog_ratio_max: Vec<f64>,
    pub loglog_ratio_q90: Vec<f64>,
    pub log_ratio_mean: Vec<f64>,
    pub log_ratio_max: Vec<f64>,
    pub log_ratio_q90: Vec<f64>,
    pub fit: LineFit,
    /// one-sided trend p-value for the normalized ratios increasing as r
    /// shrinks (iterated-logarithm normalizer)
    pub trend_p_increasing: f64,
    /// smallest normalized ratio seen across levels and replicas
    pub min_ratio: f64,
    pub pass: bool,
    pub replicas: usize,
}

/// sup over space of the histogram local time of `path` on `window`,
/// taken over cells the path actually visits.
pub fn window_sup_density(path: &SamplePath, window: (f64, f64), eps: &[f64]) -> Result<f64> {
    let lo = path.grid.index_at(window.0);
    let hi = path.grid.index_at(window.1).max(lo + 1);
    let range = path.component_range(lo, hi);
    if range.iter().all(|&(mn, mx)| mx - mn == 0.0) {
        return Err(Error::NotApplicable(
            "path is constant on the window; occupation measure is degenerate".into(),
        ));
    }
    let region = SpatialBox::covering(path, lo, hi, eps)?;
    let field = occupation_histogram(path, window, &region)?;
    Ok(field.sup_density())
}

#[derive(Debug, Clone)]
pub struct LimsupScan {
    pub spec: ProcessSpec,
    pub grid: TimeGrid,
    /// window center s; windows are [s - r, s + r]
    pub center: f64,
    /// dyadic levels: radii 2^{-n} for n in levels.0..=levels.1
    pub levels: (u32, u32),
    pub replicas: usize,
    /// Cell width per level as a fraction of the window's spatial spread
    /// (2r)^alpha (default 0.3). Tying the resolution to the level keeps the
    /// histogram smoothing bias a constant factor across the ladder, so it
    /// cancels from the fitted slope.
    pub relative_bin_width: Option<f64>,
}

/// Builds the dyadic radius ladder, dropping levels with r >= 1/e (the
/// iterated logarithm is nonpositive there) and refusing radii under
/// eight grid steps.
fn radius_ladder(levels: (u32, u32), grid: TimeGrid) -> Result<Vec<f64>> {
    if levels.1 < levels.0 {
        return Err(Error::InvalidParameter("empty level range".into()));
    }
    let mut radii = Vec::new();
    for n in levels.0..=levels.1 {
        let r = 0.5f64.powi(n as i32);
        if r >= (-1.0f64).exp() {
            continue;
        }
        if r < 8.0 * grid.step() {
            return Err(Error::InvalidParameter(format!(
                "radius {r} below eight grid steps ({})",
                8.0 * grid.step()
            )));
        }
        radii.push(r);
    }
    if radii.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least three usable dyadic levels below 1/e".into(),
        ));
    }
    Ok(radii)
}

pub fn limsup_ratio_scan(scan: &LimsupScan, family: &StreamFamily) -> Result<ScalingReport> {
    scan.spec.check_local_time_regime()?;
    let d = scan.spec.dim;
    let alpha = scan.spec.alpha();
    let alpha_d = alpha * d as f64;
    let log_power = alpha * (d as f64 + scan.spec.theta());
    let target = 1.0 - alpha_d;

    let radii = radius_ladder(scan.levels, scan.grid)?;
    let r_max = radii[0];
    if scan.center - r_max < scan.grid.t_start() - 1e-12
        || scan.center + r_max > scan.grid.t_end() + 1e-12
    {
        return Err(Error::InvalidParameter(format!(
            "window [{}, {}] leaves the grid span",
            scan.center - r_max,
            scan.center + r_max
        )));
    }
    if scan.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }

    let rel = scan.relative_bin_width.unwrap_or(0.3);
    if !(rel > 0.0 && rel <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "relative bin width {rel} outside (0, 0.5]"
        )));
    }
    let floor = localtime::default_bin_width(scan.grid.step(), alpha);
    let level_eps: Vec<f64> = radii.iter().map(|&r| rel * (2.0 * r).powf(alpha)).collect();
    if let Some(&bad) = level_eps.iter().find(|&&e| e < floor) {
        return Err(Error::InvalidParameter(format!(
            "cell width {bad} at the finest level falls below the increment \
             resolution {floor}; refine the grid or shorten the ladder"
        )));
    }
    let sampler = PathSampler::new(&scan.spec, scan.grid)?;
    let n_levels = radii.len();

    let g_loglog: Vec<f64> = radii
        .iter()
        .map(|&r| r.powf(target) * loglog_inv(r).powf(log_power))
        .collect();
    let g_log: Vec<f64> = radii
        .iter()
        .map(|&r| r.powf(target) * (1.0 / r).ln().powf(log_power))
        .collect();

    // replica-parallel; transposed into per-level vectors afterwards so the
    // summary pass is a deterministic sequential reduction
    let per_rep: Vec<Vec<f64>> = (0..scan.replicas)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = family.stream(rep as u32);
            let path = sampler.sample(&mut rng)?;
            radii
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let eps_vec = vec![level_eps[k]; d];
                    window_sup_density(&path, (scan.center - r, scan.center + r), &eps_vec)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut sups = vec![Vec::with_capacity(scan.replicas); n_levels];
    for row in &per_rep {
        for (k, &sup) in row.iter().enumerate() {
            sups[k].push(sup);
        }
    }

    summarize_ladder(radii, g_loglog, g_log, sups, target, scan.replicas, true)
}

/// Deterministic single-pass reduction of the per-level samples into the
/// report; shared by the limsup and oscillation scans.
pub(crate) fn summarize_ladder(
    radii: Vec<f64>,
    g_loglog: Vec<f64>,
    g_log: Vec<f64>,
    samples: Vec<Vec<f64>>,
    target: f64,
    replicas: usize,
    trend_gates_pass: bool,
) -> Result<ScalingReport> {
    let n_levels = radii.len();
    let mut statistic = Vec::with_capacity(n_levels);
    let mut ll_mean = Vec::with_capacity(n_levels);
    let mut ll_max = Vec::with_capacity(n_levels);
    let mut ll_q90 = Vec::with_capacity(n_levels);
    let mut lg_mean = Vec::with_capacity(n_levels);
    let mut lg_max = Vec::with_capacity(n_levels);
    let mut lg_q90 = Vec::with_capacity(n_levels);
    let mut min_ratio = f64::INFINITY;

    for k in 0..n_levels {
        let vals = &samples[k];
        if vals.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotApplicable(
                "vanishing level statistic; scaling ladder not resolvable".into(),
            ));
        }
        let log_mean = vals.iter().map(|&v| v.ln()).sum::<f64>() / vals.len() as f64;
        statistic.push(log_mean.exp());
        let ratios_ll: Vec<f64> = vals.iter().map(|&v| v / g_loglog[k]).collect();
        let ratios_lg: Vec<f64> = vals.iter().map(|&v| v / g_log[k]).collect();
        min_ratio = min_ratio.min(ratios_ll.iter().copied().fold(f64::INFINITY, f64::min));
        ll_mean.push(crate::numeric::mean(&ratios_ll));
        ll_max.push(ratios_ll.iter().copied().fold(0.0f64, f64::max));
        ll_q90.push(stats::quantile(&ratios_ll, 0.9));
        lg_mean.push(crate::numeric::mean(&ratios_lg));
        lg_max.push(ratios_lg.iter().copied().fold(0.0f64, f64::max));
        lg_q90.push(stats::quantile(&ratios_lg, 0.9));
    }

    let fit: LineFit = stats::log_log_fit(&radii, &statistic)?;
    let trend = stats::mann_kendall(&ll_mean)?;
    // radii decrease along the ladder, so an increasing series means the
    // normalized ratios grow as r -> 0
    let trend_p_increasing = stats::normal_sf(trend.z);

    let slope_ok = (fit.slope - target).abs() <= 0.1;
    let trend_ok = trend_p_increasing >= 1e-3;
    let pass = slope_ok && (!trend_gates_pass || trend_ok) && min_ratio > 0.0;

    Ok(ScalingReport {
        radii,
        exponent_target: target,
        statistic,
        loglog_normalizer: g_loglog,
        log_normalizer: g_log,
        loglog_ratio_mean: ll_mean,
        loglog_ratio_max: ll_max,
        loglog_ratio_q90: ll_q90,
        log_ratio_mean: lg_mean,
        log_ratio_max: lg_max,
        log_ratio_q90: lg_q90,
        fit,
        trend_p_increasing,
        min_ratio,
        pass,
        replicas,
    })
}
