//! Chung-type oscillation lower bound: over small windows the path must
//! oscillate at least on the order of `r^{alpha d}` up to an inverse
//! iterated-logarithm factor, uniformly over window centers. The scan fits
//! the oscillation exponent and tracks the floor of the normalized ratios.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::laws::loglog_inv;
use crate::laws::scaling::{summarize_ladder, ScalingReport};
use crate::process::ProcessSpec;
use crate::rng::StreamFamily;
use crate::sim::PathSampler;

#[derive(Debug, Clone)]
pub struct ChungScan {
    pub spec: ProcessSpec,
    pub grid: TimeGrid,
    /// window centers; the per-level statistic is the minimum over them
    pub centers: Vec<f64>,
    /// dyadic levels: radii 2^{-n} for n in levels.0..=levels.1
    pub levels: (u32, u32),
    pub replicas: usize,
}

pub fn chung_ratio_scan(scan: &ChungScan, family: &StreamFamily) -> Result<ScalingReport> {
    scan.spec.validate()?;
    let d = scan.spec.dim;
    let alpha = scan.spec.alpha();
    let alpha_d = alpha * d as f64;
    let log_power = alpha * (d as f64 + scan.spec.theta());

    let radii = ladder(scan.levels, scan.grid)?;
    let r_max = radii[0];
    if scan.centers.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one window center".into(),
        ));
    }
    for &s in &scan.centers {
        if s - r_max < scan.grid.t_start() - 1e-12 || s + r_max > scan.grid.t_end() + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "center {s} with radius {r_max} leaves the grid span"
            )));
        }
    }
    if scan.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }

    // normalizers: r^{alpha d} (log log 1/r)^{-alpha(d+theta)} and the
    // single-log variant
    let g_loglog: Vec<f64> = radii
        .iter()
        .map(|&r| r.powf(alpha_d) * loglog_inv(r).powf(-log_power))
        .collect();
    let g_log: Vec<f64> = radii
        .iter()
        .map(|&r| r.powf(alpha_d) * (1.0 / r).ln().powf(-log_power))
        .collect();

    let sampler = PathSampler::new(&scan.spec, scan.grid)?;
    let per_rep: Vec<Vec<f64>> = (0..scan.replicas)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = family.stream(rep as u32);
            let path = sampler.sample(&mut rng)?;
            Ok(radii
                .iter()
                .map(|&r| {
                    let mut level_min = f64::INFINITY;
                    for &s in &scan.centers {
                        let c = scan.grid.index_at(s);
                        let lo = scan.grid.index_at(s - r);
                        let hi = scan.grid.index_at(s + r);
                        level_min = level_min.min(path.sup_deviation(c, lo, hi));
                    }
                    level_min
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut minima = vec![Vec::with_capacity(scan.replicas); radii.len()];
    for row in &per_rep {
        for (k, &m) in row.iter().enumerate() {
            minima[k].push(m);
        }
    }

    // trend is informational here: the pass verdict is the exponent plus a
    // strictly positive floor
    summarize_ladder(
        radii,
        g_loglog,
        g_log,
        minima,
        alpha_d,
        scan.replicas,
        false,
    )
}

fn ladder(levels: (u32, u32), grid: TimeGrid) -> Result<Vec<f64>> {
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
