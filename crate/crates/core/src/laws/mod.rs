//! Monte Carlo verification of quantitative local-time laws: moment growth
//! in the window length, exponential tails, limsup scaling of the sup of
//! local time over small windows, Chung-type oscillation lower bounds, and
//! the characteristic-function existence integral.
//!
//! These are asymptotic almost-sure or in-expectation statements; the suite
//! substitutes exponent recovery by log-log regression, trend tests on
//! normalized ratios, and boundedness checks. Constants are never asserted,
//! only reported.

mod berman;
mod chung;
mod moments;
mod scaling;
mod tails;

pub use berman::{
    berman_criterion, gaussian_charfn_provider, rosenblatt_charfn_provider, BermanReport,
    BermanVerdict, StationaryCharfn,
};
pub use chung::{chung_ratio_scan, ChungScan};
pub use moments::{
    fbm_pointwise_moment, holder_increment_scan, moment_scan, HolderScan, MomentReport, MomentScan,
};
pub use scaling::{limsup_ratio_scan, window_sup_density, LimsupScan, ScalingReport};
pub use tails::{tail_probe, TailProbe, TailReport};

use crate::error::{Error, Result};
use crate::localtime::{occupation_histogram, SpatialBox};
use crate::process::SamplePath;

/// Box whose cell lattice has `x` at the exact center of one cell and whose
/// extent covers `range` on every axis (plus one cell of padding), so that
/// reading the density at the cell containing `x` carries no placement bias.
pub(crate) fn point_centered_box(
    x: &[f64],
    range: &[(f64, f64)],
    eps: &[f64],
) -> Result<SpatialBox> {
    let d = x.len();
    if range.len() != d || eps.len() != d {
        return Err(Error::InvalidParameter(
            "point, range and widths must share one dimension".into(),
        ));
    }
    let mut center = Vec::with_capacity(d);
    let mut half = Vec::with_capacity(d);
    let mut bins = Vec::with_capacity(d);
    for l in 0..d {
        if !(eps[l] > 0.0) {
            return Err(Error::InvalidParameter(
                "cell width must be positive".into(),
            ));
        }
        let reach = (range[l].0 - x[l]).abs().max((range[l].1 - x[l]).abs()) + eps[l];
        let m = (reach / eps[l]).ceil() as usize;
        center.push(x[l]);
        half.push((m as f64 + 0.5) * eps[l]);
        bins.push(2 * m + 1);
    }
    SpatialBox::new(center, half, bins)
}

/// Histogram local-time density at the point `x` for `path` restricted to
/// `window`, using a lattice centered on `x` with cell width `eps`.
pub fn density_at(path: &SamplePath, window: (f64, f64), x: &[f64], eps: &[f64]) -> Result<f64> {
    let lo = path.grid.index_at(window.0);
    let hi = path.grid.index_at(window.1).max(lo + 1);
    let range = path.component_range(lo, hi);
    let region = point_centered_box(x, &range, eps)?;
    let field = occupation_histogram(path, window, &region)?;
    let idx = region
        .cell_of(x)
        .ok_or_else(|| Error::InvalidParameter("evaluation point outside its own box".into()))?;
    Ok(field.density(region.flat_index(&idx)))
}

/// log log (1/r), valid for r < 1/e.
pub(crate) fn loglog_inv(r: f64) -> f64 {
    (1.0 / r).ln().ln()
}
