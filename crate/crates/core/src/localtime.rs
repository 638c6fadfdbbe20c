//! Local-time estimation from discretized paths.
//!
//! Two independent estimators:
//! - an occupation histogram that splits each path step's duration
//!   proportionally over the spatial cells the linear segment crosses, then
//!   divides by cell volume;
//! - a truncated Fourier inversion of the occupation measure,
//!   `(2 pi)^-d  int int exp(i <xi, x - X_s>) ds dxi` over `|xi|_inf <= cutoff`,
//!   with a trapezoid rule in time and a midpoint rule in frequency.
//!
//! The histogram is measure-exact (cell times sum to the window length when
//! the box contains the path), so it doubles as the oracle for the Fourier
//! estimator and for analytic identities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, KahanSum};
use crate::process::SamplePath;
use crate::stats::{self, LineFit};

/// Uniform spatial lattice over an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialBox {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub bins: Vec<usize>,
}

impl SpatialBox {
    pub fn new(center: Vec<f64>, half_widths: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        let d = center.len();
        if d == 0 || half_widths.len() != d || bins.len() != d {
            return Err(Error::InvalidParameter(
                "box center, half-widths and bins must share one dimension".into(),
            ));
        }
        if half_widths.iter().any(|&h| !(h > 0.0)) || bins.iter().any(|&b| b == 0) {
            return Err(Error::InvalidParameter(
                "box needs positive half-widths and at least one bin per axis".into(),
            ));
        }
        Ok(Self {
            center,
            half_widths,
            bins,
        })
    }

    /// Smallest box with cell width exactly `cell_width` per axis covering
    /// the path's range over `lo..=hi` (grid indices), padded by one cell
    /// on each side.
    pub fn covering(path: &SamplePath, lo: usize, hi: usize, cell_width: &[f64]) -> Result<Self> {
        if cell_width.len() != path.dim || cell_width.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter(
                "need one positive cell width per path component".into(),
            ));
        }
        let range = path.component_range(lo, hi);
        let mut center = Vec::with_capacity(path.dim);
        let mut half = Vec::with_capacity(path.dim);
        let mut bins = Vec::with_capacity(path.dim);
        for (l, &(mn, mx)) in range.iter().enumerate() {
            let w = cell_width[l];
            let n = (((mx - mn) / w).ceil() as usize).max(1) + 2;
            center.push(0.5 * (mn + mx));
            half.push(0.5 * n as f64 * w);
            bins.push(n);
        }
        Self::new(center, half, bins)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        2.0 * self.half_widths[axis] / self.bins[axis] as f64
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|l| self.cell_width(l)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|l| self.cell_width(l)).product()
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_widths[axis]
    }

    /// Per-axis cell index of a point, or None when outside the box.
    pub fn cell_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for l in 0..self.dim() {
            let j = ((x[l] - self.lower(l)) / self.cell_width(l)).floor();
            if j < 0.0 || j >= self.bins[l] as f64 {
                return None;
            }
            idx.push(j as usize);
        }
        Some(idx)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for l in 0..self.dim() {
            flat = flat * self.bins[l] + idx[l];
        }
        flat
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for l in (0..self.dim()).rev() {
            idx[l] = flat % self.bins[l];
            flat /= self.bins[l];
        }
        idx
    }

    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.dim())
            .map(|l| self.lower(l) + (idx[l] as f64 + 0.5) * self.cell_width(l))
            .collect()
    }
}

/// Default spatial resolution coupled to the path's regularity: a cell of
/// width `2 step^alpha` keeps a typical step inside O(1) cells.
pub fn default_bin_width(step: f64, alpha: f64) -> f64 {
    2.0 * step.powf(alpha)
}

/// Occupation-histogram local-time field. Stores raw occupation time per
/// cell so that window additivity holds to round-off (bitwise when every
/// boundary computation is exactly representable); densities divide by the
/// cell volume on access.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub region: SpatialBox,
    pub window: (f64, f64),
    cell_time: Vec<f64>,
    touched: Vec<bool>,
    /// Occupation time that fell outside the box (flagged, not attributed).
    pub outside_time: f64,
}

impl LocalTimeField {
    pub fn cell_time(&self, flat: usize) -> f64 {
        self.cell_time[flat]
    }

    /// L-hat at a cell: occupation time over cell volume.
    pub fn density(&self, flat: usize) -> f64 {
        self.cell_time[flat] / self.region.cell_volume()
    }

    pub fn densities(&self) -> Vec<f64> {
        let v = self.region.cell_volume();
        self.cell_time.iter().map(|&t| t / v).collect()
    }

    pub fn touched(&self, flat: usize) -> bool {
        self.touched[flat]
    }

    /// Occupation time attributed inside the box.
    pub fn total_mass(&self) -> f64 {
        numeric::sum(&self.cell_time)
    }

    /// Relative defect of mass conservation: the attributed time (inside +
    /// outside) must reproduce the window length.
    pub fn mass_defect(&self) -> f64 {
        let span = self.window.1 - self.window.0;
        ((self.total_mass() + self.outside_time - span) / span).abs()
    }

    /// sup of the density over cells whose closure the discretized path
    /// visited.
    pub fn sup_density(&self) -> f64 {
        let v = self.region.cell_volume();
        self.cell_time
            .iter()
            .zip(&self.touched)
            .filter(|(_, &t)| t)
            .map(|(&c, _)| c / v)
            .fold(0.0, f64::max)
    }

    /// Flat indices of touched cells strictly inside the touched range on
    /// every axis (excludes the extreme cells where the density is
    /// boundary-biased).
    pub fn interior_cells(&self) -> Vec<usize> {
        let d = self.region.dim();
        let mut lo = vec![usize::MAX; d];
        let mut hi = vec![0usize; d];
        for flat in 0..self.cell_time.len() {
            if self.touched[flat] {
                let idx = self.region.multi_index(flat);
                for l in 0..d {
                    lo[l] = lo[l].min(idx[l]);
                    hi[l] = hi[l].max(idx[l]);
                }
            }
        }
        (0..self.cell_time.len())
            .filter(|&flat| {
                if !self.touched[flat] {
                    return false;
                }
                let idx = self.region.multi_index(flat);
                (0..d).all(|l| idx[l] > lo[l] && idx[l] < hi[l])
            })
            .collect()
    }

    /// Merges the field for an adjacent, later window (same region):
    /// cellwise sums of raw occupation times.
    pub fn merge_adjacent(&mut self, later: &LocalTimeField) -> Result<()> {
        if later.region != self.region {
            return Err(Error::InvalidParameter(
                "merge needs identical boxes".into(),
            ));
        }
        if (later.window.0 - self.window.1).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "windows not adjacent: {:?} then {:?}",
                self.window, later.window
            )));
        }
        for (a, b) in self.cell_time.iter_mut().zip(&later.cell_time) {
            *a += b;
        }
        for (a, b) in self.touched.iter_mut().zip(&later.touched) {
            *a |= b;
        }
        self.outside_time += later.outside_time;
        self.window.1 = later.window.1;
        Ok(())
    }
}

/// Builds the occupation histogram of `path` over `window` on the lattice.
///
/// Each step's duration is split proportionally to the fractions of the
/// linear segment inside each crossed cell; window endpoints inside a step
/// clip the segment by linear interpolation.
pub fn occupation_histogram(
    path: &SamplePath,
    window: (f64, f64),
    region: &SpatialBox,
) -> Result<LocalTimeField> {
    let (s, t) = window;
    if !(t > s) {
        return Err(Error::EmptyWindow(s, t));
    }
    if s < path.grid.t_start() - 1e-12 || t > path.grid.t_end() + 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "window [{s}, {t}] outside the path span [{}, {}]",
            path.grid.t_start(),
            path.grid.t_end()
        )));
    }
    if region.dim() != path.dim {
        return Err(Error::InvalidParameter(format!(
            "box dimension {} != path dimension {}",
            region.dim(),
            path.dim
        )));
    }

    let mut field = LocalTimeField {
        region: region.clone(),
        window,
        cell_time: vec![0.0; region.n_cells()],
        touched: vec![false; region.n_cells()],
        outside_time: 0.0,
    };

    let d = path.dim;
    let n = path.grid.n_steps();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut crossings: Vec<f64> = Vec::new();
    let mut mid = vec![0.0; d];

    for k in 0..n {
        let (t0, t1) = (path.grid.point(k), path.grid.point(k + 1));
        let u0 = t0.max(s);
        let u1 = t1.min(t);
        if u1 <= u0 {
            continue;
        }
        // clip the segment to the window by linear interpolation
        let step = t1 - t0;
        let f0 = (u0 - t0) / step;
        let f1 = (u1 - t0) / step;
        for l in 0..d {
            let (p, q) = (path.value(k, l), path.value(k + 1, l));
            a[l] = p + f0 * (q - p);
            b[l] = p + f1 * (q - p);
        }
        let tau = u1 - u0;

        // crossing parameters of the cell lattice (extended outside the box)
        crossings.clear();
        crossings.push(0.0);
        crossings.push(1.0);
        for l in 0..d {
            let w = region.cell_width(l);
            let lower = region.lower(l);
            let (alo, ahi) = if a[l] <= b[l] {
                (a[l], b[l])
            } else {
                (b[l], a[l])
            };
            if ahi - alo < 1e-300 {
                continue;
            }
            let j0 = ((alo - lower) / w).floor() as i64 + 1;
            let j1 = ((ahi - lower) / w).floor() as i64;
            for j in j0..=j1 {
                let boundary = lower + j as f64 * w;
                let lam = (boundary - a[l]) / (b[l] - a[l]);
                if lam > 0.0 && lam < 1.0 {
                    crossings.push(lam);
                }
            }
        }
        crossings.sort_by(|x, y| x.partial_cmp(y).unwrap());

        for pair in 0..crossings.len() - 1 {
            let (l0, l1) = (crossings[pair], crossings[pair + 1]);
            if l1 <= l0 {
                continue;
            }
            let m = 0.5 * (l0 + l1);
            for l in 0..d {
                mid[l] = a[l] + m * (b[l] - a[l]);
            }
            let dt = tau * (l1 - l0);
            match region.cell_of(&mid) {
                Some(idx) => {
                    let flat = region.flat_index(&idx);
                    field.cell_time[flat] += dt;
                    field.touched[flat] = true;
                }
                None => field.outside_time += dt,
            }
        }
    }
    Ok(field)
}

/// Truncated Fourier inversion of the occupation measure, precomputed per
/// path/window so that many spatial points can be evaluated cheaply.
pub struct FourierEstimator {
    dim: usize,
    cutoff: f64,
    freq_step: f64,
    /// Per-axis midpoint frequency grid.
    axis_freqs: Vec<f64>,
    /// Time transform int exp(-i<xi, X_s>) ds of the linear interpolant,
    /// per product-grid frequency, with the optional cell-average weight
    /// folded in.
    transform: Vec<(f64, f64)>,
}

impl FourierEstimator {
    /// `cell_match`: when set, each frequency carries the factor
    /// `prod_l sinc(xi_l eps_l / 2)`, making the estimate comparable to an
    /// eps-cell histogram average instead of a point value.
    pub fn new(
        path: &SamplePath,
        window: (f64, f64),
        cutoff: f64,
        freq_step: f64,
        cell_match: Option<&[f64]>,
    ) -> Result<Self> {
        let (s, t) = window;
        if !(t > s) {
            return Err(Error::EmptyWindow(s, t));
        }
        if s < path.grid.t_start() - 1e-12 || t > path.grid.t_end() + 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "window [{s}, {t}] outside the path span [{}, {}]",
                path.grid.t_start(),
                path.grid.t_end()
            )));
        }
        if !(cutoff > 0.0) || !(freq_step > 0.0) || freq_step > cutoff / 16.0 {
            return Err(Error::InvalidParameter(format!(
                "need cutoff > 0 and freq_step <= cutoff/16, got ({cutoff}, {freq_step})"
            )));
        }
        if let Some(eps) = cell_match {
            if eps.len() != path.dim || eps.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::InvalidParameter(
                    "cell-average matching needs one positive width per axis".into(),
                ));
            }
        }
        let d = path.dim;
        let m_axis = ((2.0 * cutoff / freq_step).round() as usize).max(32);
        let n_freq = m_axis
            .checked_pow(d as u32)
            .filter(|&n| n <= 1 << 23)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("frequency grid too large: {m_axis}^{d} points"))
            })?;
        let freq_step = 2.0 * cutoff / m_axis as f64;
        let axis_freqs: Vec<f64> = (0..m_axis)
            .map(|m| -cutoff + (m as f64 + 0.5) * freq_step)
            .collect();

        // time sample points: clipped window endpoints + interior grid points
        let mut times: Vec<f64> = Vec::new();
        let mut points: Vec<Vec<f64>> = Vec::new();
        let interp = |u: f64| -> Vec<f64> {
            let k = path.grid.index_at(u).min(path.grid.n_steps() - 1);
            let (t0, t1) = (path.grid.point(k), path.grid.point(k + 1));
            let f = ((u - t0) / (t1 - t0)).clamp(0.0, 1.0);
            (0..d)
                .map(|l| path.value(k, l) + f * (path.value(k + 1, l) - path.value(k, l)))
                .collect()
        };
        times.push(s);
        points.push(interp(s));
        for k in 0..=path.grid.n_steps() {
            let u = path.grid.point(k);
            if u > s && u < t {
                times.push(u);
                points.push(path.at(k).to_vec());
            }
        }
        times.push(t);
        points.push(interp(t));

        // Each segment contributes dt * sinc(<xi, dx>/2) * exp(-i<xi, mid>),
        // the exact transform of the linear interpolant; the estimator then
        // integrates the same occupation measure as the histogram instead of
        // a quadrature of it, which matters once |xi * dx| is order one.
        let mut transform = vec![(0.0, 0.0); n_freq];
        let mut idx = vec![0usize; d];
        for (flat, tr) in transform.iter_mut().enumerate() {
            let mut rem = flat;
            for l in (0..d).rev() {
                idx[l] = rem % m_axis;
                rem /= m_axis;
            }
            let xi: Vec<f64> = (0..d).map(|l| axis_freqs[idx[l]]).collect();
            let (mut re, mut im) = (KahanSum::new(), KahanSum::new());
            for k in 1..times.len() {
                let dt = times[k] - times[k - 1];
                if dt <= 0.0 {
                    continue;
                }
                let (p0, p1) = (&points[k - 1], &points[k]);
                let mut phase = 0.0;
                let mut spread = 0.0;
                for l in 0..d {
                    phase -= xi[l] * 0.5 * (p0[l] + p1[l]);
                    spread += xi[l] * 0.5 * (p1[l] - p0[l]);
                }
                let (sn, cs) = phase.sin_cos();
                let amp = dt * numeric::sinc(spread);
                re.add(amp * cs);
                im.add(amp * sn);
            }
            let mut wgt = 1.0;
            if let Some(eps) = cell_match {
                for l in 0..d {
                    wgt *= numeric::sinc(0.5 * xi[l] * eps[l]);
                }
            }
            *tr = (wgt * re.value(), wgt * im.value());
        }

        Ok(Self {
            dim: d,
            cutoff,
            freq_step,
            axis_freqs,
            transform,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn freq_step(&self) -> f64 {
        self.freq_step
    }

    /// L-hat(x): real part of the truncated double integral.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let m_axis = self.axis_freqs.len();
        let mut acc = KahanSum::new();
        let mut idx = vec![0usize; d];
        for (flat, &(re, im)) in self.transform.iter().enumerate() {
            let mut rem = flat;
            for l in (0..d).rev() {
                idx[l] = rem % m_axis;
                rem /= m_axis;
            }
            let phase: f64 = (0..d).map(|l| self.axis_freqs[idx[l]] * x[l]).sum::<f64>();
            let (sn, cs) = phase.sin_cos();
            // Re(exp(i phase) * (re + i im))
            acc.add(cs * re - sn * im);
        }
        let cell = self.freq_step.powi(d as i32);
        acc.value() * cell / (2.0 * std::f64::consts::PI).powi(d as i32)
    }
}

/// Range-aware default frequency step: fine enough for the cutoff, and with
/// periodic images (spacing 2 pi / step) pushed beyond four times the
/// spread of the path range around `x`.
pub fn default_freq_step(path: &SamplePath, window: (f64, f64), x: &[f64], cutoff: f64) -> f64 {
    let lo = path.grid.index_at(window.0);
    let hi = path.grid.index_at(window.1);
    let range = path.component_range(lo, hi);
    let mut spread: f64 = 0.0;
    for (l, &(mn, mx)) in range.iter().enumerate() {
        spread = spread.max(mx.max(x[l]) - mn.min(x[l]));
    }
    let anti_alias = 2.0 * std::f64::consts::PI / (4.0 * spread.max(1e-6));
    (cutoff / 32.0).min(anti_alias)
}

/// True when the cutoff stays within the frequency content resolvable at
/// the path's step and regularity.
pub fn fourier_resolution_ok(step: f64, alpha: f64, cutoff: f64) -> bool {
    cutoff * step.powf(alpha) <= 1.0
}

/// One-shot Fourier estimate at a single point; `freq_step` of None picks
/// the range-aware default.
pub fn fourier_localtime(
    path: &SamplePath,
    window: (f64, f64),
    x: &[f64],
    cutoff: f64,
    freq_step: Option<f64>,
    cell_match: Option<&[f64]>,
) -> Result<f64> {
    let step = freq_step.unwrap_or_else(|| default_freq_step(path, window, x, cutoff));
    Ok(FourierEstimator::new(path, window, cutoff, step, cell_match)?.evaluate(x))
}

/// Relative defect of `int g(X_s) ds = sum_cells g(center) L-hat vol`,
/// with the left side computed by trapezoidal quadrature along the path.
pub fn occupation_identity_check<G: Fn(&[f64]) -> f64>(
    path: &SamplePath,
    field: &LocalTimeField,
    g: G,
) -> Result<f64> {
    let (s, t) = field.window;
    let d = path.dim;
    let mut lhs = KahanSum::new();
    for k in 0..path.grid.n_steps() {
        let (t0, t1) = (path.grid.point(k), path.grid.point(k + 1));
        let u0 = t0.max(s);
        let u1 = t1.min(t);
        if u1 <= u0 {
            continue;
        }
        let step = t1 - t0;
        let ev = |f: f64| -> f64 {
            let pt: Vec<f64> = (0..d)
                .map(|l| path.value(k, l) + f * (path.value(k + 1, l) - path.value(k, l)))
                .collect();
            g(&pt)
        };
        lhs.add(0.5 * (u1 - u0) * (ev((u0 - t0) / step) + ev((u1 - t0) / step)));
    }
    let lhs = lhs.value();
    if lhs == 0.0 {
        return Err(Error::DivisionByZero(
            "path integral of the test function vanishes".into(),
        ));
    }
    let mut rhs = KahanSum::new();
    for flat in 0..field.region.n_cells() {
        // density times cell volume collapses back to the raw cell time
        let ct = field.cell_time(flat);
        if ct != 0.0 {
            let center = field.region.cell_center(&field.region.multi_index(flat));
            rhs.add(g(&center) * ct);
        }
    }
    Ok(((lhs - rhs.value()) / lhs).abs())
}

/// Path oscillation at dyadic lags with the regularity-normalized ratios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusReport {
    pub h_values: Vec<f64>,
    pub omega: Vec<f64>,
    /// Fitted slope of log omega vs log h.
    pub slope: f64,
    pub slope_ci95: (f64, f64),
    /// omega(h) / (h^alpha (log 1/h)^iota).
    pub normalized_ratios: Vec<f64>,
}

pub fn modulus_of_continuity(
    path: &SamplePath,
    h_values: &[f64],
    alpha: f64,
    iota: f64,
) -> Result<ModulusReport> {
    let step = path.grid.step();
    let mut hs = Vec::new();
    let mut omega = Vec::new();
    let mut ratios = Vec::new();
    for &h in h_values {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lags must lie in (0,1) for the log-normalized ratios, got {h}"
            )));
        }
        let lag = (h / step).round() as usize;
        if lag < 1 || lag > path.grid.n_steps() {
            return Err(Error::InvalidParameter(format!(
                "lag {h} not resolvable at step {step}"
            )));
        }
        let w = path.oscillation(lag);
        hs.push(h);
        omega.push(w);
        ratios.push(w / (h.powf(alpha) * (1.0 / h).ln().powf(iota)));
    }
    let fit: LineFit = stats::log_log_fit(&hs, &omega)?;
    Ok(ModulusReport {
        h_values: hs,
        omega,
        slope: fit.slope,
        slope_ci95: fit.slope_ci95(),
        normalized_ratios: ratios,
    })
}
