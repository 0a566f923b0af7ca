use serde::{Deserialize, Serialize};

use super::{GradientField, TactileFrame};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Bins per ΔRGB channel.
pub const DEFAULT_BINS: usize = 16;
/// ‖ΔRGB‖₂ above which a pixel counts as in contact during lookup.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LutCell {
    pub gx: f64,
    pub gy: f64,
    pub count: u64,
}

/// Quantized ΔRGB → mean surface slope table.
///
/// Each channel axis spans `[lower[c], lower[c] + bins * bin_width[c])`; the
/// zero color change sits at the center of a bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationLUT {
    pub(crate) bins: usize,
    pub(crate) lower: [f64; 3],
    pub(crate) bin_width: [f64; 3],
    pub(crate) mask_threshold: f64,
    pub(crate) cells: Vec<LutCell>,
    /// Slopes served per cell after nearest-filled fallback.
    resolved: Vec<(f64, f64)>,
    filled: usize,
}

impl CalibrationLUT {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }

    pub fn bin_width(&self) -> [f64; 3] {
        self.bin_width
    }

    pub fn mask_threshold(&self) -> f64 {
        self.mask_threshold
    }

    pub(crate) fn from_parts(
        bins: usize,
        lower: [f64; 3],
        bin_width: [f64; 3],
        mask_threshold: f64,
        cells: Vec<LutCell>,
    ) -> Self {
        let mut lut = Self { bins, lower, bin_width, mask_threshold, cells, resolved: Vec::new(), filled: 0 };
        lut.resolve();
        lut
    }

    fn resolve(&mut self) {
        let resolved = (0..self.cells.len())
            .map(|flat| {
                let b = self.bins;
                let idx = [flat / (b * b), (flat / b) % b, flat % b];
                let cell = &self.cells[flat];
                if cell.count > 0 {
                    (cell.gx, cell.gy)
                } else {
                    self.nearest_filled(idx).map_or((0.0, 0.0), |c| (c.gx, c.gy))
                }
            })
            .collect();
        self.resolved = resolved;
        self.filled = self.cells.iter().filter(|c| c.count > 0).count();
    }

    pub fn with_mask_threshold(mut self, threshold: f64) -> Self {
        self.mask_threshold = threshold;
        self
    }

    pub fn cells(&self) -> &[LutCell] {
        &self.cells
    }

    pub fn filled_cells(&self) -> usize {
        self.filled
    }

    /// Filled cells over all cells.
    pub fn fill_fraction(&self) -> f64 {
        self.filled_cells() as f64 / self.cells.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.filled_cells() == 0
    }

    /// Bin coordinates of a color change; out-of-range values clamp to the edge bins.
    pub fn quantize(&self, delta: [f64; 3]) -> [usize; 3] {
        let mut idx = [0; 3];
        for c in 0..3 {
            let t = ((delta[c] - self.lower[c]) / self.bin_width[c]).floor();
            idx[c] = t.clamp(0.0, (self.bins - 1) as f64) as usize;
        }
        idx
    }

    fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.bins + idx[1]) * self.bins + idx[2]
    }

    pub fn cell(&self, idx: [usize; 3]) -> &LutCell {
        &self.cells[self.flat(idx)]
    }

    /// Slopes stored for `delta`, falling back to the nearest filled cell
    /// (Euclidean distance in bin units, ties broken by lowest index).
    pub fn lookup(&self, delta: [f64; 3]) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        Some(self.resolved[self.flat(self.quantize(delta))])
    }

    fn nearest_filled(&self, idx: [usize; 3]) -> Option<&LutCell> {
        let b = self.bins;
        let mut best: Option<(usize, &LutCell)> = None;
        for (flat, cell) in self.cells.iter().enumerate() {
            if cell.count == 0 {
                continue;
            }
            let pos = [flat / (b * b), (flat / b) % b, flat % b];
            let d2: usize = (0..3).map(|k| pos[k].abs_diff(idx[k]).pow(2)).sum();
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, cell));
            }
        }
        best.map(|(_, c)| c)
    }
}

fn pixel_delta(frame: &TactileFrame, reference: &TactileFrame, p: usize) -> [f64; 3] {
    let (a, b) = (frame.pixels(), reference.pixels());
    [a[3 * p] - b[3 * p], a[3 * p + 1] - b[3 * p + 1], a[3 * p + 2] - b[3 * p + 2]]
}

/// Builds the ΔRGB → slope table from presses with known gradients.
///
/// Every masked pixel of every press contributes its ground-truth slope to
/// the running mean of the cell its color change falls in.
pub fn calibrate_lut(
    presses: &[(TactileFrame, GradientField)],
    reference: &TactileFrame,
    bins: usize,
) -> Result<CalibrationLUT> {
    if presses.is_empty() {
        return Err(Error::Calibration("no calibration presses".into()));
    }
    if bins < 2 {
        return Err(Error::Calibration(format!("need at least 2 bins per channel, got {bins}")));
    }
    let mut lo = [0.0f64; 3];
    let mut hi = [0.0f64; 3];
    let mut any = false;
    for (k, (frame, truth)) in presses.iter().enumerate() {
        if !frame.same_geometry(reference) || frame.width() != truth.width() || frame.height() != truth.height() {
            return Err(Error::Calibration(format!("press {k}: frame, reference and gradients differ in size")));
        }
        for p in (0..truth.mask.len()).filter(|&p| truth.mask[p]) {
            any = true;
            let d = pixel_delta(frame, reference, p);
            for c in 0..3 {
                lo[c] = lo[c].min(d[c]);
                hi[c] = hi[c].max(d[c]);
            }
        }
    }
    if !any {
        return Err(Error::Calibration("calibration presses have empty contact masks".into()));
    }

    let mut lower = [0.0; 3];
    let mut bin_width = [0.0; 3];
    for c in 0..3 {
        let span = (hi[c] - lo[c]).max(1e-6);
        let w = span / (bins - 1) as f64;
        // put ΔRGB = 0 at the center of bin `zero`
        let zero = (-lo[c] / w).round();
        lower[c] = -(zero + 0.5) * w;
        bin_width[c] = w;
    }

    let mut lut = CalibrationLUT::from_parts(
        bins,
        lower,
        bin_width,
        DEFAULT_MASK_THRESHOLD,
        vec![LutCell::default(); bins * bins * bins],
    );
    for (frame, truth) in presses {
        for p in (0..truth.mask.len()).filter(|&p| truth.mask[p]) {
            let idx = lut.quantize(pixel_delta(frame, reference, p));
            let flat = lut.flat(idx);
            let cell = &mut lut.cells[flat];
            cell.count += 1;
            let n = cell.count as f64;
            cell.gx += (truth.gx.as_slice()[p] - cell.gx) / n;
            cell.gy += (truth.gy.as_slice()[p] - cell.gy) / n;
        }
    }
    lut.resolve();
    Ok(lut)
}

/// Per-pixel slopes decoded from the color change against `reference`.
pub fn lookup_gradients(frame: &TactileFrame, reference: &TactileFrame, lut: &CalibrationLUT) -> Result<GradientField> {
    if !frame.same_geometry(reference) {
        return Err(Error::domain("frame and reference differ in size"));
    }
    if lut.is_empty() {
        return Err(Error::Calibration("lookup table has no filled cells".into()));
    }
    let (w, h) = (frame.width(), frame.height());
    let mut gx = Grid::zeros(w, h);
    let mut gy = Grid::zeros(w, h);
    let mut mask = vec![false; w * h];
    let t2 = lut.mask_threshold * lut.mask_threshold;
    #[allow(clippy::needless_range_loop)] // `p` indexes the frames and both gradient grids too
    for p in 0..w * h {
        let d = pixel_delta(frame, reference, p);
        if d.iter().map(|v| v * v).sum::<f64>() <= t2 {
            continue;
        }
        if let Some((x, y)) = lut.lookup(d) {
            gx.as_mut_slice()[p] = x;
            gy.as_mut_slice()[p] = y;
            mask[p] = true;
        }
    }
    Ok(GradientField { gx, gy, mask, pitch: frame.pitch() })
}
