//! Turning a simulated press into two-stream inputs.
//!
//! Depth stream: `IM.n` is decoded against the reference through the lookup
//! table and Poisson integration, then `(depth, gx, gy)` are average-pooled by
//! `downsample`. Force stream: the force record is read on a fixed time grid
//! of `window` points spaced `window_dt` apart, holding the last value once
//! the press has stopped, so the ramp slope `k_total v` survives intact.

use serde::{Deserialize, Serialize};
use taxel_core::mechanics::{infer_stiffness, ForceSequence};
use taxel_core::optics::{
    fit_contact_region, lookup_gradients, poisson_reconstruct, CalibrationLUT, DepthMap, GradientField, TactileFrame,
};
use taxel_core::Grid;
use taxel_nn::Tensor;
use taxel_twostream::ForceRegressor;

use crate::error::{Error, Result};
use crate::scenario::{select_frames, FrameWindow, PressScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Average-pooling factor from frame to depth-encoder resolution.
    pub downsample: usize,
    /// Force window length `T`.
    pub window: usize,
    /// Force window spacing (s).
    pub window_dt: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self { downsample: 2, window: 64, window_dt: 0.05 }
    }
}

impl InputConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample == 0 || self.window < 2 || !(self.window_dt > 0.0) {
            return Err(Error::config("downsample must be ≥ 1, window ≥ 2 and window_dt positive"));
        }
        Ok(())
    }
}

/// Where the force stream comes from.
#[derive(Debug, Clone, Copy)]
pub enum ForceSource<'a> {
    /// The simulated force record.
    Oracle,
    /// Force regressed from every internal frame.
    Regressed(&'a ForceRegressor),
}

/// Unnormalized two-stream inputs: depth `[3, H, W]` (mm, slope, slope) and force `[1, T]` (N).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInputs {
    pub depth: Tensor,
    pub force: Tensor,
}

/// Full-resolution decoding of one frame.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub gradients: GradientField,
    pub depth: DepthMap,
}

pub fn decode_frame(frame: &TactileFrame, reference: &TactileFrame, lut: &CalibrationLUT) -> Result<Decoded> {
    let gradients = lookup_gradients(frame, reference, lut)?;
    let depth = poisson_reconstruct(&gradients);
    Ok(Decoded { gradients, depth })
}

fn avg_pool(g: &Grid, factor: usize) -> Result<Vec<f64>> {
    let (w, h) = (g.width(), g.height());
    if w % factor != 0 || h % factor != 0 {
        return Err(Error::config(format!("{w}×{h} frame is not divisible by downsample factor {factor}")));
    }
    let (ow, oh) = (w / factor, h / factor);
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = vec![0.0; ow * oh];
    for r in 0..h {
        for c in 0..w {
            out[(r / factor) * ow + c / factor] += g[(r, c)] * norm;
        }
    }
    Ok(out)
}

/// `[3, H/f, W/f]` stack of depth and both slopes.
pub fn depth_input(depth: &DepthMap, gradients: &GradientField, factor: usize) -> Result<Tensor> {
    let mut data = avg_pool(&depth.depth, factor)?;
    data.extend(avg_pool(&gradients.gx, factor)?);
    data.extend(avg_pool(&gradients.gy, factor)?);
    let shape = vec![3, depth.height() / factor, depth.width() / factor];
    Ok(Tensor::new(shape, data)?)
}

/// Linear interpolation of `seq` at `t`, holding the last value beyond the record.
fn value_at(seq: &ForceSequence, t: f64) -> f64 {
    let f = seq.forces();
    let pos = t / seq.dt();
    if pos >= (f.len() - 1) as f64 {
        return f[f.len() - 1];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    f[i] + frac * (f[i + 1] - f[i])
}

/// `[1, window]` force window (N) sampled every `dt` from `t = 0`.
pub fn force_window(seq: &ForceSequence, window: usize, dt: f64) -> Tensor {
    let data = (0..window).map(|k| value_at(seq, k as f64 * dt)).collect();
    Tensor::new(vec![1, window], data).expect("shape matches")
}

/// Stretches `values` onto `n` evenly spaced points, keeping both endpoints.
pub fn resample_linear(values: &[f64], n: usize) -> Vec<f64> {
    match (values.len(), n) {
        (_, 0) | (0, _) => Vec::new(),
        (1, n) => vec![values[0]; n],
        (_, 1) => vec![values[0]],
        (m, n) => (0..n)
            .map(|k| {
                let pos = k as f64 * (m - 1) as f64 / (n - 1) as f64;
                let i = (pos.floor() as usize).min(m - 2);
                let frac = pos - i as f64;
                values[i] + frac * (values[i + 1] - values[i])
            })
            .collect(),
    }
}

/// Regressor input: `(frame - reference)` as `[3, H/f, W/f]`.
pub fn regressor_input(frame: &TactileFrame, reference: &TactileFrame, factor: usize) -> Result<Tensor> {
    let planar = frame.difference_planar(reference)?;
    let (w, h) = (frame.width(), frame.height());
    let mut data = Vec::with_capacity(planar.len() / (factor * factor));
    for plane in planar.chunks_exact(w * h) {
        data.extend(avg_pool(&Grid::from_vec(w, h, plane.to_vec()), factor)?);
    }
    Ok(Tensor::new(vec![3, h / factor, w / factor], data)?)
}

/// Force (N) regressed from each frame of the window, on the frame clock.
pub fn regressed_forces(window: &FrameWindow, regressor: &ForceRegressor, factor: usize) -> Result<ForceSequence> {
    let sel = select_frames(window)?;
    let forces = sel
        .internal
        .iter()
        .map(|f| regressor.predict(&regressor_input(f, &window.reference, factor)?).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForceSequence::new(window.dt(), forces)?)
}

/// Two-stream inputs for one press, plus the full-resolution decoding of `IM.n`.
pub fn build_sample(
    window: &FrameWindow,
    seq: &ForceSequence,
    lut: &CalibrationLUT,
    reference: &TactileFrame,
    source: ForceSource<'_>,
    cfg: &InputConfig,
) -> Result<(SampleInputs, Decoded)> {
    let sel = select_frames(window)?;
    let decoded = decode_frame(sel.external.1, reference, lut)?;
    let depth = depth_input(&decoded.depth, &decoded.gradients, cfg.downsample)?;
    let force = match source {
        ForceSource::Oracle => force_window(seq, cfg.window, cfg.window_dt),
        ForceSource::Regressed(r) => {
            force_window(&regressed_forces(window, r, cfg.downsample)?, cfg.window, cfg.window_dt)
        }
    };
    Ok((SampleInputs { depth, force }, decoded))
}

/// Hand-crafted features: fitted contact radius and inferred object stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandFeatures {
    /// Equivalent-circle radius of the reconstructed contact region (mm); 0 without contact.
    pub radius: f64,
    /// Reconstructed contact area (mm²).
    pub area: f64,
    /// `k1` from the force ramp (N/mm).
    pub stiffness: f64,
}

/// Fraction of the reconstructed peak depth that delimits the fitted contact region.
pub const FIT_FRACTION: f64 = 0.1;

pub fn hand_features(depth: &DepthMap, seq: &ForceSequence, scenario: &PressScenario) -> Result<HandFeatures> {
    let mut sorted = depth.depth.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let (median, peak) = (sorted[sorted.len() / 2], sorted[sorted.len() - 1]);
    let fit = if peak - median > 1e-9 { fit_contact_region(depth, FIT_FRACTION * (peak - median))? } else { None };
    let stiffness = infer_stiffness(seq, scenario.speed, scenario.elastomer_stiffness)?;
    Ok(HandFeatures { radius: fit.map_or(0.0, |f| f.radius), area: fit.map_or(0.0, |f| f.area), stiffness })
}
