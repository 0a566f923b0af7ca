use serde::{Deserialize, Serialize};

use super::DepthMap;
use crate::error::{Error, Result};
use crate::mechanics::ReconEval;

/// Thresholded contact region of a depth map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactFit {
    /// Projected area (mm²).
    pub area: f64,
    /// Equivalent circle radius `sqrt(area / π)` (mm).
    pub radius: f64,
    /// Centroid (mm) relative to the frame center.
    pub centroid: (f64, f64),
    pub pixels: usize,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pixels deeper than `depth_threshold` below the non-contact surround.
///
/// The surround level is the median of the map, so the zero-mean gauge of a
/// reconstruction and the zero-outside convention of a ground-truth imprint
/// are treated alike as long as contact covers under half the frame.
/// Returns `Ok(None)` when nothing crosses the threshold.
pub fn fit_contact_region(d: &DepthMap, depth_threshold: f64) -> Result<Option<ContactFit>> {
    if !(depth_threshold > 0.0) {
        return Err(Error::domain(format!("depth threshold must be positive, got {depth_threshold}")));
    }
    let base = median(d.depth.as_slice());
    let geom = d.geometry();
    let mut count = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in 0..d.height() {
        for c in 0..d.width() {
            if d.depth[(r, c)] - base > depth_threshold {
                count += 1;
                let (x, y) = geom.pixel_xy(r, c);
                sx += x;
                sy += y;
            }
        }
    }
    if count == 0 {
        return Ok(None);
    }
    let area = count as f64 * d.pitch * d.pitch;
    Ok(Some(ContactFit {
        area,
        radius: (area / std::f64::consts::PI).sqrt(),
        centroid: (sx / count as f64, sy / count as f64),
        pixels: count,
    }))
}

/// Mean of `|S_E - S_A| / normalizer`; the normalizer defaults to the largest `S_A`.
pub fn recon_mae(evals: &[ReconEval], normalizer: Option<f64>) -> Result<f64> {
    if evals.is_empty() {
        return Err(Error::domain("no reconstruction evaluations"));
    }
    let norm = normalizer.unwrap_or_else(|| evals.iter().map(|e| e.theoretical).fold(0.0, f64::max));
    if !(norm > 0.0) {
        return Err(Error::domain(format!("normalizer must be positive, got {norm}")));
    }
    Ok(evals.iter().map(|e| (e.measured - e.theoretical).abs() / norm).sum::<f64>() / evals.len() as f64)
}
