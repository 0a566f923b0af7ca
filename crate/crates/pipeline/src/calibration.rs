//! Sensor calibration from sphere presses of known radius.

use serde::{Deserialize, Serialize};
use taxel_core::optics::{
    calibrate_lut, height_field, normals_from_height, render, CalibrationLUT, GradientField, ImprintSpec, LightRig,
    TactileFrame, DEFAULT_BINS, DEFAULT_MASK_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::scenario::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Calibration sphere radius (mm).
    pub sphere_radius: f64,
    /// Indentation depths of the calibration presses (mm).
    pub depths: Vec<f64>,
    pub bins: usize,
    /// Decoding mask threshold on `‖ΔRGB‖`.
    pub mask_threshold: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            sphere_radius: 2.5,
            depths: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            bins: DEFAULT_BINS,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sphere_radius > 0.0) || self.depths.is_empty() {
            return Err(Error::config("calibration needs a positive sphere radius and at least one depth"));
        }
        if self.depths.iter().any(|&z| !(z > 0.0 && z <= self.sphere_radius)) {
            return Err(Error::config("calibration depths must lie in (0, sphere_radius]"));
        }
        if !(self.mask_threshold > 0.0) {
            return Err(Error::config("mask threshold must be positive"));
        }
        Ok(())
    }
}

/// One rendered sphere press with its exact slopes.
pub fn sphere_press(sim: &SimConfig, radius: f64, depth: f64) -> Result<(TactileFrame, GradientField)> {
    let truth = normals_from_height(&height_field(&ImprintSpec::sphere(radius), depth, &sim.geometry()?)?);
    let (frame, _) = render(&truth, &LightRig::default())?;
    Ok((frame, truth))
}

/// Non-contact frame of the sensor.
pub fn reference_frame(sim: &SimConfig) -> Result<TactileFrame> {
    Ok(render(&GradientField::zeros(&sim.geometry()?), &LightRig::default())?.0)
}

/// Lookup table calibrated on noise-free sphere presses, plus the reference frame.
pub fn calibrate_sensor(sim: &SimConfig, cal: &CalibrationConfig) -> Result<(CalibrationLUT, TactileFrame)> {
    cal.validate()?;
    let reference = reference_frame(sim)?;
    let presses = cal.depths.iter().map(|&z| sphere_press(sim, cal.sphere_radius, z)).collect::<Result<Vec<_>>>()?;
    let lut = calibrate_lut(&presses, &reference, cal.bins)?.with_mask_threshold(cal.mask_threshold);
    Ok((lut, reference))
}
