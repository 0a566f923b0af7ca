//! Synthetic tactile-sensor optics.
//!
//! Forward path: [`height_field`] → [`normals_from_height`] → [`render`].
//! Decoding path: [`calibrate_lut`] on known sphere presses, then
//! [`lookup_gradients`] → [`poisson_reconstruct`] → [`fit_contact_region`].
//!
//! Image axes: `x` runs along columns, `y` along rows, both in mm via the
//! pixel pitch. Depth is positive into the elastomer.

mod fit;
mod geometry;
pub mod io;
mod lut;
mod poisson;
mod render;

pub use fit::{fit_contact_region, recon_mae, ContactFit};
pub use geometry::{
    height_field, FrameGeometry, ImprintSpec, Indenter, Placement, ShapeKind, DEFAULT_PRISM_RIM_PX,
    DEFAULT_SPHERE_RIM_PX,
};
pub use lut::{calibrate_lut, lookup_gradients, CalibrationLUT, DEFAULT_BINS, DEFAULT_MASK_THRESHOLD};
pub use poisson::{dct2, idct2, poisson_reconstruct};
pub use render::{normals_from_height, render, render_with_noise, LightRig, RenderReport, DEFAULT_NOISE_SIGMA};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Spatial extents must be multiples of this (five 2× pools in the depth encoder).
pub const FRAME_ALIGN: usize = 32;

/// H×W RGB image with channel values in `[0, 1]`, stored interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    width: usize,
    height: usize,
    pitch: f64,
    pixels: Vec<f64>,
}

impl TactileFrame {
    pub fn new(width: usize, height: usize, pitch: f64, pixels: Vec<f64>) -> Result<Self> {
        check_extent(width, height)?;
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::domain(format!("pixel pitch must be positive, got {pitch}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::domain(format!(
                "frame buffer has {} values, expected {}",
                pixels.len(),
                width * height * 3
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, pitch, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn geometry(&self) -> FrameGeometry {
        FrameGeometry { width: self.width, height: self.height, pitch: self.pitch }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn rgb(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn same_geometry(&self, other: &TactileFrame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Channel-planar `3×H×W` difference `self - reference`.
    pub fn difference_planar(&self, reference: &TactileFrame) -> Result<Vec<f64>> {
        if !self.same_geometry(reference) {
            return Err(Error::domain("frame and reference differ in size"));
        }
        let plane = self.width * self.height;
        let mut out = vec![0.0; 3 * plane];
        for p in 0..plane {
            for c in 0..3 {
                out[c * plane + p] = self.pixels[p * 3 + c] - reference.pixels[p * 3 + c];
            }
        }
        Ok(out)
    }
}

/// Per-pixel surface slopes plus the contact mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub gx: Grid,
    pub gy: Grid,
    pub mask: Vec<bool>,
    pub pitch: f64,
}

impl GradientField {
    pub fn zeros(geom: &FrameGeometry) -> Self {
        Self {
            gx: Grid::zeros(geom.width, geom.height),
            gy: Grid::zeros(geom.width, geom.height),
            mask: vec![false; geom.width * geom.height],
            pitch: geom.pitch,
        }
    }

    pub fn width(&self) -> usize {
        self.gx.width()
    }

    pub fn height(&self) -> usize {
        self.gx.height()
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// `a * self + b * other`, mask is the union.
    pub fn combine(&self, a: f64, other: &GradientField, b: f64) -> GradientField {
        let mix = |p: &Grid, q: &Grid| {
            Grid::from_vec(
                p.width(),
                p.height(),
                p.as_slice().iter().zip(q.as_slice()).map(|(x, y)| a * x + b * y).collect(),
            )
        };
        GradientField {
            gx: mix(&self.gx, &other.gx),
            gy: mix(&self.gy, &other.gy),
            mask: self.mask.iter().zip(&other.mask).map(|(p, q)| *p || *q).collect(),
            pitch: self.pitch,
        }
    }
}

/// Height field in mm (positive into the elastomer).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub depth: Grid,
    pub pitch: f64,
}

impl DepthMap {
    pub fn new(depth: Grid, pitch: f64) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::domain(format!("pixel pitch must be positive, got {pitch}")));
        }
        if depth.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("depth map contains non-finite values"));
        }
        Ok(Self { depth, pitch })
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn geometry(&self) -> FrameGeometry {
        FrameGeometry { width: self.width(), height: self.height(), pitch: self.pitch }
    }

    pub fn zero_mean(&self) -> DepthMap {
        let m = self.depth.mean();
        DepthMap { depth: self.depth.map(|v| v - m), pitch: self.pitch }
    }
}

fn check_extent(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || !width.is_multiple_of(FRAME_ALIGN) || !height.is_multiple_of(FRAME_ALIGN) {
        return Err(Error::domain(format!("frame size {width}x{height} must be a nonzero multiple of {FRAME_ALIGN}")));
    }
    Ok(())
}
