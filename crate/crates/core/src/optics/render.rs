use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DepthMap, GradientField, TactileFrame};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Standard deviation of the optional pixel noise (image units).
pub const DEFAULT_NOISE_SIGMA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    /// Unit vector pointing from the surface toward the light.
    pub direction: [f64; 3],
    pub emission: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRig {
    pub lights: [DirectionalLight; 3],
    pub ambient: [f64; 3],
    pub albedo: f64,
}

impl Default for LightRig {
    /// Red, green and blue lights at azimuths 0°/120°/240° and 45° elevation.
    fn default() -> Self {
        let emissions = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        Self::ring(45f64.to_radians(), emissions, [0.25; 3], 0.6).expect("default rig is valid")
    }
}

impl LightRig {
    /// Three lights evenly spaced in azimuth starting at 0°, all at `elevation`.
    pub fn ring(elevation: f64, emissions: [[f64; 3]; 3], ambient: [f64; 3], albedo: f64) -> Result<Self> {
        let light = |k: usize| {
            let az = (120.0 * k as f64).to_radians();
            DirectionalLight {
                direction: [elevation.cos() * az.cos(), elevation.cos() * az.sin(), elevation.sin()],
                emission: emissions[k],
            }
        };
        let rig = Self { lights: [light(0), light(1), light(2)], ambient, albedo };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.lights.iter().enumerate() {
            let n = l.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("light {i} direction is not unit length")));
            }
        }
        let azimuths: Vec<f64> = self.lights.iter().map(|l| l.direction[1].atan2(l.direction[0])).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                if (azimuths[i] - azimuths[j]).abs() < 1e-6 {
                    return Err(Error::domain("light azimuths must be distinct"));
                }
            }
        }
        if !(self.albedo >= 0.0) {
            return Err(Error::domain("albedo must be nonnegative"));
        }
        Ok(())
    }

    /// Unclamped RGB radiance for slopes `(gx, gy)`.
    pub fn shade(&self, gx: f64, gy: f64) -> [f64; 3] {
        let inv = 1.0 / (gx * gx + gy * gy + 1.0).sqrt();
        let n = [-gx * inv, -gy * inv, inv];
        let mut out = self.ambient;
        for l in &self.lights {
            let cos = (n[0] * l.direction[0] + n[1] * l.direction[1] + n[2] * l.direction[2]).max(0.0);
            for (o, e) in out.iter_mut().zip(l.emission) {
                *o += self.albedo * e * cos;
            }
        }
        out
    }
}

/// Saturation statistics of one render.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RenderReport {
    pub clamped_values: usize,
    pub total_values: usize,
}

impl RenderReport {
    pub fn saturation_fraction(&self) -> f64 {
        if self.total_values == 0 {
            0.0
        } else {
            self.clamped_values as f64 / self.total_values as f64
        }
    }
}

/// Surface slopes by central differences (one-sided at the borders).
///
/// The mask marks deformed pixels and their immediate neighbourhood: depth
/// above zero or any nonzero slope.
pub fn normals_from_height(d: &DepthMap) -> GradientField {
    let (w, h) = (d.width(), d.height());
    let z = &d.depth;
    let step = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * d.pitch);
    let gx = Grid::from_fn(w, h, |r, c| match (c, w) {
        (_, 1) => 0.0,
        (0, _) => step(z[(r, 0)], z[(r, 1)], 1),
        (c, w) if c == w - 1 => step(z[(r, c - 1)], z[(r, c)], 1),
        (c, _) => step(z[(r, c - 1)], z[(r, c + 1)], 2),
    });
    let gy = Grid::from_fn(w, h, |r, c| match (r, h) {
        (_, 1) => 0.0,
        (0, _) => step(z[(0, c)], z[(1, c)], 1),
        (r, h) if r == h - 1 => step(z[(r - 1, c)], z[(r, c)], 1),
        (r, _) => step(z[(r - 1, c)], z[(r + 1, c)], 2),
    });
    let mask =
        (0..w * h).map(|i| z.as_slice()[i] > 0.0 || gx.as_slice()[i] != 0.0 || gy.as_slice()[i] != 0.0).collect();
    GradientField { gx, gy, mask, pitch: d.pitch }
}

/// Lambertian three-light rendering of a gradient field.
pub fn render(g: &GradientField, rig: &LightRig) -> Result<(TactileFrame, RenderReport)> {
    render_inner(g, rig, None)
}

/// [`render`] followed by seeded additive Gaussian pixel noise.
pub fn render_with_noise(
    g: &GradientField,
    rig: &LightRig,
    sigma: f64,
    seed: u64,
) -> Result<(TactileFrame, RenderReport)> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return render_inner(g, rig, None);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    render_inner(g, rig, Some((normal, ChaCha8Rng::seed_from_u64(seed))))
}

fn render_inner(
    g: &GradientField,
    rig: &LightRig,
    mut noise: Option<(Normal<f64>, ChaCha8Rng)>,
) -> Result<(TactileFrame, RenderReport)> {
    let n = g.gx.len();
    let mut pixels = Vec::with_capacity(n * 3);
    let mut report = RenderReport { clamped_values: 0, total_values: n * 3 };
    for (&gx, &gy) in g.gx.as_slice().iter().zip(g.gy.as_slice()) {
        for mut v in rig.shade(gx, gy) {
            if let Some((dist, rng)) = noise.as_mut() {
                v += dist.sample(rng);
            }
            if !(0.0..=1.0).contains(&v) {
                report.clamped_values += 1;
            }
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    let frame = TactileFrame::new(g.width(), g.height(), g.pitch, pixels)?;
    Ok((frame, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::FrameGeometry;

    fn geom() -> FrameGeometry {
        FrameGeometry::new(64, 64, 0.1).unwrap()
    }

    #[test]
    fn constant_and_affine_maps() {
        let g = geom();
        let flat = DepthMap::new(Grid::from_fn(64, 64, |_, _| 0.3), g.pitch).unwrap();
        let f = normals_from_height(&flat);
        assert!(f.gx.as_slice().iter().chain(f.gy.as_slice()).all(|v| *v == 0.0));

        let (a, b) = (0.2, -0.35);
        let plane = DepthMap::new(
            Grid::from_fn(64, 64, |r, c| {
                let (x, y) = g.pixel_xy(r, c);
                a * x + b * y
            }),
            g.pitch,
        )
        .unwrap();
        let f = normals_from_height(&plane);
        for r in 1..63 {
            for c in 1..63 {
                assert!((f.gx[(r, c)] - a).abs() < 1e-12);
                assert!((f.gy[(r, c)] - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn paraboloid_gradient_is_second_order() {
        // depth = κ (x² + y²): central differences are exact for quadratics
        // in the interior, so the error is only roundoff here; the borders use
        // one-sided steps with O(pitch) error.
        let kappa = 0.4;
        for (n, pitch) in [(64usize, 0.1), (128, 0.05)] {
            let g = FrameGeometry::new(n, n, pitch).unwrap();
            let d = DepthMap::new(
                Grid::from_fn(n, n, |r, c| {
                    let (x, y) = g.pixel_xy(r, c);
                    kappa * (x * x + y * y)
                }),
                pitch,
            )
            .unwrap();
            let f = normals_from_height(&d);
            let mut worst: f64 = 0.0;
            for r in 1..n - 1 {
                for c in 1..n - 1 {
                    let (x, y) = g.pixel_xy(r, c);
                    worst = worst.max((f.gx[(r, c)] - 2.0 * kappa * x).abs());
                    worst = worst.max((f.gy[(r, c)] - 2.0 * kappa * y).abs());
                }
            }
            assert!(worst <= pitch * pitch, "worst {worst} at pitch {pitch}");
        }
    }

    #[test]
    fn flat_field_renders_uniform_reference() {
        let (frame, report) = render(&GradientField::zeros(&geom()), &LightRig::default()).unwrap();
        let first = frame.rgb(0, 0);
        assert!((0..64).all(|r| (0..64).all(|c| frame.rgb(r, c) == first)));
        assert_eq!(report.saturation_fraction(), 0.0);
    }

    #[test]
    fn render_is_deterministic() {
        let mut g = GradientField::zeros(&geom());
        for (i, v) in g.gx.as_mut_slice().iter_mut().enumerate() {
            *v = ((i % 17) as f64 - 8.0) * 0.04;
        }
        let rig = LightRig::default();
        assert_eq!(render(&g, &rig).unwrap().0, render(&g, &rig).unwrap().0);
        let a = render_with_noise(&g, &rig, DEFAULT_NOISE_SIGMA, 11).unwrap().0;
        let b = render_with_noise(&g, &rig, DEFAULT_NOISE_SIGMA, 11).unwrap().0;
        let c = render_with_noise(&g, &rig, DEFAULT_NOISE_SIGMA, 12).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tilting_toward_red_raises_red() {
        // red light sits at azimuth 0 (+x); the normal (-gx, -gy, 1) leans
        // toward it as gx decreases
        let rig = LightRig::default();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=40 {
            let gx = -(k as f64) * 0.025;
            let red = rig.shade(gx, 0.0)[0].clamp(0.0, 1.0);
            assert!(red > last || red == 1.0, "red not increasing at gx={gx}");
            last = red;
        }
    }

    #[test]
    fn default_rig_never_saturates_in_slope_range() {
        let rig = LightRig::default();
        for i in -20..=20 {
            for j in -20..=20 {
                let (gx, gy) = (i as f64 * 0.025, j as f64 * 0.025);
                if gx.hypot(gy) <= 0.5 {
                    assert!(rig.shade(gx, gy).iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }
}
