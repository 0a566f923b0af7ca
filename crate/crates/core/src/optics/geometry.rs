use serde::{Deserialize, Serialize};

use super::{check_extent, DepthMap};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Rim width for prism imprints, in pixels.
pub const DEFAULT_PRISM_RIM_PX: f64 = 6.0;
/// Rim width for sphere imprints, in pixels.
pub const DEFAULT_SPHERE_RIM_PX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: usize,
    pub height: usize,
    /// mm per pixel
    pub pitch: f64,
}

impl FrameGeometry {
    pub fn new(width: usize, height: usize, pitch: f64) -> Result<Self> {
        check_extent(width, height)?;
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::domain(format!("pixel pitch must be positive, got {pitch}")));
        }
        Ok(Self { width, height, pitch })
    }

    /// Physical coordinates (mm) of a pixel center, origin at the frame center.
    pub fn pixel_xy(&self, row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 + 0.5 - self.width as f64 / 2.0) * self.pitch;
        let y = (row as f64 + 0.5 - self.height as f64 / 2.0) * self.pitch;
        (x, y)
    }

    fn half_extent(&self) -> (f64, f64) {
        (self.width as f64 * self.pitch / 2.0, self.height as f64 * self.pitch / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
    TShape,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle, ShapeKind::TShape];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
            ShapeKind::TShape => "t-shape",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Indenter {
    /// Sphere of radius `radius` (mm); contact radius follows `sqrt(R Z)`.
    Sphere { radius: f64 },
    /// Flat-ended prism with the given cross-section area (mm²).
    Prism { kind: ShapeKind, area: f64 },
}

/// In-plane offset (mm, from frame center) and rotation (rad) of the indenter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Placement {
    pub dx: f64,
    pub dy: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprintSpec {
    pub indenter: Indenter,
    pub placement: Placement,
    /// Width of the smoothing rim in pixels.
    pub rim_px: f64,
}

impl ImprintSpec {
    pub fn sphere(radius: f64) -> Self {
        Self { indenter: Indenter::Sphere { radius }, placement: Placement::default(), rim_px: DEFAULT_SPHERE_RIM_PX }
    }

    pub fn prism(kind: ShapeKind, area: f64) -> Self {
        Self { indenter: Indenter::Prism { kind, area }, placement: Placement::default(), rim_px: DEFAULT_PRISM_RIM_PX }
    }

    pub fn placed(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }
}

/// Raised-cosine step: 0 at `u <= 0`, 1 at `u >= 1`.
fn cosine_ramp(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    0.5 * (1.0 - (std::f64::consts::PI * u).cos())
}

/// Cross-section polygon (counter-clockwise, centered) for a prism of the given area.
fn prism_polygon(kind: ShapeKind, area: f64) -> Option<Vec<(f64, f64)>> {
    match kind {
        ShapeKind::Circle => None,
        ShapeKind::Square => {
            let h = area.sqrt() / 2.0;
            Some(vec![(-h, -h), (h, -h), (h, h), (-h, h)])
        }
        ShapeKind::Triangle => {
            let side = (4.0 * area / 3f64.sqrt()).sqrt();
            let circum = side / 3f64.sqrt();
            Some(
                [90.0_f64, 210.0, 330.0]
                    .iter()
                    .map(|deg| {
                        let a = deg.to_radians();
                        (circum * a.cos(), circum * a.sin())
                    })
                    .collect(),
            )
        }
        ShapeKind::TShape => {
            // 3u-wide, u-tall bar on a u-wide, 2u-tall stem: area 5u²
            let u = (area / 5.0).sqrt();
            Some(vec![
                (-0.5 * u, -1.5 * u),
                (0.5 * u, -1.5 * u),
                (0.5 * u, 0.5 * u),
                (1.5 * u, 0.5 * u),
                (1.5 * u, 1.5 * u),
                (-1.5 * u, 1.5 * u),
                (-1.5 * u, 0.5 * u),
                (-0.5 * u, 0.5 * u),
            ])
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let t = ((apx * abx + apy * aby) / (abx * abx + aby * aby)).clamp(0.0, 1.0);
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    (dx * dx + dy * dy).sqrt()
}

/// Distance from `p` to the polygon boundary; positive inside, negative outside.
fn polygon_inside_distance(p: (f64, f64), poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut inside = false;
    let mut dist = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        dist = dist.min(segment_distance(p, a, b));
        if (a.1 > p.1) != (b.1 > p.1) {
            let x_cross = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        dist
    } else {
        -dist
    }
}

/// Height field of an indenter pressed `imprint_depth` mm into the elastomer.
///
/// Prisms leave a flat-bottomed imprint of their cross-section; the raised
/// cosine rim lies inside the cross-section so the nonzero footprint is the
/// cross-section itself. Spheres follow the Hertz interior profile
/// `Z - ρ²/2R` out to the contact radius `sqrt(R Z)`, with the rim step
/// centered on that radius.
pub fn height_field(spec: &ImprintSpec, imprint_depth: f64, geom: &FrameGeometry) -> Result<DepthMap> {
    if !(imprint_depth >= 0.0 && imprint_depth.is_finite()) {
        return Err(Error::domain(format!("imprint depth must be nonnegative, got {imprint_depth}")));
    }
    if !(spec.rim_px >= 0.0) {
        return Err(Error::domain("rim width must be nonnegative"));
    }
    let rim = spec.rim_px * geom.pitch;
    let Placement { dx, dy, rotation } = spec.placement;
    let (cos_r, sin_r) = (rotation.cos(), rotation.sin());
    let local = |x: f64, y: f64| {
        let (px, py) = (x - dx, y - dy);
        (cos_r * px + sin_r * py, -sin_r * px + cos_r * py)
    };

    let extent = match spec.indenter {
        Indenter::Sphere { radius } => {
            if !(radius > 0.0) {
                return Err(Error::domain(format!("sphere radius must be positive, got {radius}")));
            }
            if imprint_depth > radius {
                return Err(Error::domain("imprint depth exceeds sphere radius"));
            }
            (radius * imprint_depth).sqrt() + rim / 2.0
        }
        Indenter::Prism { kind, area } => {
            if !(area > 0.0) {
                return Err(Error::domain(format!("cross-section area must be positive, got {area}")));
            }
            match prism_polygon(kind, area) {
                None => (area / std::f64::consts::PI).sqrt(),
                Some(poly) => poly.iter().map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max),
            }
        }
    };
    let (hx, hy) = geom.half_extent();
    if dx.abs() + extent > hx || dy.abs() + extent > hy {
        return Err(Error::domain(format!(
            "imprint of extent {extent:.3} mm at offset ({dx:.3}, {dy:.3}) does not fit a {:.3}x{:.3} mm frame",
            2.0 * hx,
            2.0 * hy
        )));
    }

    if imprint_depth == 0.0 {
        return DepthMap::new(Grid::zeros(geom.width, geom.height), geom.pitch);
    }

    let depth = match spec.indenter {
        Indenter::Sphere { radius } => {
            let contact = (radius * imprint_depth).sqrt();
            Grid::from_fn(geom.width, geom.height, |row, col| {
                let (x, y) = geom.pixel_xy(row, col);
                let rho = (x - dx).hypot(y - dy);
                let profile = (imprint_depth - rho * rho / (2.0 * radius)).max(0.0);
                let window = if rim > 0.0 {
                    cosine_ramp((contact + rim / 2.0 - rho) / rim)
                } else if rho <= contact {
                    1.0
                } else {
                    0.0
                };
                profile * window
            })
        }
        Indenter::Prism { kind, area } => {
            let poly = prism_polygon(kind, area);
            let radius = (area / std::f64::consts::PI).sqrt();
            Grid::from_fn(geom.width, geom.height, |row, col| {
                let (x, y) = geom.pixel_xy(row, col);
                let p = local(x, y);
                let inside = match &poly {
                    None => radius - p.0.hypot(p.1),
                    Some(poly) => polygon_inside_distance(p, poly),
                };
                if inside <= 0.0 {
                    0.0
                } else if rim > 0.0 {
                    imprint_depth * cosine_ramp(inside / rim)
                } else {
                    imprint_depth
                }
            })
        }
    };
    DepthMap::new(depth, geom.pitch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> FrameGeometry {
        FrameGeometry::new(128, 128, 0.05).unwrap()
    }

    fn nonzero(d: &DepthMap) -> usize {
        d.depth.as_slice().iter().filter(|v| **v > 0.0).count()
    }

    #[test]
    fn zero_depth_gives_flat_map() {
        for spec in [ImprintSpec::sphere(5.0), ImprintSpec::prism(ShapeKind::TShape, 4.0)] {
            let d = height_field(&spec, 0.0, &geom()).unwrap();
            assert!(d.depth.as_slice().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn sphere_footprint_tracks_hertz_radius() {
        let g = FrameGeometry::new(160, 160, 0.04).unwrap();
        let spec = ImprintSpec::sphere(5.0);
        let d = height_field(&spec, 0.8, &g).unwrap();
        let contact = (5.0f64 * 0.8).sqrt();
        let rim_tol = spec.rim_px * g.pitch / 2.0 / contact;
        // radius of the nonzero region from its pixel count
        let r = (nonzero(&d) as f64 * g.pitch * g.pitch / std::f64::consts::PI).sqrt();
        let expected = contact * (1.0 + rim_tol);
        assert!((r - expected).abs() < 1.5 * g.pitch, "r={r} expected={expected}");
        let (_, max) = d.depth.min_max();
        assert!((max - 0.8).abs() < 0.01);
    }

    #[test]
    fn equal_area_prisms_have_equal_footprints() {
        let g = geom();
        // an off-axis pose keeps straight edges from snapping to pixel rows
        let pose = Placement { dx: 0.013, dy: 0.021, rotation: 0.37 };
        let count = |kind| nonzero(&height_field(&ImprintSpec::prism(kind, 6.0).placed(pose), 0.5, &g).unwrap());
        let circle = count(ShapeKind::Circle);
        for kind in [ShapeKind::Square, ShapeKind::Triangle, ShapeKind::TShape] {
            let n = count(kind);
            let rel = (n as f64 - circle as f64).abs() / circle as f64;
            assert!(rel < 0.02, "{kind:?}: {n} vs circle {circle}");
        }
        // 6 mm² at 0.05 mm pitch is 2400 px
        assert!((circle as f64 - 2400.0).abs() / 2400.0 < 0.02);
    }

    #[test]
    fn prism_bottom_is_flat_at_full_depth() {
        let d = height_field(&ImprintSpec::prism(ShapeKind::Square, 9.0), 0.4, &geom()).unwrap();
        assert_eq!(d.depth[(64, 64)], 0.4);
        assert_eq!(d.depth[(0, 0)], 0.0);
    }

    #[test]
    fn oversized_or_offset_shapes_are_rejected() {
        let g = geom(); // 6.4 mm square
        assert!(height_field(&ImprintSpec::prism(ShapeKind::Square, 50.0), 0.5, &g).is_err());
        let off = ImprintSpec::prism(ShapeKind::Circle, 4.0).placed(Placement { dx: 2.5, dy: 0.0, rotation: 0.0 });
        assert!(height_field(&off, 0.5, &g).is_err());
        assert!(height_field(&ImprintSpec::sphere(5.0), 6.0, &g).is_err());
        assert!(height_field(&ImprintSpec::sphere(5.0), -0.1, &g).is_err());
    }

    #[test]
    fn rotation_preserves_footprint() {
        let g = geom();
        let spec = ImprintSpec::prism(ShapeKind::Triangle, 5.0);
        let a = nonzero(&height_field(&spec, 0.3, &g).unwrap()) as f64;
        let rotated = spec.placed(Placement { dx: 0.3, dy: -0.2, rotation: 0.4 });
        let b = nonzero(&height_field(&rotated, 0.3, &g).unwrap()) as f64;
        assert!((a - b).abs() / a < 0.02);
    }

    #[test]
    fn polygon_distance_signs() {
        let sq = prism_polygon(ShapeKind::Square, 4.0).unwrap();
        assert!((polygon_inside_distance((0.0, 0.0), &sq) - 1.0).abs() < 1e-12);
        assert!((polygon_inside_distance((2.0, 0.0), &sq) + 1.0).abs() < 1e-12);
    }
}
