//! Simulated presses.
//!
//! A press is displacement-controlled: the indenter travels at constant speed
//! down to the press depth and stops. The series-spring split decides how much
//! of that travel the elastomer takes (`x2 = x_total k1 / (k1 + k2)`), the
//! imprint of depth `x2` is rendered, and the force follows `k_total v t`.

use serde::{Deserialize, Serialize};
use taxel_core::mechanics::{synth_force_sequence, ForceSequence, PressTrajectory, SpringModel};
use taxel_core::optics::{
    height_field, normals_from_height, render_with_noise, DepthMap, FrameGeometry, ImprintSpec, LightRig, Placement,
    ShapeKind, TactileFrame,
};

use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Sensor and press settings shared by every scenario of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub frame_width: usize,
    pub frame_height: usize,
    /// mm per pixel.
    pub pixel_pitch: f64,
    /// Cross-section area shared by every prism (mm²).
    pub prism_area: f64,
    /// Width of the prism rim ramp (pixels).
    pub rim_px: f64,
    /// Camera rate (Hz).
    pub frame_rate: f64,
    /// Force sampling interval (s).
    pub force_dt: f64,
    /// Press speed (mm/s).
    pub speed: f64,
    /// Elastomer stiffness `k2` (N/mm).
    pub elastomer_stiffness: f64,
    /// `N` in `k1 = N H` (N/mm per HA).
    pub hardness_scale: f64,
    pub hardness_range: [f64; 2],
    /// Linear-regime limit on total travel (mm).
    pub max_indentation: f64,
    /// Gaussian pixel noise sigma (image units); 0 disables.
    pub image_noise: f64,
    /// Gaussian force noise sigma as a fraction of the press peak; 0 disables.
    pub force_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            frame_width: 64,
            frame_height: 64,
            pixel_pitch: 0.08,
            prism_area: 5.0,
            rim_px: taxel_core::optics::DEFAULT_PRISM_RIM_PX,
            frame_rate: 10.0,
            force_dt: 0.05,
            speed: 0.5,
            elastomer_stiffness: 12.0,
            hardness_scale: taxel_core::mechanics::DEFAULT_HARDNESS_SCALE,
            hardness_range: [10.0, 80.0],
            max_indentation: taxel_core::mechanics::DEFAULT_MAX_INDENTATION,
            image_noise: 0.0,
            force_noise: 0.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        for (name, v) in [
            ("pixel_pitch", self.pixel_pitch),
            ("prism_area", self.prism_area),
            ("frame_rate", self.frame_rate),
            ("force_dt", self.force_dt),
            ("speed", self.speed),
            ("elastomer_stiffness", self.elastomer_stiffness),
            ("hardness_scale", self.hardness_scale),
            ("max_indentation", self.max_indentation),
        ] {
            positive(name, v)?;
        }
        if !(self.rim_px >= 0.0) {
            return Err(Error::config("rim_px must be nonnegative"));
        }
        let [lo, hi] = self.hardness_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config(format!("invalid hardness range [{lo}, {hi}]")));
        }
        if !(self.image_noise >= 0.0 && self.force_noise >= 0.0) {
            return Err(Error::config("noise levels must be nonnegative"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.frame_width, self.frame_height, self.pixel_pitch)
            .map_err(|e| Error::config(format!("frame geometry: {e}")))
    }

    pub fn scenario(&self, shape: ShapeKind, hardness: f64, press_depth: f64) -> PressScenario {
        PressScenario {
            shape,
            hardness,
            elastomer_stiffness: self.elastomer_stiffness,
            hardness_scale: self.hardness_scale,
            speed: self.speed,
            press_depth,
            placement: Placement::default(),
            seed: 0,
        }
    }
}

/// Ground truth for one simulated touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressScenario {
    pub shape: ShapeKind,
    /// Shore A hardness (HA).
    pub hardness: f64,
    /// `k2` (N/mm).
    pub elastomer_stiffness: f64,
    /// `N` (N/mm per HA).
    pub hardness_scale: f64,
    /// Press speed (mm/s).
    pub speed: f64,
    /// Maximum total displacement (mm).
    pub press_depth: f64,
    pub placement: Placement,
    pub seed: u64,
}

impl PressScenario {
    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn spring(&self) -> Result<SpringModel> {
        Ok(SpringModel::from_hardness(self.hardness, self.elastomer_stiffness, self.hardness_scale)?)
    }

    /// Object stiffness `k1 = N H` (N/mm).
    pub fn object_stiffness(&self) -> f64 {
        self.hardness_scale * self.hardness
    }

    /// Press duration from contact onset to the press depth (s).
    pub fn duration(&self) -> f64 {
        self.press_depth / self.speed
    }

    /// Elastomer imprint depth at the end of the press (mm).
    pub fn final_imprint(&self) -> Result<f64> {
        Ok(self.press_depth * self.spring()?.elastomer_share())
    }

    pub fn imprint_spec(&self, sim: &SimConfig) -> ImprintSpec {
        let mut spec = ImprintSpec::prism(self.shape, sim.prism_area).placed(self.placement);
        spec.rim_px = sim.rim_px;
        spec
    }

    fn validate(&self, sim: &SimConfig) -> Result<()> {
        let [lo, hi] = sim.hardness_range;
        if !(self.hardness >= lo && self.hardness <= hi) {
            return Err(Error::Core(taxel_core::Error::Domain(format!(
                "hardness {} HA outside the configured range [{lo}, {hi}]",
                self.hardness
            ))));
        }
        if !(self.press_depth > 0.0 && self.speed > 0.0) {
            return Err(Error::Core(taxel_core::Error::Domain("press depth and speed must be positive".into())));
        }
        Ok(())
    }
}

/// Time-ordered frames `IM.1 .. IM.n` of one press plus the non-contact reference.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWindow {
    pub frames: Vec<TactileFrame>,
    pub times: Vec<f64>,
    pub reference: TactileFrame,
}

impl FrameWindow {
    pub fn new(frames: Vec<TactileFrame>, times: Vec<f64>, reference: TactileFrame) -> Result<Self> {
        let w = Self { frames, times, reference };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        let domain = |m: String| Error::Core(taxel_core::Error::Domain(m));
        if self.frames.len() < 2 {
            return Err(domain(format!("a frame window needs at least 2 frames, got {}", self.frames.len())));
        }
        if self.frames.len() != self.times.len() {
            return Err(domain("one timestamp per frame required".into()));
        }
        if self.times.windows(2).any(|t| !(t[1] > t[0])) {
            return Err(domain("frame timestamps must increase strictly".into()));
        }
        if self.frames.iter().any(|f| !f.same_geometry(&self.reference)) {
            return Err(domain("frames and reference differ in size".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame interval (s).
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Frames feeding the two streams.
#[derive(Debug, Clone, Copy)]
pub struct FrameSelection<'a> {
    /// `(IM.1, IM.n)`.
    pub external: (&'a TactileFrame, &'a TactileFrame),
    /// Every frame of the window in time order.
    pub internal: &'a [TactileFrame],
    pub times: &'a [f64],
}

pub fn select_frames(w: &FrameWindow) -> Result<FrameSelection<'_>> {
    w.validate()?;
    Ok(FrameSelection { external: (&w.frames[0], &w.frames[w.frames.len() - 1]), internal: &w.frames, times: &w.times })
}

/// Everything one press produces.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub window: FrameWindow,
    pub force: ForceSequence,
    /// Ground-truth imprint at the end of the press.
    pub depth: DepthMap,
    /// Elastomer imprint depth at each frame (mm).
    pub imprint: Vec<f64>,
}

/// Seed streams drawn from a scenario seed.
const FORCE_NOISE_STREAM: u64 = 1;
const IMAGE_NOISE_STREAM: u64 = 2;

pub fn simulate_press(s: &PressScenario, sim: &SimConfig) -> Result<Simulation> {
    sim.validate()?;
    s.validate(sim)?;
    let spring = s.spring()?;
    let geom = sim.geometry()?;
    let spec = s.imprint_spec(sim);
    let rig = LightRig::default();

    let force_steps = (s.press_depth / (s.speed * sim.force_dt)).round() as usize + 1;
    let traj = PressTrajectory {
        speed: s.speed,
        dt: sim.force_dt,
        n_steps: force_steps,
        stop_depth: Some(s.press_depth),
        max_indentation: sim.max_indentation,
    }
    .with_max_indentation(sim.max_indentation)?;
    let mut force = synth_force_sequence(&spring, &traj);
    if sim.force_noise > 0.0 {
        force = force.with_noise(sim.force_noise, derive_seed(s.seed, FORCE_NOISE_STREAM))?;
    }

    let frame_dt = 1.0 / sim.frame_rate;
    let n_frames = ((s.duration() / frame_dt).round() as usize + 1).max(2);
    let image_seed = derive_seed(s.seed, IMAGE_NOISE_STREAM);
    let mut frames = Vec::with_capacity(n_frames);
    let mut times = Vec::with_capacity(n_frames);
    let mut imprint = Vec::with_capacity(n_frames);
    let mut last_depth = None;
    for k in 0..n_frames {
        let t = k as f64 * frame_dt;
        let x2 = (s.speed * t).min(s.press_depth) * spring.elastomer_share();
        let d = height_field(&spec, x2, &geom)?;
        let (frame, _) =
            render_with_noise(&normals_from_height(&d), &rig, sim.image_noise, derive_seed(image_seed, k as u64))?;
        frames.push(frame);
        times.push(t);
        imprint.push(x2);
        last_depth = Some(d);
    }
    let (reference, _) = render_with_noise(
        &normals_from_height(&height_field(&spec, 0.0, &geom)?),
        &rig,
        sim.image_noise,
        derive_seed(image_seed, 0),
    )?;
    let window = FrameWindow::new(frames, times, reference)?;
    Ok(Simulation { window, force, depth: last_depth.expect("at least two frames"), imprint })
}
