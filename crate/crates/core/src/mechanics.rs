//! Series-spring press model and Hertzian contact geometry.
//!
//! The indenter drives the object (stiffness `k1`) and the sensor elastomer
//! (stiffness `k2`) in series at constant speed, so the measured force ramps
//! at `k_total * v` and the object stiffness can be recovered from the force
//! rate. Units throughout: mm, s, N, N/mm, Shore-A (HA).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hardness-to-stiffness constant `N` (N/mm per HA).
pub const DEFAULT_HARDNESS_SCALE: f64 = 0.2;
/// Upper bound of total indenter travel for which the linear springs are trusted (mm).
pub const DEFAULT_MAX_INDENTATION: f64 = 2.0;
/// Fraction of samples dropped at each end before averaging the force rate.
pub const DEFAULT_TRIM_FRACTION: f64 = 0.1;

/// Object and elastomer springs in series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringModel {
    /// Object stiffness `k1` (N/mm). May be `f64::INFINITY` for a rigid object.
    pub object: f64,
    /// Elastomer stiffness `k2` (N/mm).
    pub elastomer: f64,
    /// Hardness scale `N` (N/mm per HA).
    pub hardness_scale: f64,
}

impl SpringModel {
    pub fn new(object: f64, elastomer: f64) -> Result<Self> {
        Self::with_hardness_scale(object, elastomer, DEFAULT_HARDNESS_SCALE)
    }

    pub fn with_hardness_scale(object: f64, elastomer: f64, hardness_scale: f64) -> Result<Self> {
        for (name, k) in [("object stiffness", object), ("elastomer stiffness", elastomer)] {
            if !(k > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {k}")));
            }
        }
        if !(hardness_scale > 0.0 && hardness_scale.is_finite()) {
            return Err(Error::domain(format!("hardness scale must be positive, got {hardness_scale}")));
        }
        if !elastomer.is_finite() {
            return Err(Error::domain("elastomer stiffness must be finite"));
        }
        Ok(Self { object, elastomer, hardness_scale })
    }

    /// Object built from a Shore-A hardness via `k1 = N * H`.
    pub fn from_hardness(hardness: f64, elastomer: f64, hardness_scale: f64) -> Result<Self> {
        Self::with_hardness_scale(stiffness_from_hardness(hardness, hardness_scale)?, elastomer, hardness_scale)
    }

    pub fn total_stiffness(&self) -> f64 {
        if self.object.is_infinite() {
            return self.elastomer;
        }
        series_pair(self.object, self.elastomer)
    }

    /// Share of total travel taken up by the elastomer, `k1 / (k1 + k2)`.
    pub fn elastomer_share(&self) -> f64 {
        if self.object.is_infinite() {
            return 1.0;
        }
        self.object / (self.object + self.elastomer)
    }

    pub fn hardness(&self) -> f64 {
        self.object / self.hardness_scale
    }
}

fn series_pair(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Displacement-controlled press at constant speed, optionally holding once
/// `stop_depth` is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressTrajectory {
    /// Press speed `v` (mm/s).
    pub speed: f64,
    /// Sample interval (s).
    pub dt: f64,
    pub n_steps: usize,
    pub stop_depth: Option<f64>,
    /// Linear-regime limit on total travel (mm).
    pub max_indentation: f64,
}

impl PressTrajectory {
    pub fn new(speed: f64, dt: f64, n_steps: usize) -> Result<Self> {
        let traj = Self { speed, dt, n_steps, stop_depth: None, max_indentation: DEFAULT_MAX_INDENTATION };
        traj.validate()?;
        Ok(traj)
    }

    /// Press from contact onset down to `depth` and stop; samples cover the
    /// ramp inclusive of both ends.
    pub fn to_depth(speed: f64, dt: f64, depth: f64) -> Result<Self> {
        if !(depth > 0.0) {
            return Err(Error::domain(format!("press depth must be positive, got {depth}")));
        }
        if !(speed > 0.0 && dt > 0.0) {
            return Err(Error::domain("press speed and dt must be positive"));
        }
        let n_steps = (depth / (speed * dt)).round() as usize + 1;
        let traj = Self { speed, dt, n_steps, stop_depth: Some(depth), max_indentation: DEFAULT_MAX_INDENTATION };
        traj.validate()?;
        Ok(traj)
    }

    pub fn with_max_indentation(mut self, max_indentation: f64) -> Result<Self> {
        self.max_indentation = max_indentation;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::domain(format!("press speed must be positive, got {}", self.speed)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("sample interval must be positive, got {}", self.dt)));
        }
        if self.n_steps < 2 {
            return Err(Error::domain("a press needs at least 2 samples"));
        }
        let travel = self.total_displacement(self.n_steps - 1);
        if travel > self.max_indentation + 1e-12 {
            return Err(Error::domain(format!(
                "press travel {travel:.4} mm exceeds linear-regime limit {:.4} mm",
                self.max_indentation
            )));
        }
        Ok(())
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// `x_total` at sample `step` (mm).
    pub fn total_displacement(&self, step: usize) -> f64 {
        let x = self.speed * self.time(step);
        match self.stop_depth {
            Some(stop) => x.min(stop),
            None => x,
        }
    }

    /// `(x1, x2)`: object and elastomer compression at sample `step`.
    pub fn compressions(&self, model: &SpringModel, step: usize) -> (f64, f64) {
        let total = self.total_displacement(step);
        let x2 = total * model.elastomer_share();
        (total - x2, x2)
    }
}

/// Uniformly sampled force record starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSequence {
    dt: f64,
    forces: Vec<f64>,
}

impl ForceSequence {
    pub fn new(dt: f64, forces: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("force sample interval must be positive, got {dt}")));
        }
        if forces.len() < 2 {
            return Err(Error::domain("a force sequence needs at least 2 samples"));
        }
        if forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::domain("force samples must be finite"));
        }
        Ok(Self { dt, forces })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn forces(&self) -> &[f64] {
        &self.forces
    }

    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.forces.len() - 1) as f64 * self.dt
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.forces.iter().enumerate().map(|(i, &f)| (i as f64 * self.dt, f))
    }

    pub fn peak(&self) -> f64 {
        self.forces.iter().fold(0.0_f64, |m, f| m.max(f.abs()))
    }

    /// Additive Gaussian noise with standard deviation `fraction * peak`.
    pub fn with_noise(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction >= 0.0 && fraction.is_finite()) {
            return Err(Error::domain(format!("noise fraction must be nonnegative, got {fraction}")));
        }
        if fraction == 0.0 {
            return Ok(self.clone());
        }
        let sigma = fraction * self.peak();
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forces = self.forces.iter().map(|f| f + normal.sample(&mut rng)).collect();
        Ok(Self { dt: self.dt, forces })
    }
}

/// Indenting sphere of radius `radius` pressed to `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HertzContact {
    pub radius: f64,
    pub depth: f64,
}

impl HertzContact {
    pub fn new(radius: f64, depth: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("sphere radius must be positive, got {radius}")));
        }
        if !(0.0..=radius).contains(&depth) {
            return Err(Error::domain(format!("indentation depth {depth} outside [0, {radius}]")));
        }
        Ok(Self { radius, depth })
    }
}

/// Theoretical vs measured projected contact area (mm²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconEval {
    pub theoretical: f64,
    pub measured: f64,
}

impl ReconEval {
    pub fn new(theoretical: f64, measured: f64) -> Result<Self> {
        if !(theoretical >= 0.0 && measured >= 0.0) {
            return Err(Error::domain("projected areas must be nonnegative"));
        }
        Ok(Self { theoretical, measured })
    }
}

/// Total stiffness of springs in series, `(Σ 1/k_i)^-1`.
pub fn series_stiffness(ks: &[f64]) -> Result<f64> {
    if ks.is_empty() {
        return Err(Error::domain("series stiffness of an empty spring list"));
    }
    let mut compliance = 0.0;
    for &k in ks {
        if !(k > 0.0) {
            return Err(Error::domain(format!("spring stiffness must be positive, got {k}")));
        }
        compliance += 1.0 / k;
    }
    Ok(1.0 / compliance)
}

/// Solves `1/k1 = 1/k_total - 1/k2` for the object stiffness.
pub fn object_stiffness(k_total: f64, k2: f64) -> Result<f64> {
    if !(k_total > 0.0) || !(k2 > 0.0) {
        return Err(Error::domain(format!("stiffnesses must be positive (k_total={k_total}, k2={k2})")));
    }
    if k_total >= k2 {
        return Err(Error::Infeasible { k_total, k2 });
    }
    Ok(1.0 / (1.0 / k_total - 1.0 / k2))
}

/// Noise-free force record `F(t) = k_total * x_total(t)`.
pub fn synth_force_sequence(model: &SpringModel, traj: &PressTrajectory) -> ForceSequence {
    let k_total = model.total_stiffness();
    let forces = (0..traj.n_steps).map(|i| k_total * traj.total_displacement(i)).collect();
    ForceSequence { dt: traj.dt, forces }
}

/// `dF/dt` by central differences, one-sided at the ends.
pub fn force_gradient(seq: &ForceSequence) -> Result<Vec<f64>> {
    let f = &seq.forces;
    let n = f.len();
    if n < 3 {
        return Err(Error::domain(format!("force gradient needs at least 3 samples, got {n}")));
    }
    let dt = seq.dt;
    let mut g = Vec::with_capacity(n);
    g.push((f[1] - f[0]) / dt);
    for i in 1..n - 1 {
        g.push((f[i + 1] - f[i - 1]) / (2.0 * dt));
    }
    g.push((f[n - 1] - f[n - 2]) / dt);
    Ok(g)
}

/// Series stiffness from the mean force rate over the trimmed interior window.
pub fn infer_total_stiffness(seq: &ForceSequence, speed: f64, trim_fraction: f64) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::domain(format!("press speed must be positive, got {speed}")));
    }
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::domain(format!("trim fraction must be in [0, 0.5), got {trim_fraction}")));
    }
    let g = force_gradient(seq)?;
    let n = g.len();
    let cut = (n as f64 * trim_fraction).floor() as usize;
    let window = &g[cut..n - cut];
    let rate = window.iter().sum::<f64>() / window.len() as f64;
    Ok(rate / speed)
}

/// Object stiffness `k1` recovered from a monotone press record.
pub fn infer_stiffness(seq: &ForceSequence, speed: f64, k2: f64) -> Result<f64> {
    infer_stiffness_trimmed(seq, speed, k2, DEFAULT_TRIM_FRACTION)
}

pub fn infer_stiffness_trimmed(seq: &ForceSequence, speed: f64, k2: f64, trim_fraction: f64) -> Result<f64> {
    let k_total = infer_total_stiffness(seq, speed, trim_fraction)?;
    object_stiffness(k_total, k2)
}

/// Shore-A hardness `H = k1 / N`.
pub fn hardness_from_stiffness(k1: f64, hardness_scale: f64) -> Result<f64> {
    if !(hardness_scale > 0.0) {
        return Err(Error::domain(format!("hardness scale must be positive, got {hardness_scale}")));
    }
    Ok(k1 / hardness_scale)
}

/// Inverse of [`hardness_from_stiffness`]: `k1 = N * H`.
pub fn stiffness_from_hardness(hardness: f64, hardness_scale: f64) -> Result<f64> {
    if !(hardness_scale > 0.0) {
        return Err(Error::domain(format!("hardness scale must be positive, got {hardness_scale}")));
    }
    Ok(hardness_scale * hardness)
}

/// Projected contact radius `r = sqrt(R Z)`.
pub fn hertz_radius(c: &HertzContact) -> f64 {
    (c.radius * c.depth).sqrt()
}

/// Projected contact area `S_A = π R Z`.
pub fn hertz_area(c: &HertzContact) -> f64 {
    std::f64::consts::PI * c.radius * c.depth
}
