use serde::{Deserialize, Serialize};
use taxel_nn::{Error, Network, Result, Tensor};

use crate::arch::FEATURE_DIM;

/// Which stream features reach the fusion gate. A missing stream enters as
/// a zero vector so every variant keeps the same capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    #[default]
    Fused,
    GeometryOnly,
    ForceOnly,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Fused, Modality::GeometryOnly, Modality::ForceOnly];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Fused => "fused",
            Modality::GeometryOnly => "geometry-only",
            Modality::ForceOnly => "force-only",
        }
    }

    pub fn uses_depth(self) -> bool {
        self != Modality::ForceOnly
    }

    pub fn uses_force(self) -> bool {
        self != Modality::GeometryOnly
    }
}

/// Replaces the learned gate output; used to probe the fusion endpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOverride {
    Learned,
    Ones,
    Zeros,
    Fixed(Vec<f64>),
}

fn check_feature(name: &str, v: &Tensor) -> Result<()> {
    if v.shape() != [FEATURE_DIM] {
        return Err(Error::Config(format!("{name} must have shape [{FEATURE_DIM}], got {:?}", v.shape())));
    }
    Ok(())
}

pub(crate) fn concat(g: &Tensor, f: &Tensor) -> Tensor {
    let mut v = g.data().to_vec();
    v.extend_from_slice(f.data());
    Tensor::from_vec(v)
}

/// `w ⊙ g + (1 - w) ⊙ f`.
pub fn combine(g: &Tensor, f: &Tensor, w: &Tensor) -> Tensor {
    let joint = g.data().iter().zip(f.data()).zip(w.data()).map(|((g, f), w)| w * g + (1.0 - w) * f).collect();
    Tensor::from_vec(joint)
}

/// Gated convex combination of the geometry feature `g` and force feature `f`.
/// Returns `(joint, w)`.
pub fn attention_fuse(gate: &Network, g: &Tensor, f: &Tensor) -> Result<(Tensor, Tensor)> {
    check_feature("geometry feature", g)?;
    check_feature("force feature", f)?;
    let w = gate.infer(&concat(g, f))?;
    Ok((combine(g, f, &w), w))
}

pub(crate) fn override_weights(o: &GateOverride) -> Result<Option<Tensor>> {
    Ok(match o {
        GateOverride::Learned => None,
        GateOverride::Ones => Some(Tensor::from_vec(vec![1.0; FEATURE_DIM])),
        GateOverride::Zeros => Some(Tensor::from_vec(vec![0.0; FEATURE_DIM])),
        GateOverride::Fixed(w) if w.len() == FEATURE_DIM => Some(Tensor::from_vec(w.clone())),
        GateOverride::Fixed(w) => {
            return Err(Error::Config(format!("gate override needs {FEATURE_DIM} weights, got {}", w.len())))
        }
    })
}
