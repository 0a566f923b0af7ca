use serde::{Deserialize, Serialize};
use taxel_nn::{softmax, Adam, AdamHyper, Error, Network, Result, Tape, Tensor};

use crate::arch::{self, FEATURE_DIM};
use crate::fusion::{combine, concat, override_weights, GateOverride, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStreamConfig {
    pub depth_height: usize,
    pub depth_width: usize,
    /// Force window length `T`.
    pub window: usize,
    pub classes: usize,
    pub modality: Modality,
}

/// Depth encoder, force encoder, fusion gate and classifier head.
#[derive(Debug, Clone)]
pub struct TwoStreamModel {
    config: TwoStreamConfig,
    depth: Network,
    force: Network,
    gate: Network,
    head: Network,
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub g: Tensor,
    pub f: Tensor,
    pub weights: Tensor,
    pub joint: Tensor,
    pub logits: Tensor,
    pub probs: Vec<f64>,
}

#[derive(Debug)]
pub struct ModelTape {
    depth: Option<Tape>,
    force: Option<Tape>,
    gate: Option<Tape>,
    head: Tape,
    g: Tensor,
    f: Tensor,
    weights: Tensor,
}

/// Parameter gradients per network in the order depth, force, gate, head,
/// plus the gradients with respect to both inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub params: [Vec<Tensor>; 4],
    pub depth_input: Tensor,
    pub force_input: Tensor,
}

impl ModelGrads {
    pub fn accumulate(&mut self, other: &ModelGrads) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            for (x, y) in a.iter_mut().zip(b) {
                x.add_assign(y);
            }
        }
        self.depth_input.add_assign(&other.depth_input);
        self.force_input.add_assign(&other.force_input);
    }

    pub fn scale(&mut self, s: f64) {
        self.params.iter_mut().flatten().for_each(|t| t.scale(s));
        self.depth_input.scale(s);
        self.force_input.scale(s);
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().flatten().all(Tensor::all_finite)
    }
}

/// Shape check for a stream whose encoder is skipped.
fn check_shape(net: &Network, x: &Tensor) -> Result<()> {
    if x.shape() != net.input_shape() {
        return Err(Error::Config(format!(
            "{} expects input shape {:?}, got {:?}",
            net.name(),
            net.input_shape(),
            x.shape()
        )));
    }
    Ok(())
}

fn zeros_like(net: &Network) -> Vec<Tensor> {
    net.params().iter().map(|p| Tensor::zeros(p.shape())).collect()
}

impl TwoStreamModel {
    pub fn new(config: TwoStreamConfig, seed: u64) -> Result<Self> {
        let depth = Network::new(arch::depth_encoder(config.depth_height, config.depth_width)?, seed)?;
        let force = Network::new(arch::force_encoder(config.window)?, seed.wrapping_add(1))?;
        let gate = Network::new(arch::fusion_gate(), seed.wrapping_add(2))?;
        let head = Network::new(arch::classifier(config.classes)?, seed.wrapping_add(3))?;
        Ok(Self { config, depth, force, gate, head })
    }

    /// Reassembles a model from networks whose specs must match `config`.
    pub fn from_networks(config: TwoStreamConfig, networks: [Network; 4]) -> Result<Self> {
        let [depth, force, gate, head] = networks;
        let expected = [
            arch::depth_encoder(config.depth_height, config.depth_width)?,
            arch::force_encoder(config.window)?,
            arch::fusion_gate(),
            arch::classifier(config.classes)?,
        ];
        for (net, spec) in [&depth, &force, &gate, &head].into_iter().zip(&expected) {
            if net.spec() != spec {
                return Err(Error::Config(format!("network {} does not match the model configuration", net.name())));
            }
        }
        Ok(Self { config, depth, force, gate, head })
    }

    pub fn config(&self) -> &TwoStreamConfig {
        &self.config
    }

    pub fn networks(&self) -> [&Network; 4] {
        [&self.depth, &self.force, &self.gate, &self.head]
    }

    pub fn into_networks(self) -> [Network; 4] {
        [self.depth, self.force, self.gate, self.head]
    }

    pub fn depth_encoder(&self) -> &Network {
        &self.depth
    }

    pub fn force_encoder(&self) -> &Network {
        &self.force
    }

    pub fn gate(&self) -> &Network {
        &self.gate
    }

    pub fn head(&self) -> &Network {
        &self.head
    }

    /// Mutable access to the classifier head; other networks stay frozen.
    pub fn head_mut(&mut self) -> &mut Network {
        &mut self.head
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|n| n.param_count()).sum()
    }

    pub fn forward(&self, depth: &Tensor, force: &Tensor) -> Result<(Forward, ModelTape)> {
        self.forward_with_gate(depth, force, &GateOverride::Learned)
    }

    pub fn forward_with_gate(
        &self,
        depth: &Tensor,
        force: &Tensor,
        gate: &GateOverride,
    ) -> Result<(Forward, ModelTape)> {
        let modality = self.config.modality;
        let zero = || Tensor::zeros(&[FEATURE_DIM]);
        let (g, depth_tape) = if modality.uses_depth() {
            let (g, t) = self.depth.forward(depth)?;
            (g, Some(t))
        } else {
            check_shape(&self.depth, depth)?;
            (zero(), None)
        };
        let (f, force_tape) = if modality.uses_force() {
            let (f, t) = self.force.forward(force)?;
            (f, Some(t))
        } else {
            check_shape(&self.force, force)?;
            (zero(), None)
        };
        let (weights, gate_tape) = match override_weights(gate)? {
            Some(w) => (w, None),
            None => {
                let (w, t) = self.gate.forward(&concat(&g, &f))?;
                (w, Some(t))
            }
        };
        let joint = combine(&g, &f, &weights);
        let (logits, head_tape) = self.head.forward(&joint)?;
        let probs = softmax(logits.data());
        let tape = ModelTape {
            depth: depth_tape,
            force: force_tape,
            gate: gate_tape,
            head: head_tape,
            g: g.clone(),
            f: f.clone(),
            weights: weights.clone(),
        };
        Ok((Forward { g, f, weights, joint, logits, probs }, tape))
    }

    /// Class probabilities.
    pub fn predict(&self, depth: &Tensor, force: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(depth, force)?.0.probs)
    }

    /// Backpropagates a gradient with respect to the logits.
    pub fn backward(&self, tape: ModelTape, dlogits: &Tensor) -> Result<ModelGrads> {
        let head = self.head.backward(tape.head, dlogits)?;
        let dj = head.input.data();
        let (g, f, w) = (tape.g.data(), tape.f.data(), tape.weights.data());
        let mut dg: Vec<f64> = dj.iter().zip(w).map(|(d, w)| d * w).collect();
        let mut df: Vec<f64> = dj.iter().zip(w).map(|(d, w)| d * (1.0 - w)).collect();

        let gate_params = match tape.gate {
            Some(t) => {
                let dw: Vec<f64> = dj.iter().zip(g).zip(f).map(|((d, g), f)| d * (g - f)).collect();
                let gg = self.gate.backward(t, &Tensor::from_vec(dw))?;
                let (dgg, dgf) = gg.input.data().split_at(FEATURE_DIM);
                dg.iter_mut().zip(dgg).for_each(|(a, b)| *a += b);
                df.iter_mut().zip(dgf).for_each(|(a, b)| *a += b);
                gg.params
            }
            None => zeros_like(&self.gate),
        };
        let (depth_params, depth_input) = match tape.depth {
            Some(t) => {
                let gr = self.depth.backward(t, &Tensor::from_vec(dg))?;
                (gr.params, gr.input)
            }
            None => (zeros_like(&self.depth), Tensor::zeros(self.depth.input_shape())),
        };
        let (force_params, force_input) = match tape.force {
            Some(t) => {
                let gr = self.force.backward(t, &Tensor::from_vec(df))?;
                (gr.params, gr.input)
            }
            None => (zeros_like(&self.force), Tensor::zeros(self.force.input_shape())),
        };
        Ok(ModelGrads { params: [depth_params, force_params, gate_params, head.params], depth_input, force_input })
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            params: [zeros_like(&self.depth), zeros_like(&self.force), zeros_like(&self.gate), zeros_like(&self.head)],
            depth_input: Tensor::zeros(self.depth.input_shape()),
            force_input: Tensor::zeros(self.force.input_shape()),
        }
    }
}

/// One Adam state per network; an encoder whose stream is disabled is not stepped.
#[derive(Debug, Clone)]
pub struct TwoStreamOptimizer {
    adams: [Adam; 4],
}

impl TwoStreamOptimizer {
    pub fn new(model: &TwoStreamModel, hyper: AdamHyper) -> Self {
        let [d, f, g, h] = model.networks();
        Self { adams: [Adam::new(d, hyper), Adam::new(f, hyper), Adam::new(g, hyper), Adam::new(h, hyper)] }
    }

    pub fn step(&mut self, model: &mut TwoStreamModel, grads: &ModelGrads) -> Result<()> {
        let modality = model.config.modality;
        let [ad, af, ag, ah] = &mut self.adams;
        if modality.uses_depth() {
            ad.step(&mut model.depth, &grads.params[0])?;
        }
        if modality.uses_force() {
            af.step(&mut model.force, &grads.params[1])?;
        }
        ag.step(&mut model.gate, &grads.params[2])?;
        ah.step(&mut model.head, &grads.params[3])
    }
}
