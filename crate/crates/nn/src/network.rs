use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{self, Cache, LayerSpec};
use crate::tensor::Tensor;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Declarative description of a layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, input_shape: &[usize], layers: Vec<LayerSpec>) -> Self {
        Self { name: name.into(), input_shape: input_shape.to_vec(), layers }
    }

    /// Shape after every layer; checks that the chain composes.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        if self.name.is_empty() {
            return Err(Error::Config("network name must be nonempty".into()));
        }
        if self.input_shape.is_empty() || self.input_shape.len() > 4 || self.input_shape.contains(&0) {
            return Err(Error::Config(format!("invalid input shape {:?}", self.input_shape)));
        }
        let mut shape = self.input_shape.clone();
        let mut trace = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            shape = l.output_shape(&shape).map_err(|e| Error::Config(format!("{}: layer {i}: {e}", self.name)))?;
            trace.push(shape.clone());
        }
        Ok(trace)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shape_trace()?.pop().unwrap_or_else(|| self.input_shape.clone()))
    }
}

/// A parameterized layer stack.
///
/// Parameters live in a flat registry; layer `i` with parameters owns
/// entries `slot[i]` (weight) and `slot[i] + 1` (bias). Any mutable access to
/// the registry advances the generation and invalidates outstanding tapes.
#[derive(Debug)]
pub struct Network {
    id: u64,
    generation: u64,
    spec: NetworkSpec,
    slots: Vec<Option<usize>>,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl Clone for Network {
    /// The clone gets a fresh identity so tapes cannot cross networks.
    fn clone(&self) -> Self {
        Self {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            generation: 0,
            spec: self.spec.clone(),
            slots: self.slots.clone(),
            names: self.names.clone(),
            params: self.params.clone(),
        }
    }
}

/// Forward record consumed by [`Network::backward`].
#[derive(Debug)]
pub struct Tape {
    network: u64,
    generation: u64,
    input_shape: Vec<usize>,
    caches: Vec<Cache>,
}

/// Parameter gradients in registry order plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

impl Gradients {
    /// Sums another sample's gradients into this one.
    pub fn accumulate(&mut self, other: &Gradients) {
        assert_eq!(self.params.len(), other.params.len(), "gradient registries differ");
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.add_assign(b);
        }
        self.input.add_assign(&other.input);
    }

    pub fn scale(&mut self, s: f64) {
        self.params.iter_mut().for_each(|p| p.scale(s));
        self.input.scale(s);
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(Tensor::all_finite) && self.input.all_finite()
    }
}

impl Network {
    /// Builds the network and initializes it with [`Network::init_params`].
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.shape_trace()?;
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (i, l) in spec.layers.iter().enumerate() {
            match l.param_shapes() {
                Some((w, b, _)) => {
                    slots.push(Some(params.len()));
                    names.push(format!("{}.{i}.{}.weight", spec.name, l.name()));
                    names.push(format!("{}.{i}.{}.bias", spec.name, l.name()));
                    params.push(Tensor::zeros(&w));
                    params.push(Tensor::zeros(&b));
                }
                None => slots.push(None),
            }
        }
        let mut net = Self { id: NEXT_ID.fetch_add(1, Ordering::Relaxed), generation: 0, spec, slots, names, params };
        net.init_params(seed);
        Ok(net)
    }

    /// Builds a network from explicit parameter tensors in registry order.
    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor>) -> Result<Self> {
        let mut net = Self::new(spec, 0)?;
        if params.len() != net.params.len() {
            return Err(Error::Config(format!(
                "{} expects {} parameter tensors, got {}",
                net.spec.name,
                net.params.len(),
                params.len()
            )));
        }
        for (i, (have, want)) in params.iter().zip(&net.params).enumerate() {
            if have.shape() != want.shape() {
                return Err(Error::Config(format!(
                    "{}: expected shape {:?}, got {:?}",
                    net.names[i],
                    want.shape(),
                    have.shape()
                )));
            }
        }
        net.params = params;
        Ok(net)
    }

    /// He-uniform weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, slot) in self.spec.layers.iter().zip(&self.slots) {
            if let (Some((_, _, fan_in)), Some(s)) = (l.param_shapes(), slot) {
                let bound = (6.0 / fan_in as f64).sqrt();
                for v in self.params[*s].data_mut() {
                    *v = rng.random_range(-bound..bound);
                }
                self.params[s + 1].data_mut().fill(0.0);
            }
        }
        self.generation += 1;
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.spec.input_shape
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.spec.output_shape().expect("validated at construction")
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    /// Mutable registry access; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [Tensor] {
        self.generation += 1;
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn layer_params(&self, i: usize) -> Option<(&Tensor, &Tensor)> {
        self.slots[i].map(|s| (&self.params[s], &self.params[s + 1]))
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.spec.input_shape.as_slice() {
            return Err(Error::Config(format!(
                "{} expects input shape {:?}, got {:?}",
                self.spec.name,
                self.spec.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass recording a tape for [`Network::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Tape)> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for (i, l) in self.spec.layers.iter().enumerate() {
            let (y, cache) = layer::forward(l, self.layer_params(i), x)?;
            caches.push(cache);
            x = y;
        }
        if !x.all_finite() {
            return Err(Error::Domain(format!("{} produced a non-finite output", self.spec.name)));
        }
        let tape = Tape { network: self.id, generation: self.generation, input_shape: input.shape().to_vec(), caches };
        Ok((x, tape))
    }

    /// Forward pass without a tape.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Reverse pass. The tape is consumed, so it cannot be replayed.
    pub fn backward(&self, tape: Tape, output_grad: &Tensor) -> Result<Gradients> {
        if tape.network != self.id {
            return Err(Error::Usage(format!("tape was recorded by a different network than {}", self.spec.name)));
        }
        if tape.generation != self.generation {
            return Err(Error::Usage(format!("{}: parameters changed since the tape was recorded", self.spec.name)));
        }
        let out_shape = self.output_shape();
        if output_grad.shape() != out_shape.as_slice() {
            return Err(Error::Config(format!(
                "{}: output gradient shape {:?} does not match output {:?}",
                self.spec.name,
                output_grad.shape(),
                out_shape
            )));
        }
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut g = output_grad.clone();
        for (i, (l, cache)) in self.spec.layers.iter().zip(&tape.caches).enumerate().rev() {
            let slot_grads = self.slots[i].map(|s| {
                let (lo, hi) = grads.split_at_mut(s + 1);
                (&mut lo[s], &mut hi[0])
            });
            g = layer::backward(l, self.layer_params(i), slot_grads, cache, &g);
        }
        debug_assert_eq!(g.shape(), tape.input_shape.as_slice());
        let out = Gradients { params: grads, input: g };
        if !out.all_finite() {
            return Err(Error::Domain(format!("{} produced non-finite gradients", self.spec.name)));
        }
        Ok(out)
    }
}
