use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. One instance per network; it is the single
/// writer of that network's parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    pub hyper: AdamHyper,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(net: &Network, hyper: AdamHyper) -> Self {
        let zeros = || net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self { hyper, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, net: &mut Network, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.m.len() || grads.iter().zip(&self.m).any(|(g, m)| g.shape() != m.shape()) {
            return Err(Error::Config(format!("gradients do not match the registry of {}", net.name())));
        }
        let AdamHyper { lr, beta1, beta2, eps } = self.hyper;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in net.params_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::LayerSpec;
    use crate::network::NetworkSpec;

    fn net() -> Network {
        Network::new(NetworkSpec::new("a", &[2], vec![LayerSpec::Dense { inputs: 2, outputs: 2 }]), 3).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut n = net();
        let before = n.params().to_vec();
        let mut adam = Adam::new(&n, AdamHyper::default());
        let zeros: Vec<Tensor> = before.iter().map(|p| Tensor::zeros(p.shape())).collect();
        adam.step(&mut n, &zeros).unwrap();
        assert_eq!(n.params(), before.as_slice());
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut n = net();
        let before = n.params().to_vec();
        let mut adam = Adam::new(&n, AdamHyper::default());
        let grads: Vec<Tensor> = before
            .iter()
            .map(|p| Tensor::new(p.shape().to_vec(), (0..p.len()).map(|i| (i as f64 - 1.5) * 0.3).collect()).unwrap())
            .collect();
        adam.step(&mut n, &grads).unwrap();
        for ((a, b), g) in n.params().iter().zip(&before).zip(&grads) {
            for ((a, b), g) in a.data().iter().zip(b.data()).zip(g.data()) {
                // m̂ = g and v̂ = g² after one step
                let expected = -1e-3 * g / (g.abs() + 1e-8);
                assert!((a - b - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let run = || {
            let mut n = net();
            let mut adam = Adam::new(&n, AdamHyper::default());
            for k in 0..10 {
                let grads: Vec<Tensor> = n
                    .params()
                    .iter()
                    .map(|p| {
                        Tensor::new(p.shape().to_vec(), p.data().iter().map(|v| v * 0.7 + k as f64).collect()).unwrap()
                    })
                    .collect();
                adam.step(&mut n, &grads).unwrap();
            }
            n.params().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn misaligned_gradients_are_rejected() {
        let mut n = net();
        let mut adam = Adam::new(&n, AdamHyper::default());
        assert!(adam.step(&mut n, &[Tensor::zeros(&[3])]).is_err());
    }
}
