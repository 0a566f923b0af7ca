use serde::{Deserialize, Serialize};
use taxel_nn::{mse_loss, Network, Result, Tensor};

use crate::arch;

/// Force full scale (N); targets and force windows are divided by it.
pub const FORCE_FULL_SCALE: f64 = 12.0;

/// Input gain applied to raw RGB differences before the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorScaling {
    pub input_gain: f64,
    pub force_scale: f64,
}

impl Default for RegressorScaling {
    fn default() -> Self {
        Self { input_gain: 1.0, force_scale: FORCE_FULL_SCALE }
    }
}

/// Small CNN mapping a frame difference `[3, H, W]` to contact force.
#[derive(Debug, Clone)]
pub struct ForceRegressor {
    net: Network,
    scaling: RegressorScaling,
}

impl ForceRegressor {
    pub fn new(height: usize, width: usize, scaling: RegressorScaling, seed: u64) -> Result<Self> {
        Ok(Self { net: Network::new(arch::force_regressor(height, width)?, seed)?, scaling })
    }

    pub fn from_network(net: Network, scaling: RegressorScaling) -> Result<Self> {
        let shape = net.input_shape().to_vec();
        let expected = arch::force_regressor(shape.get(1).copied().unwrap_or(0), shape.get(2).copied().unwrap_or(0))?;
        if net.spec() != &expected {
            return Err(taxel_nn::Error::Config(format!("{} is not a force regressor", net.name())));
        }
        Ok(Self { net, scaling })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn scaling(&self) -> RegressorScaling {
        self.scaling
    }

    pub fn input_shape(&self) -> &[usize] {
        self.net.input_shape()
    }

    fn scaled(&self, diff: &Tensor) -> Tensor {
        let mut x = diff.clone();
        x.scale(self.scaling.input_gain);
        x
    }

    /// Predicted force (N).
    pub fn predict(&self, diff: &Tensor) -> Result<f64> {
        Ok(self.net.infer(&self.scaled(diff))?.data()[0] * self.scaling.force_scale)
    }

    /// Squared error in normalized units and its parameter gradients.
    pub fn loss_and_grads(&self, diff: &Tensor, target: f64) -> Result<(f64, Vec<Tensor>)> {
        let (y, tape) = self.net.forward(&self.scaled(diff))?;
        let (loss, dy) = mse_loss(y.data()[0], target / self.scaling.force_scale);
        let grads = self.net.backward(tape, &Tensor::from_vec(vec![dy]))?;
        Ok((loss, grads.params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_difference_with_zero_bias_predicts_zero() {
        let r = ForceRegressor::new(16, 16, RegressorScaling::default(), 3).unwrap();
        // He init leaves every bias at zero and ReLU(0) = 0 throughout
        assert_eq!(r.predict(&Tensor::zeros(&[3, 16, 16])).unwrap(), 0.0);
    }

    #[test]
    fn gradients_cover_every_parameter() {
        let r = ForceRegressor::new(16, 16, RegressorScaling { input_gain: 5.0, force_scale: 12.0 }, 3).unwrap();
        let x = Tensor::new(vec![3, 16, 16], (0..768).map(|i| (i % 7) as f64 * 0.01).collect()).unwrap();
        let (loss, grads) = r.loss_and_grads(&x, 6.0).unwrap();
        assert!(loss > 0.0);
        assert_eq!(grads.len(), r.network().params().len());
    }
}
