//! Layer stacks of the two encoders, the fusion gate, the classifier head
//! and the force regressor.

use taxel_nn::{Error, LayerSpec, NetworkSpec, Result};

/// Width of both stream features and of the fused joint feature.
pub const FEATURE_DIM: usize = 128;
/// Spatial reduction of the depth encoder (five 2× pools).
pub const DEPTH_STRIDE: usize = 32;
/// Temporal reduction of the force encoder (three 2× pools).
pub const FORCE_STRIDE: usize = 8;
/// Spatial reduction of the force regressor (three 2× pools).
pub const REGRESSOR_STRIDE: usize = 8;
pub const HEAD_HIDDEN: usize = 64;

pub const DEPTH_ENCODER: &str = "depth-encoder";
pub const FORCE_ENCODER: &str = "force-encoder";
pub const FUSION_GATE: &str = "fusion-gate";
pub const CLASSIFIER: &str = "classifier";
pub const FORCE_REGRESSOR: &str = "force-regressor";

fn conv2d(i: usize, o: usize) -> [LayerSpec; 3] {
    [
        LayerSpec::Conv2d { in_channels: i, out_channels: o, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Maxpool2d { size: 2 },
    ]
}

fn conv1d(i: usize, o: usize, k: usize) -> [LayerSpec; 3] {
    [
        LayerSpec::Conv1d { in_channels: i, out_channels: o, kernel: k },
        LayerSpec::Relu,
        LayerSpec::Maxpool1d { size: 2 },
    ]
}

/// Input `[3, H, W]`, output `[128]`.
pub fn depth_encoder(height: usize, width: usize) -> Result<NetworkSpec> {
    if height == 0 || width == 0 || !height.is_multiple_of(DEPTH_STRIDE) || !width.is_multiple_of(DEPTH_STRIDE) {
        return Err(Error::Config(format!(
            "depth input must be a nonzero multiple of {DEPTH_STRIDE}, got {height}×{width}"
        )));
    }
    let mut layers = Vec::new();
    for (i, o) in [(3, 16), (16, 32), (32, 64), (64, 128), (128, FEATURE_DIM)] {
        layers.extend(conv2d(i, o));
    }
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::Dense { inputs: FEATURE_DIM, outputs: FEATURE_DIM });
    Ok(NetworkSpec::new(DEPTH_ENCODER, &[3, height, width], layers))
}

/// Input `[1, T]`, output `[128]`.
pub fn force_encoder(t: usize) -> Result<NetworkSpec> {
    if t == 0 || !t.is_multiple_of(FORCE_STRIDE) {
        return Err(Error::Config(format!("force window must be a nonzero multiple of {FORCE_STRIDE}, got {t}")));
    }
    let mut layers = Vec::new();
    layers.extend(conv1d(1, 32, 3));
    layers.extend(conv1d(32, 64, 5));
    layers.extend(conv1d(64, FEATURE_DIM, 3));
    layers.push(LayerSpec::GlobalAvgPool);
    Ok(NetworkSpec::new(FORCE_ENCODER, &[1, t], layers))
}

/// `concat(g, f)` → per-dimension weights in (0, 1).
pub fn fusion_gate() -> NetworkSpec {
    NetworkSpec::new(
        FUSION_GATE,
        &[2 * FEATURE_DIM],
        vec![
            LayerSpec::Dense { inputs: 2 * FEATURE_DIM, outputs: FEATURE_DIM },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: FEATURE_DIM, outputs: FEATURE_DIM },
            LayerSpec::Sigmoid,
        ],
    )
}

/// Joint feature → class logits.
pub fn classifier(classes: usize) -> Result<NetworkSpec> {
    if classes < 2 {
        return Err(Error::Config(format!("a classifier needs at least 2 classes, got {classes}")));
    }
    Ok(NetworkSpec::new(
        CLASSIFIER,
        &[FEATURE_DIM],
        vec![
            LayerSpec::Dense { inputs: FEATURE_DIM, outputs: HEAD_HIDDEN },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: HEAD_HIDDEN, outputs: classes },
        ],
    ))
}

/// Frame difference `[3, H, W]` → normalized force `[1]`.
pub fn force_regressor(height: usize, width: usize) -> Result<NetworkSpec> {
    if height == 0 || width == 0 || !height.is_multiple_of(REGRESSOR_STRIDE) || !width.is_multiple_of(REGRESSOR_STRIDE)
    {
        return Err(Error::Config(format!(
            "regressor input must be a nonzero multiple of {REGRESSOR_STRIDE}, got {height}×{width}"
        )));
    }
    let mut layers = Vec::new();
    for (i, o) in [(3, 16), (16, 32), (32, 64)] {
        layers.extend(conv2d(i, o));
    }
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::Dense { inputs: 64, outputs: 1 });
    Ok(NetworkSpec::new(FORCE_REGRESSOR, &[3, height, width], layers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_trace_reaches_one_thirty_second() {
        let spec = depth_encoder(96, 96).unwrap();
        let trace = spec.shape_trace().unwrap();
        // output of the last pool, before global averaging
        assert_eq!(trace[trace.len() - 3], vec![128, 3, 3]);
        assert_eq!(spec.output_shape().unwrap(), vec![128]);
        assert!(depth_encoder(96, 80).is_err());
    }

    #[test]
    fn force_trace_halves_three_times() {
        let trace = force_encoder(64).unwrap().shape_trace().unwrap();
        let pooled: Vec<&Vec<usize>> = [2, 5, 8].iter().map(|i| &trace[*i]).collect();
        assert_eq!(pooled, [&vec![32, 32], &vec![64, 16], &vec![128, 8]]);
        assert_eq!(trace.last().unwrap(), &vec![128]);
        assert!(force_encoder(60).is_err());
    }

    #[test]
    fn head_and_regressor_shapes() {
        assert_eq!(classifier(32).unwrap().output_shape().unwrap(), vec![32]);
        assert!(classifier(1).is_err());
        assert_eq!(force_regressor(32, 64).unwrap().output_shape().unwrap(), vec![1]);
        assert_eq!(fusion_gate().output_shape().unwrap(), vec![128]);
    }
}
