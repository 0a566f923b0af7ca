//! Layer kinds and their forward/backward kernels.
//!
//! Convolutions use "same" zero padding with unit stride (odd kernels only),
//! so only the pooling layers change spatial size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gemm::gemm;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize },
    Conv1d { in_channels: usize, out_channels: usize, kernel: usize },
    Maxpool2d { size: usize },
    Maxpool1d { size: usize },
    GlobalAvgPool,
    Relu,
    Sigmoid,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Maxpool2d { .. } => "maxpool2d",
            LayerSpec::Maxpool1d { .. } => "maxpool1d",
            LayerSpec::GlobalAvgPool => "global-avg-pool",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    /// `(weight shape, bias shape, fan_in)` for parameterized layers.
    pub(crate) fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>, usize)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs], inputs)),
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => Some((
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
                in_channels * kernel * kernel,
            )),
            LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                Some((vec![out_channels, in_channels, kernel], vec![out_channels], in_channels * kernel))
            }
            _ => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Dense { inputs, outputs } if inputs == 0 || outputs == 0 => {
                Err(Error::Config("dense layer needs nonzero widths".into()))
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel }
            | LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                if in_channels == 0 || out_channels == 0 {
                    Err(Error::Config(format!("{} needs nonzero channel counts", self.name())))
                } else if kernel % 2 == 0 {
                    Err(Error::Config(format!("same padding needs an odd kernel, got {kernel}")))
                } else {
                    Ok(())
                }
            }
            LayerSpec::Maxpool2d { size } | LayerSpec::Maxpool1d { size } if size == 0 => {
                Err(Error::Config("pool size must be nonzero".into()))
            }
            _ => Ok(()),
        }
    }

    /// Output shape for an input shape, or a configuration error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: &str| {
            Err(Error::Config(format!("{} expects {expected}, got input shape {input:?}", self.name())))
        };
        match *self {
            LayerSpec::Dense { inputs, outputs } => match input {
                [n] if *n == inputs => Ok(vec![outputs]),
                _ => mismatch(&format!("[{inputs}]")),
            },
            LayerSpec::Conv2d { in_channels, out_channels, .. } => match input {
                [c, h, w] if *c == in_channels => Ok(vec![out_channels, *h, *w]),
                _ => mismatch(&format!("[{in_channels}, H, W]")),
            },
            LayerSpec::Conv1d { in_channels, out_channels, .. } => match input {
                [c, t] if *c == in_channels => Ok(vec![out_channels, *t]),
                _ => mismatch(&format!("[{in_channels}, T]")),
            },
            LayerSpec::Maxpool2d { size } => match input {
                [c, h, w] if h % size == 0 && w % size == 0 => Ok(vec![*c, h / size, w / size]),
                _ => mismatch(&format!("[C, H, W] with H, W divisible by {size}")),
            },
            LayerSpec::Maxpool1d { size } => match input {
                [c, t] if t % size == 0 => Ok(vec![*c, t / size]),
                _ => mismatch(&format!("[C, T] with T divisible by {size}")),
            },
            LayerSpec::GlobalAvgPool => match input {
                [c, rest @ ..] if !rest.is_empty() => Ok(vec![*c]),
                _ => mismatch("[C, ...spatial]"),
            },
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }
}

/// Per-layer state saved during forward for use in backward.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Tensor),
    Argmax { input_shape: Vec<usize>, index: Vec<usize> },
    Shape(Vec<usize>),
    Output(Tensor),
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Unfolds `[C, H, W]` into `[C*K*K, H*W]` with zero padding.
fn im2col_2d(x: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut cols = vec![0.0; c * k * k * hw];
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * hw;
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    let dst = &mut cols[row + y * w..row + (y + 1) * w];
                    let lo = (-dx).max(0) as usize;
                    let hi = (w as isize - dx).min(w as isize) as usize;
                    if lo < hi {
                        let s0 = (lo as isize + dx) as usize;
                        dst[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col_2d`].
fn col2im_2d(cols: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut x = vec![0.0; c * hw];
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * hw;
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let lo = (-dx).max(0) as usize;
                    let hi = (w as isize - dx).min(w as isize) as usize;
                    if lo >= hi {
                        continue;
                    }
                    let s0 = (lo as isize + dx) as usize;
                    let src = &cols[row + y * w + lo..row + y * w + hi];
                    let dst = &mut x[ch * hw + sy as usize * w + s0..ch * hw + sy as usize * w + s0 + (hi - lo)];
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                }
            }
        }
    }
    x
}

/// The 2-D routines cover 1-D signals as `H = 1` images with a `1×K` kernel;
/// kept separate so the kernel layout stays `[O, C, K]`.
fn im2col_1d(x: &[f64], c: usize, t: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let mut cols = vec![0.0; c * k * t];
    for ch in 0..c {
        for kk in 0..k {
            let row = (ch * k + kk) * t;
            let d = kk as isize - pad;
            for i in 0..t {
                let s = i as isize + d;
                if s >= 0 && s < t as isize {
                    cols[row + i] = x[ch * t + s as usize];
                }
            }
        }
    }
    cols
}

fn col2im_1d(cols: &[f64], c: usize, t: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let mut x = vec![0.0; c * t];
    for ch in 0..c {
        for kk in 0..k {
            let row = (ch * k + kk) * t;
            let d = kk as isize - pad;
            for i in 0..t {
                let s = i as isize + d;
                if s >= 0 && s < t as isize {
                    x[ch * t + s as usize] += cols[row + i];
                }
            }
        }
    }
    x
}

/// Forward kernel. `params` is `Some((weight, bias))` for parameterized layers.
pub(crate) fn forward(spec: &LayerSpec, params: Option<(&Tensor, &Tensor)>, x: Tensor) -> Result<(Tensor, Cache)> {
    let out_shape = spec.output_shape(x.shape())?;
    match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let (w, b) = params.expect("dense has parameters");
            let mut y = b.data().to_vec();
            gemm(outputs, inputs, 1, 1.0, w.data(), false, x.data(), false, 1.0, &mut y);
            Ok((Tensor::new(out_shape, y)?, Cache::Input(x)))
        }
        LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
            let (w, b) = params.expect("conv2d has parameters");
            let (h, wd) = (x.shape()[1], x.shape()[2]);
            let hw = h * wd;
            let cols = im2col_2d(x.data(), in_channels, h, wd, kernel);
            let mut y = vec![0.0; out_channels * hw];
            for (o, chunk) in y.chunks_exact_mut(hw).enumerate() {
                chunk.fill(b.data()[o]);
            }
            gemm(out_channels, in_channels * kernel * kernel, hw, 1.0, w.data(), false, &cols, false, 1.0, &mut y);
            Ok((Tensor::new(out_shape, y)?, Cache::Input(x)))
        }
        LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
            let (w, b) = params.expect("conv1d has parameters");
            let t = x.shape()[1];
            let cols = im2col_1d(x.data(), in_channels, t, kernel);
            let mut y = vec![0.0; out_channels * t];
            for (o, chunk) in y.chunks_exact_mut(t).enumerate() {
                chunk.fill(b.data()[o]);
            }
            gemm(out_channels, in_channels * kernel, t, 1.0, w.data(), false, &cols, false, 1.0, &mut y);
            Ok((Tensor::new(out_shape, y)?, Cache::Input(x)))
        }
        LayerSpec::Maxpool2d { size } => {
            let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (oh, ow) = (h / size, w / size);
            let mut y = Vec::with_capacity(c * oh * ow);
            let mut index = Vec::with_capacity(c * oh * ow);
            let d = x.data();
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = usize::MAX;
                        let mut best_v = f64::NEG_INFINITY;
                        for dy in 0..size {
                            for dx in 0..size {
                                let i = ch * h * w + (oy * size + dy) * w + ox * size + dx;
                                if best == usize::MAX || d[i] > best_v {
                                    best = i;
                                    best_v = d[i];
                                }
                            }
                        }
                        y.push(best_v);
                        index.push(best);
                    }
                }
            }
            Ok((Tensor::new(out_shape, y)?, Cache::Argmax { input_shape: x.shape().to_vec(), index }))
        }
        LayerSpec::Maxpool1d { size } => {
            let (c, t) = (x.shape()[0], x.shape()[1]);
            let ot = t / size;
            let mut y = Vec::with_capacity(c * ot);
            let mut index = Vec::with_capacity(c * ot);
            let d = x.data();
            for ch in 0..c {
                for o in 0..ot {
                    let base = ch * t + o * size;
                    let mut best = base;
                    for i in base + 1..base + size {
                        if d[i] > d[best] {
                            best = i;
                        }
                    }
                    y.push(d[best]);
                    index.push(best);
                }
            }
            Ok((Tensor::new(out_shape, y)?, Cache::Argmax { input_shape: x.shape().to_vec(), index }))
        }
        LayerSpec::GlobalAvgPool => {
            let c = x.shape()[0];
            let n = x.len() / c;
            let y = x.data().chunks_exact(n).map(|p| p.iter().sum::<f64>() / n as f64).collect();
            Ok((Tensor::new(out_shape, y)?, Cache::Shape(x.shape().to_vec())))
        }
        LayerSpec::Relu => {
            let y = Tensor::new(out_shape, x.data().iter().map(|v| v.max(0.0)).collect())?;
            Ok((y.clone(), Cache::Output(y)))
        }
        LayerSpec::Sigmoid => {
            let y = Tensor::new(out_shape, x.data().iter().map(|v| sigmoid(*v)).collect())?;
            Ok((y.clone(), Cache::Output(y)))
        }
    }
}

/// Backward kernel: returns the input gradient and, for parameterized
/// layers, accumulates into `(dweight, dbias)`.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: Option<(&Tensor, &Tensor)>,
    grads: Option<(&mut Tensor, &mut Tensor)>,
    cache: &Cache,
    gy: &Tensor,
) -> Tensor {
    match (*spec, cache) {
        (LayerSpec::Dense { inputs, outputs }, Cache::Input(x)) => {
            let (w, _) = params.expect("dense has parameters");
            let (dw, db) = grads.expect("dense has gradients");
            gemm(outputs, 1, inputs, 1.0, gy.data(), false, x.data(), false, 1.0, dw.data_mut());
            db.data_mut().iter_mut().zip(gy.data()).for_each(|(d, g)| *d += g);
            let mut dx = vec![0.0; inputs];
            gemm(inputs, outputs, 1, 1.0, w.data(), true, gy.data(), false, 0.0, &mut dx);
            Tensor::new(x.shape().to_vec(), dx).expect("shape preserved")
        }
        (LayerSpec::Conv2d { in_channels, out_channels, kernel }, Cache::Input(x)) => {
            let (w, _) = params.expect("conv2d has parameters");
            let (dw, db) = grads.expect("conv2d has gradients");
            let (h, wd) = (x.shape()[1], x.shape()[2]);
            let hw = h * wd;
            let ckk = in_channels * kernel * kernel;
            let cols = im2col_2d(x.data(), in_channels, h, wd, kernel);
            gemm(out_channels, hw, ckk, 1.0, gy.data(), false, &cols, true, 1.0, dw.data_mut());
            for (o, chunk) in gy.data().chunks_exact(hw).enumerate() {
                db.data_mut()[o] += chunk.iter().sum::<f64>();
            }
            let mut dcols = vec![0.0; ckk * hw];
            gemm(ckk, out_channels, hw, 1.0, w.data(), true, gy.data(), false, 0.0, &mut dcols);
            let dx = col2im_2d(&dcols, in_channels, h, wd, kernel);
            Tensor::new(x.shape().to_vec(), dx).expect("shape preserved")
        }
        (LayerSpec::Conv1d { in_channels, out_channels, kernel }, Cache::Input(x)) => {
            let (w, _) = params.expect("conv1d has parameters");
            let (dw, db) = grads.expect("conv1d has gradients");
            let t = x.shape()[1];
            let ck = in_channels * kernel;
            let cols = im2col_1d(x.data(), in_channels, t, kernel);
            gemm(out_channels, t, ck, 1.0, gy.data(), false, &cols, true, 1.0, dw.data_mut());
            for (o, chunk) in gy.data().chunks_exact(t).enumerate() {
                db.data_mut()[o] += chunk.iter().sum::<f64>();
            }
            let mut dcols = vec![0.0; ck * t];
            gemm(ck, out_channels, t, 1.0, w.data(), true, gy.data(), false, 0.0, &mut dcols);
            let dx = col2im_1d(&dcols, in_channels, t, kernel);
            Tensor::new(x.shape().to_vec(), dx).expect("shape preserved")
        }
        (LayerSpec::Maxpool2d { .. } | LayerSpec::Maxpool1d { .. }, Cache::Argmax { input_shape, index }) => {
            let mut dx = Tensor::zeros(input_shape);
            for (g, &i) in gy.data().iter().zip(index) {
                dx.data_mut()[i] += g;
            }
            dx
        }
        (LayerSpec::GlobalAvgPool, Cache::Shape(shape)) => {
            let c = shape[0];
            let n = shape.iter().product::<usize>() / c;
            let mut dx = Tensor::zeros(shape);
            for (ch, chunk) in dx.data_mut().chunks_exact_mut(n).enumerate() {
                chunk.fill(gy.data()[ch] / n as f64);
            }
            dx
        }
        (LayerSpec::Relu, Cache::Output(y)) => {
            let d = y.data().iter().zip(gy.data()).map(|(y, g)| if *y > 0.0 { *g } else { 0.0 }).collect();
            Tensor::new(y.shape().to_vec(), d).expect("shape preserved")
        }
        (LayerSpec::Sigmoid, Cache::Output(y)) => {
            let d = y.data().iter().zip(gy.data()).map(|(y, g)| g * y * (1.0 - y)).collect();
            Tensor::new(y.shape().to_vec(), d).expect("shape preserved")
        }
        (spec, _) => unreachable!("cache does not belong to a {} layer", spec.name()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn im2col_pair_is_adjoint() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, h, w, k) = (2, 5, 4, 3);
        let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..c * k * k * h * w).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = im2col_2d(&x, c, h, w, k).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im_2d(&y, c, h, w, k)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);

        let t = 7;
        let x: Vec<f64> = (0..c * t).map(|i| i as f64 - 3.0).collect();
        let y: Vec<f64> = (0..c * k * t).map(|i| (i % 5) as f64).collect();
        let lhs: f64 = im2col_1d(&x, c, t, k).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im_1d(&y, c, t, k)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn even_kernels_are_rejected() {
        assert!(LayerSpec::Conv2d { in_channels: 1, out_channels: 1, kernel: 2 }.validate().is_err());
        assert!(LayerSpec::Conv1d { in_channels: 1, out_channels: 1, kernel: 5 }.validate().is_ok());
    }

    #[test]
    fn pool_shapes_must_divide() {
        assert!(LayerSpec::Maxpool2d { size: 2 }.output_shape(&[3, 5, 4]).is_err());
        assert_eq!(LayerSpec::Maxpool2d { size: 2 }.output_shape(&[3, 6, 4]).unwrap(), vec![3, 3, 2]);
        assert_eq!(LayerSpec::Maxpool1d { size: 2 }.output_shape(&[4, 8]).unwrap(), vec![4, 4]);
    }
}
