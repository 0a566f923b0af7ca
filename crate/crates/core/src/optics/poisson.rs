//! Gradient-field integration by a discrete-cosine Poisson solve.
//!
//! The height `z` minimizing `Σ (Δz - ĝ)²` over all horizontal and vertical
//! pixel edges, with `ĝ` the edge-averaged slope, satisfies the 5-point
//! Laplacian with homogeneous Neumann boundaries. That operator is
//! diagonalized by the type-II DCT, so the solve is two 2-D transforms and a
//! pointwise division.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{DepthMap, GradientField};
use crate::grid::Grid;

/// Type-II/III DCT pair of one length, computed through an N-point FFT
/// (Makhoul's even/odd reordering).
struct Dct {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    twiddle: Vec<Complex<f64>>,
}

impl Dct {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        let twiddle = (0..n).map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64))).collect();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), twiddle }
    }

    /// `X_k = Σ_n x_n cos(π k (2n+1) / 2N)`, in place on `data` (stride 1).
    fn forward(&self, data: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.n;
        for i in 0..n.div_ceil(2) {
            buf[i] = Complex::new(data[2 * i], 0.0);
        }
        for i in 0..n / 2 {
            buf[n - 1 - i] = Complex::new(data[2 * i + 1], 0.0);
        }
        self.forward.process(buf);
        for k in 0..n {
            data[k] = (self.twiddle[k] * buf[k]).re;
        }
    }

    /// Exact inverse of [`Dct::forward`].
    fn inverse(&self, data: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.n;
        for k in 0..n {
            let mirror = if k == 0 { 0.0 } else { data[n - k] };
            buf[k] = self.twiddle[k].conj() * Complex::new(data[k], -mirror);
        }
        self.inverse.process(buf);
        let scale = 1.0 / n as f64;
        for i in 0..n.div_ceil(2) {
            data[2 * i] = buf[i].re * scale;
        }
        for i in 0..n / 2 {
            data[2 * i + 1] = buf[n - 1 - i].re * scale;
        }
    }
}

struct Dct2d {
    rows: Dct,
    cols: Dct,
}

impl Dct2d {
    fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { rows: Dct::new(&mut planner, width), cols: Dct::new(&mut planner, height) }
    }

    fn apply(&self, g: &mut Grid, inverse: bool) {
        let (w, h) = (g.width(), g.height());
        let mut buf = vec![Complex::default(); w.max(h)];
        for row in g.as_mut_slice().chunks_exact_mut(w) {
            if inverse {
                self.rows.inverse(row, &mut buf[..w]);
            } else {
                self.rows.forward(row, &mut buf[..w]);
            }
        }
        let mut column = vec![0.0; h];
        for c in 0..w {
            for r in 0..h {
                column[r] = g[(r, c)];
            }
            if inverse {
                self.cols.inverse(&mut column, &mut buf[..h]);
            } else {
                self.cols.forward(&mut column, &mut buf[..h]);
            }
            for r in 0..h {
                g[(r, c)] = column[r];
            }
        }
    }
}

/// Separable unnormalized type-II DCT of a grid.
pub fn dct2(g: &Grid) -> Grid {
    let mut out = g.clone();
    Dct2d::new(g.width(), g.height()).apply(&mut out, false);
    out
}

/// Inverse of [`dct2`].
pub fn idct2(g: &Grid) -> Grid {
    let mut out = g.clone();
    Dct2d::new(g.width(), g.height()).apply(&mut out, true);
    out
}

/// Integrates slopes into a zero-mean depth map (mm).
pub fn poisson_reconstruct(g: &GradientField) -> DepthMap {
    let (w, h) = (g.width(), g.height());
    let pitch = g.pitch;
    let gx = &g.gx;
    let gy = &g.gy;

    // divergence of edge-averaged slopes; edges beyond the border do not exist
    let mut rhs = Grid::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            if c + 1 < w {
                acc += 0.5 * (gx[(r, c)] + gx[(r, c + 1)]);
            }
            if c > 0 {
                acc -= 0.5 * (gx[(r, c - 1)] + gx[(r, c)]);
            }
            if r + 1 < h {
                acc += 0.5 * (gy[(r, c)] + gy[(r + 1, c)]);
            }
            if r > 0 {
                acc -= 0.5 * (gy[(r - 1, c)] + gy[(r, c)]);
            }
            rhs[(r, c)] = acc * pitch;
        }
    }

    let dct = Dct2d::new(w, h);
    dct.apply(&mut rhs, false);
    let lambda = |k: usize, n: usize| 2.0 * (PI * k as f64 / n as f64).cos() - 2.0;
    let lx: Vec<f64> = (0..w).map(|k| lambda(k, w)).collect();
    let ly: Vec<f64> = (0..h).map(|k| lambda(k, h)).collect();
    for r in 0..h {
        for c in 0..w {
            let denom = lx[c] + ly[r];
            rhs[(r, c)] = if r == 0 && c == 0 { 0.0 } else { rhs[(r, c)] / denom };
        }
    }
    dct.apply(&mut rhs, true);
    DepthMap { depth: rhs, pitch }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dct(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()).sum()
            })
            .collect()
    }

    #[test]
    fn dct_matches_direct_sum_and_inverts() {
        let mut planner = FftPlanner::new();
        for n in [1usize, 2, 5, 8, 13, 32] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 4.5).collect();
            let dct = Dct::new(&mut planner, n);
            let mut buf = vec![Complex::default(); n];
            let mut y = x.clone();
            dct.forward(&mut y, &mut buf);
            for (a, b) in y.iter().zip(naive_dct(&x)) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
            dct.inverse(&mut y, &mut buf);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_gradients_give_zero_depth() {
        let geom = crate::optics::FrameGeometry::new(32, 64, 0.1).unwrap();
        let d = poisson_reconstruct(&GradientField::zeros(&geom));
        assert!(d.depth.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_is_zero_mean() {
        let geom = crate::optics::FrameGeometry::new(32, 32, 0.1).unwrap();
        let mut g = GradientField::zeros(&geom);
        for (i, v) in g.gx.as_mut_slice().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin() * 0.2;
        }
        let d = poisson_reconstruct(&g);
        assert!(d.depth.mean().abs() < 1e-13);
    }
}
