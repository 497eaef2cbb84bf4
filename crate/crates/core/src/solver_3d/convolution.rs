use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::green::{ball_integral, equivalent_radius, green_r};

/// Discrete Green's operator on a voxel grid,
/// `(G x)_i = sum_j G(i - j) x_j` with `G(0)` the self-cell integral and
/// `G(d) = g(k, |d| h) h^3` otherwise, applied by FFT on the doubled grid.
pub struct GreenConvolution {
    dims: [usize; 3],
    padded: [usize; 3],
    kernel_hat: Vec<Complex64>,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl GreenConvolution {
    pub fn new(dims: [usize; 3], spacing: f64, k: f64) -> Self {
        let padded = dims.map(|n| 2 * n);
        let mut planner = FftPlanner::new();
        let forward = padded.map(|n| planner.plan_fft_forward(n));
        let inverse = padded.map(|n| planner.plan_fft_inverse(n));
        let h3 = spacing.powi(3);
        let self_term = ball_integral(k, equivalent_radius(spacing));
        let [p1, p2, p3] = padded;
        let mut kernel = vec![Complex64::new(0.0, 0.0); p1 * p2 * p3];
        // circulant embedding: offset d sits at d mod 2n; index n stays zero
        let offset = |i: usize, n: usize| -> Option<f64> {
            if i < n {
                Some(i as f64)
            } else if i > n {
                Some(i as f64 - 2.0 * n as f64)
            } else {
                None
            }
        };
        for i3 in 0..p3 {
            let Some(d3) = offset(i3, dims[2]) else { continue };
            for i2 in 0..p2 {
                let Some(d2) = offset(i2, dims[1]) else { continue };
                for i1 in 0..p1 {
                    let Some(d1) = offset(i1, dims[0]) else { continue };
                    let idx = i1 + p1 * (i2 + p2 * i3);
                    kernel[idx] = if d1 == 0.0 && d2 == 0.0 && d3 == 0.0 {
                        self_term
                    } else {
                        let r = spacing * (d1 * d1 + d2 * d2 + d3 * d3).sqrt();
                        green_r(k, r) * h3
                    };
                }
            }
        }
        let mut conv = Self {
            dims,
            padded,
            kernel_hat: Vec::new(),
            forward,
            inverse,
        };
        conv.transform(&mut kernel, false);
        conv.kernel_hat = kernel;
        conv
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `G x` for `x` in voxel storage order.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let [n1, n2, n3] = self.dims;
        let [p1, p2, _] = self.padded;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.kernel_hat.len()];
        for i3 in 0..n3 {
            for i2 in 0..n2 {
                let src = n1 * (i2 + n2 * i3);
                let dst = p1 * (i2 + p2 * i3);
                buf[dst..dst + n1].copy_from_slice(&x[src..src + n1]);
            }
        }
        self.transform(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / buf.len() as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); n1 * n2 * n3];
        for i3 in 0..n3 {
            for i2 in 0..n2 {
                let src = p1 * (i2 + p2 * i3);
                let dst = n1 * (i2 + n2 * i3);
                for i1 in 0..n1 {
                    out[dst + i1] = buf[src + i1] * scale;
                }
            }
        }
        out
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let [p1, p2, p3] = self.padded;
        let plans = if inverse { &self.inverse } else { &self.forward };
        // axis 1 is contiguous
        plans[0].process(data);
        let mut line = vec![Complex64::new(0.0, 0.0); p2.max(p3)];
        for i3 in 0..p3 {
            for i1 in 0..p1 {
                let l = &mut line[..p2];
                for (i2, v) in l.iter_mut().enumerate() {
                    *v = data[i1 + p1 * (i2 + p2 * i3)];
                }
                plans[1].process(l);
                for (i2, v) in l.iter().enumerate() {
                    data[i1 + p1 * (i2 + p2 * i3)] = *v;
                }
            }
        }
        let plane = p1 * p2;
        for j in 0..plane {
            let l = &mut line[..p3];
            for (i3, v) in l.iter_mut().enumerate() {
                *v = data[j + plane * i3];
            }
            plans[2].process(l);
            for (i3, v) in l.iter().enumerate() {
                data[j + plane * i3] = *v;
            }
        }
    }
}
