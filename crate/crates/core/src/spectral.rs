//! FFT along one axis of a row-major tensor.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::linalg::C64;

/// Forward/inverse FFT plans for one axis of a tensor with shape
/// `[outer, n, inner]`, plus the buffers needed to transpose strided lines
/// into contiguous storage.
pub(crate) struct AxisFft {
    n: usize,
    outer: usize,
    inner: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    lines: Vec<C64>,
    scratch: Vec<C64>,
}

impl AxisFft {
    pub fn new(planner: &mut FftPlanner<f64>, dims: &[usize], axis: usize) -> Self {
        let n = dims[axis];
        let outer = dims[..axis].iter().product();
        let inner = dims[axis + 1..].iter().product();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let lines = if inner > 1 { vec![C64::new(0.0, 0.0); n * inner] } else { Vec::new() };
        Self { n, outer, inner, forward, inverse, lines, scratch: vec![C64::new(0.0, 0.0); scratch_len] }
    }

    /// Forward transform, `f(k, value)` applied to every mode index `k` of
    /// every line, then inverse transform. `f` must include the `1/n`
    /// normalisation if a round trip is intended.
    pub fn filter(&mut self, data: &mut [C64], mut f: impl FnMut(usize, &mut C64)) {
        let n = self.n;
        if self.inner == 1 {
            self.forward.process_with_scratch(data, &mut self.scratch);
            for line in data.chunks_exact_mut(n) {
                for (k, x) in line.iter_mut().enumerate() {
                    f(k, x);
                }
            }
            self.inverse.process_with_scratch(data, &mut self.scratch);
            return;
        }
        let inner = self.inner;
        let block = n * inner;
        for o in 0..self.outer {
            let chunk = &mut data[o * block..(o + 1) * block];
            for k in 0..n {
                for i in 0..inner {
                    self.lines[i * n + k] = chunk[k * inner + i];
                }
            }
            self.forward.process_with_scratch(&mut self.lines, &mut self.scratch);
            for line in self.lines.chunks_exact_mut(n) {
                for (k, x) in line.iter_mut().enumerate() {
                    f(k, x);
                }
            }
            self.inverse.process_with_scratch(&mut self.lines, &mut self.scratch);
            for k in 0..n {
                for i in 0..inner {
                    chunk[k * inner + i] = self.lines[i * n + k];
                }
            }
        }
    }

    /// Forward transform only, calling `f(k, value)` on each mode. The data is
    /// left untouched.
    pub fn inspect(&mut self, data: &[C64], mut f: impl FnMut(usize, C64)) {
        let n = self.n;
        let inner = self.inner;
        let block = n * inner;
        let mut lines = vec![C64::new(0.0, 0.0); block];
        for o in 0..self.outer {
            let chunk = &data[o * block..(o + 1) * block];
            for k in 0..n {
                for i in 0..inner {
                    lines[i * n + k] = chunk[k * inner + i];
                }
            }
            self.forward.process_with_scratch(&mut lines, &mut self.scratch);
            for line in lines.chunks_exact(n) {
                for (k, &x) in line.iter().enumerate() {
                    f(k, x);
                }
            }
        }
    }
}
