//! Multi-dimensional discrete Fourier transforms on periodic grids.
//!
//! Arrays use the same row-major layout as [`crate::lattice::TorusGeometry`]:
//! `M^d` values with the last axis fastest. Transforms run axis by axis.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT plans for a `d`-dimensional grid of side `m`.
#[derive(Clone)]
pub struct PeriodicFft {
    dim: usize,
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicFft")
            .field("dim", &self.dim)
            .field("side", &self.side)
            .finish()
    }
}

impl PeriodicFft {
    pub fn new(dim: usize, side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "array size does not match the grid");
        let m = self.side;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); m];
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(m) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * m;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/M^d` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Signed frequency of index `k` along one axis, in `(-M/2, M/2]`.
    pub fn frequency(&self, k: usize) -> i64 {
        let m = self.side as i64;
        let k = k as i64;
        if 2 * k > m {
            k - m
        } else {
            k
        }
    }

    /// Signed frequency vector of the mode stored at flat index `idx`.
    pub fn frequencies(&self, idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = self.frequency(rest % self.side);
            rest /= self.side;
        }
        out
    }

    /// Evaluate `symbol` on every mode's frequency vector.
    pub fn symbol(&self, symbol: impl Fn(&[i64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| symbol(&self.frequencies(i))).collect()
    }

    pub fn to_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    pub fn from_spectrum(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Real field multiplied mode-wise by a real `multiplier`.
    pub fn apply_multiplier(&self, values: &[f64], multiplier: &[f64]) -> Vec<f64> {
        let mut data = self.to_spectrum(values);
        for (c, &m) in data.iter_mut().zip(multiplier) {
            *c *= m;
        }
        self.from_spectrum(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let fft = PeriodicFft::new(2, 6);
        let values: Vec<f64> = (0..36).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let back = fft.from_spectrum(fft.to_spectrum(&values));
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_on_its_frequency() {
        let m = 8;
        let fft = PeriodicFft::new(2, m);
        // cos(2 pi x_1 * 1 / m) depends only on the last axis
        let values: Vec<f64> = (0..m * m)
            .map(|i| (2.0 * std::f64::consts::PI * (i % m) as f64 / m as f64).cos())
            .collect();
        let spec = fft.to_spectrum(&values);
        for (idx, c) in spec.iter().enumerate() {
            let f = fft.frequencies(idx);
            let expected = if f == vec![0, 1] || f == vec![0, -1] {
                (m * m) as f64 / 2.0
            } else {
                0.0
            };
            assert!((c.re - expected).abs() < 1e-9 && c.im.abs() < 1e-9, "{f:?}");
        }
    }

    #[test]
    fn frequencies_are_signed() {
        let fft = PeriodicFft::new(1, 8);
        let f: Vec<i64> = (0..8).map(|k| fft.frequency(k)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }
}
