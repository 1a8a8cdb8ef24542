//! Square 2-D FFTs on row-major buffers, with a process-wide plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Returns the cached plan pair for an `n`×`n` transform.
pub fn plan(n: usize) -> Arc<Fft2> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft2 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl Fft2 {
    /// Unnormalized forward transform, `Σ a·exp(-i k·x)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform scaled by `1/n²`, so `inverse(forward(a)) == a`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Inverse transform without the `1/n²` factor, `Σ c·exp(+i k·x)`.
    pub fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Angular spatial frequency (rad/m) of FFT bin `index` on a grid of side `extent`.
pub fn angular_frequency(index: usize, n: usize, extent: f64) -> f64 {
    let signed = if index < n / 2 {
        index as f64
    } else {
        index as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * signed / extent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let n = 16;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut buf = data.clone();
        let fft = plan(n);
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in data.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_harmonic_lands_in_one_bin() {
        let n = 8;
        let mut buf: Vec<Complex64> = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                let arg = 2.0 * std::f64::consts::PI * (2.0 * c as f64 + r as f64) / n as f64;
                Complex64::from_polar(1.0, arg)
            })
            .collect();
        plan(n).forward(&mut buf);
        for (i, v) in buf.iter().enumerate() {
            let expected = if i == n + 2 { (n * n) as f64 } else { 0.0 };
            assert!((v.norm() - expected).abs() < 1e-9, "bin {i}: {v}");
        }
    }

    #[test]
    fn frequency_ordering() {
        assert_eq!(angular_frequency(0, 8, 1.0), 0.0);
        assert!(angular_frequency(3, 8, 1.0) > 0.0);
        assert!(angular_frequency(4, 8, 1.0) < 0.0);
        assert!((angular_frequency(7, 8, 1.0) + 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
