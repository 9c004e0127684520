use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, Series};
use crate::autodiff::Tensor;

/// `n` series of `len` steps, each channel `sin(2π f t + φ)` with
/// `f ~ U[0.01, 0.05]` cycles per step and `φ ~ U[0, 2π)`.
///
/// Frequencies and phases are drawn series by series, channel by channel.
pub fn generate_sines(n: usize, len: usize, channels: usize, seed: u64) -> Result<Vec<Series>, DataError> {
    if n == 0 || len == 0 || channels == 0 {
        return Err(DataError::Geometry(format!(
            "sines needs positive count, length and channels (got {n}, {len}, {channels})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let waves: Vec<(f64, f64)> = (0..channels)
                .map(|_| (rng.random_range(0.01..=0.05), rng.random_range(0.0..TAU)))
                .collect();
            let data = (0..len)
                .flat_map(|t| waves.iter().map(move |&(f, phase)| sine(f, phase, t)))
                .collect();
            Series::new(format!("sine{i}"), Tensor::new(vec![len, channels], data)?)
        })
        .collect()
}

fn sine(freq: f64, phase: f64, t: usize) -> f64 {
    (TAU * freq * t as f64 + phase).sin()
}
