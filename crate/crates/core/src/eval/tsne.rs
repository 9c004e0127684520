//! Exact O(n²) t-SNE.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::SeededRng;

pub const MAX_POINTS: usize = 2000;
const ENTROPY_TOL: f64 = 1e-5;
const SEARCH_STEPS: usize = 50;
const P_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tsne {
    /// `[n, 2]`
    pub coords: Tensor,
    /// KL(P‖Q) before each update, against the un-exaggerated P
    pub kl: Vec<f64>,
    /// perplexity actually used after clamping to the sample size
    pub perplexity: f64,
}

fn squared_distances(x: &Tensor, exec: Execution) -> Vec<Vec<f64>> {
    let n = x.shape()[0];
    exec.map_range(n, |i| {
        let a = x.row(i);
        (0..n).map(|j| a.iter().zip(x.row(j)).map(|(u, v)| (u - v) * (u - v)).sum()).collect()
    })
}

/// Row `i` of the conditional affinities, bisecting the precision until the
/// entropy matches `ln(perplexity)`.
fn conditional_row(d: &[f64], i: usize, target: f64) -> Vec<f64> {
    let dmin = d.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
    let (mut beta, mut lo, mut hi) = (1.0, f64::NEG_INFINITY, f64::INFINITY);
    let mut row = vec![0.0; d.len()];
    for _ in 0..SEARCH_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (j, &dj) in d.iter().enumerate() {
            if j == i {
                row[j] = 0.0;
                continue;
            }
            let shifted = dj - dmin;
            let p = (-shifted * beta).exp();
            row[j] = p;
            sum += p;
            weighted += shifted * p;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        let diff = entropy - target;
        row.iter_mut().for_each(|p| *p /= sum);
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
        }
    }
    row
}

/// Symmetrized joint affinities, floored at `1e-12`.
fn joint_affinities(x: &Tensor, perplexity: f64, exec: Execution) -> Vec<f64> {
    let n = x.shape()[0];
    let d = squared_distances(x, exec);
    let target = perplexity.ln();
    let cond = exec.map_range(n, |i| conditional_row(&d[i], i, target));
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    p
}

/// Embeds the rows of `x` (`[n, D]`) in two dimensions.
pub fn tsne_project(x: &Tensor, cfg: &TsneConfig, exec: Execution) -> Result<Tsne> {
    if x.rank() != 2 {
        return Err(Error::invalid("tsne", "input must be [n, D]"));
    }
    let n = x.shape()[0];
    if n < 4 {
        return Err(Error::invalid("tsne", "too few points for t-SNE"));
    }
    if n > MAX_POINTS {
        return Err(Error::invalid("tsne", format!("{n} points exceeds the exact-method limit of {MAX_POINTS}")));
    }
    if cfg.perplexity.is_nan() || cfg.perplexity <= 0.0 {
        return Err(Error::invalid("tsne", "perplexity must be positive"));
    }
    if !x.all_finite() {
        return Err(Error::invalid("tsne", "input contains non-finite values"));
    }
    let perplexity = cfg.perplexity.min((n - 1) as f64 / 3.0);
    let p = joint_affinities(x, perplexity, exec);

    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid std");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl = Vec::with_capacity(cfg.iters);

    for iter in 0..cfg.iters {
        let exaggeration = if iter < cfg.exaggeration_iters { cfg.early_exaggeration } else { 1.0 };
        let momentum = if iter < cfg.momentum_switch { 0.5 } else { 0.8 };

        // unnormalized Student-t kernel, one row per point
        let num: Vec<Vec<f64>> = exec.map_range(n, |i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let (dx, dy) = (y[i][0] - y[j][0], y[i][1] - y[j][1]);
                        1.0 / (1.0 + dx * dx + dy * dy)
                    }
                })
                .collect()
        });
        let z: f64 = num.iter().map(|r| r.iter().sum::<f64>()).sum();

        let row_kl = exec.map_range(n, |i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p[i * n + j];
                    pij * (pij / (num[i][j] / z).max(P_FLOOR)).ln()
                })
                .sum::<f64>()
        });
        kl.push(row_kl.iter().sum());

        let grad = exec.map_range(n, |i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let q = (num[i][j] / z).max(P_FLOOR);
                let w = 4.0 * (exaggeration * p[i * n + j] - q) * num[i][j];
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            g
        });

        for i in 0..n {
            for k in 0..2 {
                let g = grad[i][k];
                gains[i][k] = if (g > 0.0) != (update[i][k] > 0.0) { gains[i][k] + 0.2 } else { gains[i][k] * 0.8 };
                gains[i][k] = gains[i][k].max(0.01);
                update[i][k] = momentum * update[i][k] - cfg.learning_rate * gains[i][k] * g;
                y[i][k] += update[i][k];
            }
        }
        for k in 0..2 {
            let mean = y.iter().map(|v| v[k]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[k] -= mean);
        }
        if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::invalid("tsne", format!("embedding diverged at iteration {iter}")));
        }
    }

    Ok(Tsne { coords: Tensor::new(vec![n, 2], y.concat())?, kl, perplexity })
}
