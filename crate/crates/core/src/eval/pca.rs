use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

/// Principal components found by power iteration with deflation.
#[derive(Clone, Debug)]
pub struct Pca {
    /// `[n, k]` projections of the centered rows
    pub coords: Tensor,
    /// `[k, D]`, orthonormal rows
    pub components: Tensor,
    /// covariance eigenvalues, descending
    pub variances: Vec<f64>,
    /// `variances / total variance`
    pub ratios: Vec<f64>,
    pub mean: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Top-`k` principal components of the rows of `x` (`[n, D]`).
pub fn pca_project(x: &Tensor, k: usize) -> Result<Pca> {
    if x.rank() != 2 {
        return Err(Error::invalid("pca", "input must be [n, D]"));
    }
    let (n, d) = (x.shape()[0], x.shape()[1]);
    if n < 2 {
        return Err(Error::invalid("pca", "need at least two rows"));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::invalid("pca", format!("cannot extract {k} components from {n} rows of width {d}")));
    }

    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.data()[i * d + j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<f64> = x.data().iter().enumerate().map(|(i, v)| v - mean[i % d]).collect();

    let mut cov = vec![0.0; d * d];
    for row in centered.chunks(d) {
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / (n - 1) as f64;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let total: f64 = (0..d).map(|a| cov[a * d + a]).sum();
    if total <= 0.0 {
        return Err(Error::invalid("pca", "data has zero variance"));
    }

    let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * ((i + 1) as f64).sin()).collect();
        orthogonalize(&mut v, &comps);
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let mut w: Vec<f64> = (0..d).map(|a| dot(&cov[a * d..(a + 1) * d], &v)).collect();
            orthogonalize(&mut w, &comps);
            let norm = normalize(&mut w);
            if norm <= 1e-14 * total {
                lambda = 0.0;
                break;
            }
            lambda = norm;
            let delta = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = w;
            if delta < POWER_TOLERANCE {
                break;
            }
        }
        // sign convention: largest-magnitude entry positive
        let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let rayleigh = dot(&v, &(0..d).map(|a| dot(&cov[a * d..(a + 1) * d], &v)).collect::<Vec<_>>());
        if lambda > 0.0 {
            lambda = rayleigh;
        }
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        variances.push(lambda);
        comps.push(v);
    }

    let coords = centered.chunks(d).flat_map(|row| comps.iter().map(move |c| dot(row, c))).collect();
    Ok(Pca {
        coords: Tensor::new(vec![n, k], coords)?,
        components: Tensor::new(vec![k, d], comps.concat())?,
        ratios: variances.iter().map(|v| v / total).collect(),
        variances,
        mean,
    })
}
