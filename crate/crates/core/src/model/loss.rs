use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// `Σ_r sqrt_eps(Σ_j (a[r,j] − b[r,j])²)` over the rows of two `[R, W]`
/// tensors: the sum of unsquared per-row Euclidean distances.
pub fn patch_distance_sum(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    let diff = g.sub(a, b)?;
    let sq = g.mul(diff, diff)?;
    let rows = g.value(sq).shape()[0];
    let mut total = None;
    for r in 0..rows {
        let row = g.slice(sq, 0, r, r + 1)?;
        let s = g.sum(row)?;
        let norm = g.sqrt_eps(s)?;
        total = Some(match total {
            Some(t) => g.add(t, norm)?,
            None => norm,
        });
    }
    total.ok_or_else(|| Error::invalid("loss", "no rows"))
}

fn batch_mean(g: &mut Graph, op: &'static str, a: &[Var], b: &[Var]) -> Result<Var> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(op, format!("batch sizes {} and {} must match and be positive", a.len(), b.len())));
    }
    let mut total = patch_distance_sum(g, a[0], b[0])?;
    for (x, y) in a.iter().zip(b).skip(1) {
        let d = patch_distance_sum(g, *x, *y)?;
        total = g.add(total, d)?;
    }
    Ok(g.scale(total, 1.0 / a.len() as f64)?)
}

/// Autoencoder loss: per-patch distances between originals and
/// reconstructions (each `[T, P*C]`), summed over patches, averaged over the
/// batch.
pub fn loss_auto(g: &mut Graph, x: &[Var], x_hat: &[Var]) -> Result<Var> {
    batch_mean(g, "loss_auto", x, x_hat)
}

/// Reconstruction loss. Same form as [`loss_auto`]; `x_hat` comes from
/// masked inputs passed through encoder, interpolator and decoder.
pub fn loss_recon(g: &mut Graph, x: &[Var], x_hat: &[Var]) -> Result<Var> {
    batch_mean(g, "loss_recon", x, x_hat)
}

/// Embedding loss between teacher codes `[M, d]` and restored codes at the
/// same slots. Teachers enter the tape as constants, so no gradient reaches
/// whatever produced them.
pub fn loss_embed(g: &mut Graph, teacher: &[Tensor], restored: &[Var]) -> Result<Var> {
    if teacher.iter().chain(restored.iter().map(|v| g.value(*v))).any(|t| t.rank() != 2) {
        return Err(Error::invalid("loss_embed", "codes must be [M, d]"));
    }
    if teacher.is_empty() {
        return Err(Error::invalid("loss_embed", "embedding loss undefined with no masked patches"));
    }
    let consts = teacher.iter().map(|t| g.constant(t.clone())).collect::<Result<Vec<_>, _>>()?;
    batch_mean(g, "loss_embed", &consts, restored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, ParamStore};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn value(f: impl FnOnce(&mut Graph) -> Result<Var>) -> f64 {
        let mut g = Graph::new();
        let v = f(&mut g).unwrap();
        g.value(v).item()
    }

    /// Independent double loop over rows and entries.
    fn brute_norm_sum(a: &Tensor, b: &Tensor) -> f64 {
        let (r, w) = (a.shape()[0], a.shape()[1]);
        let mut total = 0.0;
        for i in 0..r {
            let mut s = 0.0;
            for j in 0..w {
                let d = a.data()[i * w + j] - b.data()[i * w + j];
                s += d * d;
            }
            total += (s + 1e-12).sqrt();
        }
        total
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, w: usize) -> Tensor {
        Tensor::new(vec![r, w], (0..r * w).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn identical_inputs_are_near_zero() {
        let x = Tensor::full(&[6, 20], 0.3);
        let l = value(|g| {
            let a = g.constant(x.clone())?;
            let b = g.constant(x.clone())?;
            loss_auto(g, &[a], &[b])
        });
        assert!(l <= 6.0 * 1e-6 + 1e-15, "{l}");
    }

    #[test]
    fn scalar_norm_and_three_four_five() {
        let l = value(|g| {
            let a = g.constant(Tensor::zeros(&[1, 1]))?;
            let b = g.constant(Tensor::full(&[1, 1], 3.0))?;
            loss_auto(g, &[a], &[b])
        });
        assert!((l - 3.0).abs() < 1e-9);

        let l = value(|g| {
            let r = g.constant(Tensor::new(vec![1, 2], vec![3.0, 4.0])?)?;
            loss_embed(g, &[Tensor::zeros(&[1, 2])], &[r])
        });
        assert!((l - 5.0).abs() < 1e-9);
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let (a, b) = (random(&mut rng, 6, 20), random(&mut rng, 6, 20));
            let l = value(|g| {
                let x = g.constant(a.clone())?;
                let y = g.constant(b.clone())?;
                loss_auto(g, &[x], &[y])
            });
            assert!((l - brute_norm_sum(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn recon_equals_auto_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random(&mut rng, 6, 4), random(&mut rng, 6, 4));
        let run = |recon: bool| {
            value(|g| {
                let x = g.constant(a.clone())?;
                let y = g.constant(b.clone())?;
                if recon {
                    loss_recon(g, &[x], &[y])
                } else {
                    loss_auto(g, &[x], &[y])
                }
            })
        };
        assert_eq!(run(true).to_bits(), run(false).to_bits());
        assert!(run(true) >= 0.0);
    }

    #[test]
    fn batch_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<_> = (0..5).map(|_| random(&mut rng, 3, 4)).collect();
        let ys: Vec<_> = (0..5).map(|_| random(&mut rng, 3, 4)).collect();
        let order = [3, 0, 4, 1, 2];
        let mean = |idx: &[usize]| {
            value(|g| {
                let a = idx.iter().map(|&i| g.constant(xs[i].clone())).collect::<Result<Vec<_>, _>>()?;
                let b = idx.iter().map(|&i| g.constant(ys[i].clone())).collect::<Result<Vec<_>, _>>()?;
                loss_auto(g, &a, &b)
            })
        };
        assert!((mean(&[0, 1, 2, 3, 4]) - mean(&order)).abs() < 1e-12);
    }

    #[test]
    fn embed_gradient_reaches_only_restored() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        store.insert("restored", random(&mut rng, 2, 3)).unwrap();
        store.insert("teacher", random(&mut rng, 2, 3)).unwrap();
        let f = |g: &mut Graph, s: &ParamStore| {
            let r = g.param(s, "restored")?;
            let t = g.param(s, "teacher")?;
            let teacher = g.value(t).clone();
            loss_embed(g, &[teacher], &[r]).map_err(|e| match e {
                Error::Tensor(t) => t,
                other => panic!("{other}"),
            })
        };
        let mut g = Graph::new();
        let l = f(&mut g, &store).unwrap();
        let grads = g.backward(l, &store).unwrap();
        assert!(grads.get("teacher").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(grads.get("restored").unwrap().max_abs() > 0.0);

        let report = grad_check(
            |g, s| {
                let r = g.param(s, "restored")?;
                let teacher = store.get("teacher").unwrap().clone();
                loss_embed(g, &[teacher], &[r]).map_err(|e| match e {
                    Error::Tensor(t) => t,
                    other => panic!("{other}"),
                })
            },
            &store,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn embed_rejects_empty_mask_and_shape_mismatch() {
        let mut g = Graph::new();
        let r = g.constant(Tensor::zeros(&[1, 2])).unwrap();
        assert!(loss_embed(&mut g, &[], &[]).is_err());
        assert!(loss_embed(&mut g, &[Tensor::zeros(&[1, 3])], &[r]).is_err());
        let a = g.constant(Tensor::zeros(&[2, 2])).unwrap();
        assert!(loss_auto(&mut g, &[a], &[r]).is_err());
    }
}
