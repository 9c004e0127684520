//! Acceptance harness: one PASS/FAIL line per criterion. Exits nonzero on a
//! failure only under `ACCEPTANCE_STRICT=1`.
//!
//! The model for criteria 2–8 is trained once, with the default
//! configuration, on 256 sine series (seed 17). A further 64 series from the
//! same draw are held out.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use tsmae::autodiff::{grad_check, Graph, ParamStore, Tensor, TensorError, Var};
use tsmae::data::{generate_sines, patchify, sample_mask, unpatchify, MaskPattern, MaskSpec, NormStats, Series};
use tsmae::eval::{diversity_report, ks_statistic, pca_project, tsne_project, TsneConfig};
use tsmae::generate::{denoise, impute, synthesize};
use tsmae::model::{self, init_params, ModelBundle, ModelConfig};
use tsmae::train::{self, evaluate_embed, prepare, read_checkpoint, write_checkpoint, EpochLog, TrainConfig, Trainer};
use tsmae::{Execution, SeededRng};

const SEED: u64 = 17;
const N_TRAIN: usize = 256;
const N_HELD: usize = 64;
const LEN: usize = 24;
const CHANNELS: usize = 5;
const PATCH: usize = 4;

const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_BUDGET_SECS: f64 = 60.0;
const PHASE1_RATIO: f64 = 0.5;
const PHASE1_BUDGET_SECS: f64 = 600.0;
const NOISE_STD: f64 = 0.1;
const PRINCIPAL_ANGLE_TOL: f64 = 1e-6;
const KS_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(n: u8, name: &str, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {tag} {name}: {}", o.detail);
}

fn tensor_err(e: tsmae::Error) -> TensorError {
    match e {
        tsmae::Error::Tensor(t) => t,
        other => TensorError::Shape { op: "model", detail: other.to_string() },
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

// ---------------------------------------------------------------- 1

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut cfg = ModelConfig::new(3, 2, 1);
    cfg.latent_dim = 2;
    cfg.enc_hidden = 4;
    cfg.dec_hidden = 4;
    cfg.interp_hidden = 4;
    cfg.seed = SEED;
    let series = generate_sines(2, 6, 1, SEED).unwrap();
    let base = init_params(&cfg).unwrap().with_norm(NormStats::fit(&series).unwrap());
    let grids = prepare(&base, &series).unwrap();
    let mask = MaskPattern::new(3, [1]).unwrap();
    // teacher codes are a fixed target: computed once from the starting weights
    let teachers: Vec<Tensor> = grids.iter().map(|x| train::teacher_codes(&base, x, &mask).unwrap()).collect();

    let with = |s: &ParamStore| ModelBundle { params: s.clone(), ..base.clone() };
    let inputs = |g: &mut Graph| -> Result<Vec<Var>, TensorError> { grids.iter().map(|x| g.constant(x.clone())).collect() };

    let auto = |g: &mut Graph, s: &ParamStore| -> Result<Var, TensorError> {
        let b = with(s);
        let xs = inputs(g)?;
        let mut outs = Vec::new();
        for &x in &xs {
            let codes = model::encode_graph(g, &b, x).map_err(tensor_err)?;
            outs.push(model::decode_graph(g, &b, &codes).map_err(tensor_err)?);
        }
        model::loss_auto(g, &xs, &outs).map_err(tensor_err)
    };
    let embed = |g: &mut Graph, s: &ParamStore| -> Result<Var, TensorError> {
        let b = with(s);
        let xs = inputs(g)?;
        let mut restored = Vec::new();
        for &x in &xs {
            restored.push(train::restore_masked_graph(g, &b, x, &mask).map_err(tensor_err)?);
        }
        model::loss_embed(g, &teachers, &restored).map_err(tensor_err)
    };
    let recon = |g: &mut Graph, s: &ParamStore| -> Result<Var, TensorError> {
        let b = with(s);
        let xs = inputs(g)?;
        let mut outs = Vec::new();
        for &x in &xs {
            outs.push(model::reconstruct_graph(g, &b, x, &mask).map_err(tensor_err)?);
        }
        model::loss_recon(g, &xs, &outs).map_err(tensor_err)
    };

    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut parts = Vec::new();
    for (name, r) in [
        ("L_auto", grad_check(auto, &base.params, GRAD_STEP)),
        ("L_embed", grad_check(embed, &base.params, GRAD_STEP)),
        ("L_recon", grad_check(recon, &base.params, GRAD_STEP)),
    ] {
        match r {
            Ok(r) => {
                worst = worst.max(r.max_rel_error);
                entries += r.entries;
                parts.push(format!("{name} {:.1e}", r.max_rel_error));
            }
            Err(e) => return outcome(false, format!("{name}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < GRAD_REL_TOL && secs < GRAD_BUDGET_SECS,
        format!("{} over {entries} entries (tol {GRAD_REL_TOL:.0e}), {secs:.1}s", parts.join(", ")),
    )
}

// ---------------------------------------------------------------- shared run

struct Trained {
    config: TrainConfig,
    held: Vec<Series>,
    held_grids: Vec<Tensor>,
    logs: Vec<EpochLog>,
    after_phase2: ModelBundle,
    bundle: ModelBundle,
    checkpoint: tsmae::train::Checkpoint,
    phase1_secs: f64,
    rerun_logs: Vec<EpochLog>,
}

fn train_shared() -> tsmae::Result<Trained> {
    let all = generate_sines(N_TRAIN + N_HELD, LEN, CHANNELS, SEED)?;
    let (train_set, held) = all.split_at(N_TRAIN);
    let mut model_cfg = ModelConfig::new(LEN / PATCH, PATCH, CHANNELS);
    model_cfg.seed = SEED;
    let bundle = init_params(&model_cfg)?.with_norm(NormStats::fit(train_set)?);
    let grids = prepare(&bundle, train_set)?;
    let held_grids = prepare(&bundle, held)?;
    let mut config = TrainConfig::new(model_cfg.t);
    config.seed = SEED;

    let mut trainer = Trainer::new(bundle.clone(), config.clone())?;
    let start = Instant::now();
    let mut phase1_secs = 0.0;
    let mut logs = trainer.run_until(&grids, |p| p.phase == 2, |_| {})?;
    phase1_secs += start.elapsed().as_secs_f64();
    logs.extend(trainer.run_until(&grids, |p| p.phase == 3, |_| {})?);
    let after_phase2 = trainer.bundle.clone();
    logs.extend(trainer.run(&grids)?);

    // determinism: replay the opening epochs from scratch
    let mut replay = Trainer::new(bundle, config.clone())?;
    let mut rerun_logs = Vec::new();
    for _ in 0..10 {
        rerun_logs.extend(replay.run_epoch(&grids)?);
    }

    Ok(Trained {
        config,
        held: held.to_vec(),
        held_grids,
        logs,
        after_phase2,
        checkpoint: trainer.checkpoint(),
        bundle: trainer.bundle,
        phase1_secs,
        rerun_logs,
    })
}

fn phase_logs(logs: &[EpochLog], phase: u8) -> Vec<&EpochLog> {
    logs.iter().filter(|l| l.phase == phase).collect()
}

// ---------------------------------------------------------------- 2–4

fn criterion_phase1(t: &Trained) -> Outcome {
    let p1 = phase_logs(&t.logs, 1);
    let (first, last) = (p1[0].loss, p1[p1.len() - 1].loss);
    let replay_ok = t.rerun_logs.iter().zip(&t.logs).all(|(a, b)| a == b) && t.rerun_logs.len() == 10;
    outcome(
        last < PHASE1_RATIO * first && replay_ok && t.phase1_secs < PHASE1_BUDGET_SECS,
        format!(
            "L_auto {first:.4} -> {last:.4} over {} epochs (ratio {:.3} < {PHASE1_RATIO}), replay of first 10 epochs {}, {:.0}s",
            p1.len(),
            last / first,
            if replay_ok { "bitwise identical" } else { "DIFFERS" },
            t.phase1_secs
        ),
    )
}

fn criterion_interpolator(t: &Trained) -> Outcome {
    match evaluate_embed(&t.after_phase2, &t.held_grids, t.config.mask, SEED + 1, Execution::default()) {
        Ok((loss, baseline)) => outcome(
            loss < baseline,
            format!("held-out L_embed {loss:.4} vs zero-prediction baseline {baseline:.4} ({} series)", t.held_grids.len()),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_joint(t: &Trained) -> Outcome {
    let p3 = phase_logs(&t.logs, 3);
    let (first, last) = (p3[0].loss, p3[p3.len() - 1].loss);
    outcome(last < first, format!("L_recon {first:.4} -> {last:.4} over {} epochs, mask {}", p3.len(), t.config.mask))
}

// ---------------------------------------------------------------- 5

fn criterion_no_mask_token(bundle: &ModelBundle) -> Outcome {
    let c = &bundle.config;
    let (d, w) = (c.latent_dim, c.p * c.c);
    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    for (prefix, layers, input, hidden) in [("enc", c.enc_layers, w, c.enc_hidden), ("dec", c.dec_layers, d, c.dec_hidden)] {
        for l in 0..layers {
            let fan_in = if l == 0 { input } else { hidden };
            for gate in ["z", "r", "n"] {
                expected.push((format!("{prefix}.gru{l}.w_{gate}"), vec![fan_in, hidden]));
                expected.push((format!("{prefix}.gru{l}.u_{gate}"), vec![hidden, hidden]));
                expected.push((format!("{prefix}.gru{l}.b_{gate}"), vec![1, hidden]));
            }
        }
        let out = if prefix == "enc" { d } else { w };
        expected.push((format!("{prefix}.proj.w"), vec![hidden, out]));
        expected.push((format!("{prefix}.proj.b"), vec![1, out]));
    }
    let mut widths = vec![c.t * (d + 1)];
    widths.extend(std::iter::repeat_n(c.interp_hidden, c.interp_layers));
    widths.push(c.t * d);
    for k in 0..widths.len() - 1 {
        expected.push((format!("interp.fc{k}.w"), vec![widths[k], widths[k + 1]]));
        expected.push((format!("interp.fc{k}.b"), vec![1, widths[k + 1]]));
    }
    expected.sort();
    let mut actual: Vec<(String, Vec<usize>)> = bundle.params.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
    actual.sort();

    let suspicious: Vec<&String> =
        actual.iter().map(|(n, _)| n).filter(|n| n.contains("mask") || n.contains("token") || n.contains("embed")).collect();
    // masked slots enter the interpolator as exact zeros
    let grid = patchify(&bundle.norm.apply(&generate_sines(1, LEN, CHANNELS, 3).unwrap()[0]).unwrap(), PATCH).unwrap();
    let visible = [0, 2, 3, 5];
    let vis_patches: Vec<f64> = visible.iter().flat_map(|&s| grid.patch(s).to_vec()).collect();
    let latent = model::encode(bundle, &Tensor::new(vec![4, PATCH, CHANNELS], vis_patches).unwrap(), &visible).unwrap();
    let zero_filled = [1, 4].iter().all(|&s| latent.code(s).iter().all(|&v| v == 0.0));

    let pass = actual == expected && suspicious.is_empty() && zero_filled;
    outcome(
        pass,
        format!(
            "{} tensors match the hand-built inventory: {}; mask/token-like names: {}; masked slots zero-filled: {zero_filled}",
            actual.len(),
            actual == expected,
            suspicious.len()
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_identities(t: &Trained) -> Outcome {
    let b = &t.bundle;
    let mut rng = SeededRng::seed_from_u64(SEED + 6);
    let mut identity = true;
    let mut splice = true;
    let mut patches = true;
    for s in &t.held {
        let syn = synthesize(b, s, MaskSpec::Uniform { m: 0 }, &mut rng).unwrap();
        identity &= syn == denoise(b, s).unwrap();
        let m = rng.random_range(1..b.config.t);
        let mask = sample_mask(b.config.t, MaskSpec::Uniform { m }, &mut rng).unwrap();
        let out = impute(b, s, &mask).unwrap();
        let w = PATCH * CHANNELS;
        for v in mask.visible() {
            splice &= out.values.data()[v * w..(v + 1) * w] == s.values.data()[v * w..(v + 1) * w];
        }
        patches &= unpatchify(&patchify(s, PATCH).unwrap()).unwrap() == *s;
    }
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &t.checkpoint).unwrap();
    let back = read_checkpoint(bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_checkpoint(&mut again, &back).unwrap();
    let ckpt = back == t.checkpoint && again == bytes;
    outcome(
        identity && splice && patches && ckpt,
        format!(
            "M=0 synthesis == denoise: {identity}; observed patches untouched by impute: {splice}; patch round trip: {patches}; checkpoint round trip ({} bytes): {ckpt}",
            bytes.len()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_diversity(t: &Trained) -> Outcome {
    let b = &t.bundle;
    let spec = MaskSpec::Uniform { m: 2 };
    let mut min_dist = f64::INFINITY;
    for s in t.held.iter().take(16) {
        let copies: Vec<Series> =
            [1u64, 2, 3].iter().map(|&seed| synthesize(b, s, spec, &mut SeededRng::seed_from_u64(seed)).unwrap()).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                let d = mse(copies[i].values.data(), copies[j].values.data()).sqrt();
                min_dist = min_dist.min(d);
            }
        }
    }
    let zero_group: Vec<Series> = [1u64, 2, 3]
        .iter()
        .map(|&seed| synthesize(b, &t.held[0], MaskSpec::Uniform { m: 0 }, &mut SeededRng::seed_from_u64(seed)).unwrap())
        .collect();
    let zero = diversity_report(&[("m0".into(), zero_group)], Execution::default()).unwrap().grand_mean;
    outcome(
        min_dist > 0.0 && zero == 0.0,
        format!("smallest pairwise RMS distance across 3 seeds (16 series, {spec}) {min_dist:.3e}; M=0 group diversity {zero}"),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_downstream(t: &Trained) -> Outcome {
    let b = &t.bundle;
    let mut rng = SeededRng::seed_from_u64(SEED + 8);
    let noise = Normal::new(0.0, NOISE_STD).unwrap();
    let (mut imp, mut fill, mut den, mut noisy, mut clean) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &t.held {
        let slot = rng.random_range(0..b.config.t);
        let out = impute(b, s, &MaskPattern::new(b.config.t, [slot]).unwrap()).unwrap();
        for c in 0..CHANNELS {
            let observed: Vec<f64> = (0..LEN).filter(|i| i / PATCH != slot).map(|i| s.get(i, c)).collect();
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            for i in slot * PATCH..(slot + 1) * PATCH {
                imp += (out.get(i, c) - s.get(i, c)).powi(2);
                fill += (mean - s.get(i, c)).powi(2);
            }
        }
        let mut corrupted = s.clone();
        corrupted.values.data_mut().iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        den += mse(denoise(b, &corrupted).unwrap().values.data(), s.values.data());
        noisy += mse(corrupted.values.data(), s.values.data());
        clean += mse(denoise(b, s).unwrap().values.data(), s.values.data());
    }
    let n = t.held.len() as f64;
    let cells = n * (PATCH * CHANNELS) as f64;
    let (imp, fill, den, noisy, clean) = (imp / cells, fill / cells, den / n, noisy / n, clean / n);
    outcome(
        imp < fill && den < noisy,
        format!(
            "imputation MSE {imp:.5} vs column-mean fill {fill:.5}; denoised MSE {den:.5} vs noisy input {noisy:.5} (noise std {NOISE_STD}); same path on clean input {clean:.5}"
        ),
    )
}

// ---------------------------------------------------------------- 9

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns
/// (eigenvalues, eigenvectors as columns), unsorted.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for k in 0..n {
                    a[p][k] = c * rp[k] - s * rq[k];
                    a[q][k] = s * rp[k] + c * rq[k];
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn pca_oracle_check() -> (bool, String) {
    let mut rng = SeededRng::seed_from_u64(SEED + 9);
    let (n, dim) = (50, 6);
    // distinct column scales keep the leading eigenvalues well separated
    let data: Vec<f64> = (0..n * dim).map(|i| rng.random_range(-1.0..1.0) * (1.0 + (i % dim) as f64)).collect();
    let x = Tensor::new(vec![n, dim], data.clone()).unwrap();
    let mean: Vec<f64> = (0..dim).map(|j| (0..n).map(|i| data[i * dim + j]).sum::<f64>() / n as f64).collect();
    let cov: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| (0..n).map(|i| (data[i * dim + a] - mean[a]) * (data[i * dim + b] - mean[b])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    let (vals, vecs) = jacobi(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

    let pca = pca_project(&x, 2).unwrap();
    let comps: Vec<&[f64]> = (0..2).map(|k| &pca.components.data()[k * dim..(k + 1) * dim]).collect();
    // sine of the largest principal angle = largest residual of an oracle
    // vector after projection onto the computed subspace
    let mut worst = 0.0f64;
    for &k in &order[..2] {
        let u: Vec<f64> = (0..dim).map(|r| vecs[r][k]).collect();
        let mut resid = u.clone();
        for c in &comps {
            let dot: f64 = u.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            resid.iter_mut().zip(c.iter()).for_each(|(r, b)| *r -= dot * b);
        }
        worst = worst.max(resid.iter().map(|r| r * r).sum::<f64>().sqrt());
    }
    (worst < PRINCIPAL_ANGLE_TOL, format!("PCA top-2 vs Jacobi: max sin(angle) {worst:.1e}"))
}

fn tsne_check() -> (bool, String) {
    let mut rng = SeededRng::seed_from_u64(SEED + 10);
    let sigma = 1.0;
    let normal = Normal::new(0.0, sigma).unwrap();
    let (per, dim) = (30, 10);
    let offset = 50.0 * sigma / (dim as f64).sqrt();
    let mut data = Vec::new();
    for cluster in 0..2 {
        for _ in 0..per {
            for _ in 0..dim {
                data.push(normal.sample(&mut rng) + if cluster == 1 { offset } else { 0.0 });
            }
        }
    }
    let x = Tensor::new(vec![2 * per, dim], data).unwrap();
    let t = tsne_project(&x, &TsneConfig { seed: SEED, ..TsneConfig::default() }, Execution::default()).unwrap();
    let (k0, kn) = (t.kl[0], t.kl[t.kl.len() - 1]);
    let y = t.coords.data();
    let centroid = |c: usize| -> [f64; 2] {
        let rows = c * per..(c + 1) * per;
        let sx: f64 = rows.clone().map(|i| y[2 * i]).sum();
        let sy: f64 = rows.map(|i| y[2 * i + 1]).sum();
        [sx / per as f64, sy / per as f64]
    };
    let (a, b) = (centroid(0), centroid(1));
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let dir = [b[0] - a[0], b[1] - a[1]];
    let side = |i: usize| (y[2 * i] - mid[0]) * dir[0] + (y[2 * i + 1] - mid[1]) * dir[1];
    let separated = (0..per).all(|i| side(i) < 0.0) && (per..2 * per).all(|i| side(i) > 0.0);
    (kn < k0 && separated, format!("t-SNE KL {k0:.3} -> {kn:.3}, clusters split by bisector: {separated}"))
}

fn ks_check() -> (bool, String) {
    let mut rng = SeededRng::seed_from_u64(SEED + 11);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let (n, m) = (rng.random_range(1..40), rng.random_range(1..40));
        // coarse grid values force ties
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| f64::from(rng.random_range(0..12u8)) * 0.25 + trial as f64 * 0.0).collect() };
        let (a, b) = (draw(n), draw(m));
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let brute = a.iter().chain(&b).map(|&x| (cdf(&a, x) - cdf(&b, x)).abs()).fold(0.0, f64::max);
        worst = worst.max((ks_statistic(&a, &b).unwrap() - brute).abs());
    }
    (worst <= KS_TOL, format!("KS vs brute force (200 tied samples): max gap {worst:.1e}"))
}

fn criterion_eval_oracles() -> Outcome {
    let checks = [pca_oracle_check(), tsne_check(), ks_check()];
    outcome(checks.iter().all(|c| c.0), checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; "))
}

// ---------------------------------------------------------------- 10

fn tsmae(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tsmae")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`tsmae {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn projection_rows(path: &Path) -> Result<(usize, usize), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("x,y,label") {
        return Err(format!("{} lacks the x,y,label header", path.display()));
    }
    let (mut real, mut synth) = (0, 0);
    for l in lines {
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != 3 || cells[0].parse::<f64>().is_err() || cells[1].parse::<f64>().is_err() {
            return Err(format!("malformed row {l:?} in {}", path.display()));
        }
        match cells[2] {
            "real" => real += 1,
            "synth" => synth += 1,
            other => return Err(format!("unknown label {other:?}")),
        }
    }
    Ok((real, synth))
}

/// A geometric random walk with a date column, standing in for a
/// user-supplied price file.
fn write_stocks_like(path: &Path) {
    let mut rng = SeededRng::seed_from_u64(SEED + 12);
    let step = Normal::new(0.0005, 0.015).unwrap();
    let mut text = String::from("Date,Open,High,Low,Close,Volume\n");
    let mut price: f64 = 100.0;
    for day in 0..240 {
        let open = price;
        let r: f64 = step.sample(&mut rng);
        price *= r.exp();
        let (hi, lo) = (open.max(price) * 1.004, open.min(price) * 0.996);
        let volume = 1e6 * (1.0 + 0.3 * rng.random_range(-1.0..1.0f64));
        text.push_str(&format!("2024-{:02}-{:02},{open},{hi},{lo},{price},{volume}\n", 1 + day / 28, 1 + day % 28));
    }
    std::fs::write(path, text).unwrap();
}

fn criterion_figures() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_stocks_like(&d.join("stocks.csv"));
    let quick = ["--epochs1", "20", "--epochs2", "20", "--epochs3", "20", "--seed", "17"];
    let run = || -> Result<Vec<String>, String> {
        tsmae(&["sines", "--n", "64", "--len", "24", "--channels", "5", "--seed", "17", "--out", "sines.csv"], d)?;
        let mut summary = Vec::new();
        for (name, data_flags) in [
            ("sines", vec!["--data", "sines.csv"]),
            ("stocks", vec!["--data", "stocks.csv", "--skip-columns", "Date", "--window", "24", "--stride", "6"]),
        ] {
            let ckpt = format!("{name}.ckpt");
            let log = format!("{name}_log.csv");
            let synth = format!("{name}_synth.csv");
            let mut train_args = vec!["train"];
            train_args.extend(&data_flags);
            train_args.extend(quick);
            train_args.extend(["--out-ckpt", &ckpt, "--log", &log]);
            tsmae(&train_args, d)?;
            let mut gen_args = vec!["augment", "--ckpt", &ckpt, "--k", "2", "--seed", "17", "--out", &synth];
            gen_args.extend(&data_flags);
            tsmae(&gen_args, d)?;
            let mut eval_args = vec!["evaluate", "--synth", &synth, "--ckpt", &ckpt, "--out-dir", "figures", "--prefix", name, "--iters", "500"];
            eval_args.extend(&data_flags);
            tsmae(&eval_args, d)?;
            for method in ["pca", "tsne"] {
                let (r, s) = projection_rows(&d.join("figures").join(format!("{name}_{method}.csv")))?;
                if r == 0 || s != 2 * r {
                    return Err(format!("{name} {method}: {r} real / {s} synthetic rows"));
                }
                summary.push(format!("{name}_{method}.csv {r}+{s} rows"));
            }
        }
        Ok(summary)
    };
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let script = root.join("scripts/reproduce_figures.sh");
    let readme = std::fs::read_to_string(root.join("README.md")).unwrap_or_default();
    let documented = script.is_file() && readme.contains("scripts/reproduce_figures.sh");
    match run() {
        Ok(summary) => outcome(documented, format!("{}; reproduction script documented: {documented}", summary.join(", "))),
        Err(e) => outcome(false, e),
    }
}

fn main() {
    let mut failed = 0;
    let mut record = |n: u8, name: &str, o: Outcome| {
        report(n, name, &o);
        failed += usize::from(!o.pass);
    };
    record(1, "gradient correctness", criterion_gradients());

    let trained = train_shared().expect("default training run");
    record(2, "phase-1 convergence", criterion_phase1(&trained));
    record(3, "interpolator learning", criterion_interpolator(&trained));
    record(4, "joint-phase improvement", criterion_joint(&trained));
    record(5, "no mask token", criterion_no_mask_token(&trained.bundle));
    record(6, "identity and splice laws", criterion_identities(&trained));
    record(7, "diversity knob", criterion_diversity(&trained));
    record(8, "downstream sanity", criterion_downstream(&trained));
    record(9, "evaluation oracles", criterion_eval_oracles());
    record(10, "figure-analogue pipeline", criterion_figures());

    println!("{} of 10 criteria passed", 10 - failed);
    // FAIL lines are reported, not hidden; set ACCEPTANCE_STRICT=1 to turn
    // them into a failing exit status as well
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
