//! Three-phase training: autoencoder pretraining, interpolator fitting
//! against frozen teacher codes, then joint masked reconstruction.
//!
//! Phase 1 updates `enc.*` and `dec.*` only. Phase 2 updates `interp.*`
//! only. Phase 3 updates everything. A fresh mask is drawn per batch in
//! phases 2 and 3, and the optimizer restarts at every phase boundary.
//!
//! Per-sample gradients are computed independently (in parallel when
//! enabled) and summed in batch order, so results do not depend on the
//! execution mode.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, FORMAT_VERSION};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::autodiff::{Gradients, Graph, Tensor};
use crate::data::{patchify, sample_mask, MaskPattern, MaskSpec, Series};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{self, ModelBundle, DECODER, ENCODER, INTERPOLATOR};
use crate::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// epochs for phases 1, 2 and 3; zero skips a phase
    pub epochs: [usize; 3],
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// mask drawn per batch in phases 2 and 3
    pub mask: MaskSpec,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    /// Defaults for a model with `t` patches: 200/200/400 epochs, batch 32,
    /// Adam(1e-3, 0.9, 0.999, 1e-8), `⌈t/3⌉` uniformly masked patches.
    pub fn new(t: usize) -> Self {
        TrainConfig {
            epochs: [200, 200, 400],
            batch_size: 32,
            adam: AdamConfig::default(),
            mask: MaskSpec::Uniform { m: t.div_ceil(3) },
            seed: 0,
            shuffle: true,
        }
    }

    pub fn validate(&self, t: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let a = &self.adam;
        if !(0.0 < a.beta1 && a.beta1 < 1.0 && 0.0 < a.beta2 && a.beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if !(a.lr > 0.0 && a.eps > 0.0) {
            return Err(Error::Config("learning rate and epsilon must be positive".into()));
        }
        if self.epochs[1] + self.epochs[2] > 0 {
            self.mask.check(t)?;
            if self.mask.masked_count() >= t {
                return Err(Error::Config(format!("mask {} leaves no visible patch out of {t}", self.mask)));
            }
        }
        if self.epochs[1] > 0 && self.mask.masked_count() == 0 {
            return Err(Error::Config("embedding loss undefined with no masked patches".into()));
        }
        Ok(())
    }
}

/// Phase (1..=3, or 4 once finished) and the number of epochs completed in it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Progress {
    pub phase: u8,
    pub epoch: usize,
}

impl Progress {
    pub const START: Progress = Progress { phase: 1, epoch: 0 };

    pub fn is_done(&self) -> bool {
        self.phase > 3
    }
}

/// Mean training loss of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub phase: u8,
    /// 1-based within the phase
    pub epoch: usize,
    pub loss: f64,
}

/// Normalizes, patchifies and flattens series to `[T, P*C]` training grids.
pub fn prepare(bundle: &ModelBundle, series: &[Series]) -> Result<Vec<Tensor>> {
    let cfg = &bundle.config;
    series
        .iter()
        .map(|s| {
            let n = bundle.norm.apply(s)?;
            let g = patchify(&n, cfg.p)?;
            if g.t() != cfg.t || g.c() != cfg.c {
                return Err(Error::invalid(
                    "prepare",
                    format!("series {:?} gives a {}x{}x{} grid, model expects {}x{}x{}", s.id, g.t(), g.p(), g.c(), cfg.t, cfg.p, cfg.c),
                ));
            }
            Ok(g.patches.reshape(&[cfg.t, cfg.patch_width()])?)
        })
        .collect()
}

fn trainable(phase: u8) -> impl Fn(&str) -> bool {
    move |name: &str| match phase {
        1 => name.starts_with(ENCODER) || name.starts_with(DECODER),
        2 => name.starts_with(INTERPOLATOR),
        _ => true,
    }
}

/// Encoder codes for the masked slots of `x` (`[T, P*C]`), computed with
/// every patch visible, stacked as `[M, d]`.
pub fn teacher_codes(bundle: &ModelBundle, x: &Tensor, mask: &MaskPattern) -> Result<Tensor> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone())?;
    let codes = model::encode_graph(&mut g, bundle, xv)?;
    let d = bundle.config.latent_dim;
    let data = mask.masked().iter().flat_map(|&s| g.value(codes[s]).data().to_vec()).collect();
    Ok(Tensor::new(vec![mask.m(), d], data)?)
}

/// Loss and gradient for one training grid.
pub fn sample_gradient(bundle: &ModelBundle, phase: u8, x: &Tensor, mask: &MaskPattern) -> Result<(f64, Gradients)> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone())?;
    let loss = match phase {
        1 => {
            let codes = model::encode_graph(&mut g, bundle, xv)?;
            let x_hat = model::decode_graph(&mut g, bundle, &codes)?;
            model::loss_auto(&mut g, &[xv], &[x_hat])?
        }
        2 => {
            let teacher = teacher_codes(bundle, x, mask)?;
            g.freeze_prefix(ENCODER);
            let restored = restore_masked_graph(&mut g, bundle, xv, mask)?;
            model::loss_embed(&mut g, &[teacher], &[restored])?
        }
        3 => {
            let x_hat = model::reconstruct_graph(&mut g, bundle, xv, mask)?;
            model::loss_recon(&mut g, &[xv], &[x_hat])?
        }
        _ => return Err(Error::invalid("train", format!("no phase {phase}"))),
    };
    let value = g.value(loss).item();
    let grads = g.backward(loss, &bundle.params)?;
    Ok((value, grads))
}

/// Interpolator output at the masked slots of `mask`, as `[M, d]`, from the
/// visible rows of `x` only.
/// Encodes the visible rows of `x` (`[T, P*C]`), interpolates, and stacks
/// the restored codes at the masked slots as `[M, d]`.
pub fn restore_masked_graph(g: &mut Graph, bundle: &ModelBundle, x: crate::autodiff::Var, mask: &MaskPattern) -> Result<crate::autodiff::Var> {
    let visible = mask.visible();
    let rows = visible.iter().map(|&t| g.slice(x, 0, t, t + 1)).collect::<Result<Vec<_>, _>>()?;
    let vis = g.concat(&rows, 0)?;
    let codes = model::encode_graph(g, bundle, vis)?;
    let mut slots = vec![None; bundle.config.t];
    for (&t, c) in visible.iter().zip(codes) {
        slots[t] = Some(c);
    }
    let restored = model::interpolate_graph(g, bundle, &slots)?;
    let picked: Vec<_> = mask.masked().iter().map(|&s| restored[s]).collect();
    Ok(g.concat(&picked, 0)?)
}

/// Drives the three phases over a fixed training set.
#[derive(Debug)]
pub struct Trainer {
    pub bundle: ModelBundle,
    pub config: TrainConfig,
    progress: Progress,
    optimizer: AdamState,
    rng: SeededRng,
    execution: Execution,
}

impl Trainer {
    pub fn new(bundle: ModelBundle, config: TrainConfig) -> Result<Self> {
        bundle.validate()?;
        config.validate(bundle.config.t)?;
        let optimizer = AdamState::new(&bundle.params);
        let rng = SeededRng::seed_from_u64(config.seed);
        Ok(Trainer { bundle, config, progress: Progress::START, optimizer, rng, execution: Execution::default() })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.bundle.validate()?;
        ckpt.config.validate(ckpt.bundle.config.t)?;
        Ok(Trainer {
            bundle: ckpt.bundle,
            config: ckpt.config,
            progress: ckpt.progress,
            optimizer: ckpt.optimizer,
            rng: ckpt.rng,
            execution: Execution::default(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            bundle: self.bundle.clone(),
            config: self.config.clone(),
            progress: self.progress,
            optimizer: self.optimizer.clone(),
            rng: self.rng.clone(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    /// Moves past finished or skipped phases, restarting the optimizer on
    /// each boundary crossed.
    fn settle(&mut self) {
        while !self.progress.is_done() && self.progress.epoch >= self.config.epochs[usize::from(self.progress.phase - 1)] {
            self.progress = Progress { phase: self.progress.phase + 1, epoch: 0 };
            self.optimizer = AdamState::new(&self.bundle.params);
        }
    }

    /// Runs one epoch of the current phase, or returns `None` when training
    /// is finished.
    pub fn run_epoch(&mut self, data: &[Tensor]) -> Result<Option<EpochLog>> {
        self.settle();
        if self.progress.is_done() {
            return Ok(None);
        }
        if data.is_empty() {
            return Err(Error::invalid("train", "no training data"));
        }
        let phase = self.progress.phase;
        let epoch = self.progress.epoch;
        let mut order: Vec<usize> = (0..data.len()).collect();
        if self.config.shuffle {
            order.shuffle(&mut self.rng);
        }
        let t = self.bundle.config.t;
        let mut total = 0.0;
        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let mask = match phase {
                1 => MaskPattern::empty(t),
                _ => sample_mask(t, self.config.mask, &mut self.rng)?,
            };
            let located = |e: Error| Error::Training { phase, epoch: epoch + 1, batch: b, source: Box::new(e) };
            let bundle = &self.bundle;
            let results = self
                .execution
                .try_map(batch, |&i| sample_gradient(bundle, phase, &data[i], &mask))
                .map_err(located)?;

            let mut grads = bundle.params.zeros_like();
            let mut batch_loss = 0.0;
            for (l, g) in &results {
                batch_loss += l;
                grads.accumulate(g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { phase, epoch: epoch + 1, batch: b });
            }
            total += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut self.bundle.params, &grads, &mut self.optimizer, &self.config.adam, trainable(phase));
        }
        self.progress.epoch += 1;
        Ok(Some(EpochLog { phase, epoch: epoch + 1, loss: total / data.len() as f64 }))
    }

    /// Trains to completion, or until `stop` holds at an epoch boundary.
    pub fn run_until(&mut self, data: &[Tensor], mut stop: impl FnMut(Progress) -> bool, mut on_epoch: impl FnMut(&EpochLog)) -> Result<Vec<EpochLog>> {
        let mut logs = Vec::new();
        loop {
            self.settle();
            if stop(self.progress) {
                break;
            }
            match self.run_epoch(data)? {
                Some(log) => {
                    on_epoch(&log);
                    logs.push(log);
                }
                None => break,
            }
        }
        Ok(logs)
    }

    pub fn run(&mut self, data: &[Tensor]) -> Result<Vec<EpochLog>> {
        self.run_until(data, |_| false, |_| {})
    }
}

/// Runs only phase 1 with `cfg`, returning the updated bundle and its log.
pub fn phase1_pretrain(bundle: ModelBundle, data: &[Tensor], cfg: &TrainConfig) -> Result<(ModelBundle, Vec<EpochLog>)> {
    run_single_phase(bundle, data, cfg, 0)
}

/// Runs only phase 2 with `cfg`.
pub fn phase2_interpolator(bundle: ModelBundle, data: &[Tensor], cfg: &TrainConfig) -> Result<(ModelBundle, Vec<EpochLog>)> {
    run_single_phase(bundle, data, cfg, 1)
}

/// Runs only phase 3 with `cfg`.
pub fn phase3_joint(bundle: ModelBundle, data: &[Tensor], cfg: &TrainConfig) -> Result<(ModelBundle, Vec<EpochLog>)> {
    run_single_phase(bundle, data, cfg, 2)
}

fn run_single_phase(bundle: ModelBundle, data: &[Tensor], cfg: &TrainConfig, idx: usize) -> Result<(ModelBundle, Vec<EpochLog>)> {
    let mut only = cfg.clone();
    for (i, e) in only.epochs.iter_mut().enumerate() {
        if i != idx {
            *e = 0;
        }
    }
    let mut trainer = Trainer::new(bundle, only)?;
    let logs = trainer.run(data)?;
    Ok((trainer.bundle, logs))
}

/// Held-out embedding loss against the zero-prediction baseline, one mask
/// per grid drawn from `seed`. Returns `(mean loss, mean baseline)`.
pub fn evaluate_embed(bundle: &ModelBundle, data: &[Tensor], spec: MaskSpec, seed: u64, execution: Execution) -> Result<(f64, f64)> {
    let mut rng = SeededRng::seed_from_u64(seed);
    let t = bundle.config.t;
    let masks = data.iter().map(|_| sample_mask(t, spec, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let pairs = execution.try_map(&idx, |&i| -> Result<(f64, f64)> {
        let teacher = teacher_codes(bundle, &data[i], &masks[i])?;
        let mut g = Graph::new();
        let xv = g.constant(data[i].clone())?;
        let restored = restore_masked_graph(&mut g, bundle, xv, &masks[i])?;
        let loss = model::loss_embed(&mut g, std::slice::from_ref(&teacher), &[restored])?;
        let zero = g.constant(Tensor::zeros(teacher.shape()))?;
        let base = model::loss_embed(&mut g, &[teacher], &[zero])?;
        Ok((g.value(loss).item(), g.value(base).item()))
    })?;
    let n = data.len() as f64;
    Ok((pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n))
}

/// Writes `phase,epoch,loss` rows.
pub fn write_log(mut w: impl Write, logs: &[EpochLog]) -> std::io::Result<()> {
    writeln!(w, "phase,epoch,loss")?;
    for l in logs {
        writeln!(w, "{},{},{}", l.phase, l.epoch, l.loss)?;
    }
    Ok(())
}

pub fn save_log(path: impl AsRef<Path>, logs: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let f = std::fs::File::create(path).map_err(io)?;
    write_log(std::io::BufWriter::new(f), logs).map_err(io)
}
