//! `tsmae` command-line driver.
//!
//! Every subcommand writes its data to files and a `<output>.run-manifest`
//! of resolved flags and input hashes next to them. Diagnostics go to
//! stderr. Exit status is 0 on success, 2 on usage errors, 1 otherwise.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use tsmae::data::{self, load_csv_with, sample_mask, write_csv, CsvOptions, MaskPattern, MaskSpec, NormStats, Series};
use tsmae::eval::{self, TsneConfig};
use tsmae::generate::{self, Synthetic};
use tsmae::model::{init_params, ModelBundle, ModelConfig};
use tsmae::train::{self, load_checkpoint, save_checkpoint, TrainConfig, Trainer};
use tsmae::{Execution, SeededRng};

use manifest::{sidecar, Manifest};

#[derive(Parser)]
#[command(name = "tsmae", version, about = "Masked-autoencoder synthesis, imputation and denoising for multivariate time series")]
struct Cli {
    /// Keep all work on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset of random multichannel sine waves
    Sines(SinesArgs),
    /// Train a model: autoencoder, then interpolator, then joint
    Train(TrainArgs),
    /// One synthetic series per input series, from a random mask
    Generate(GenerateArgs),
    /// Fill missing patches, keeping observed patches verbatim
    Impute(ImputeArgs),
    /// Reconstruct every series with nothing masked
    Denoise(DenoiseArgs),
    /// `k` synthetic copies per input series
    Augment(AugmentArgs),
    /// Projection and report CSVs comparing real and synthetic data
    Evaluate(EvaluateArgs),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args)]
struct SinesArgs {
    #[arg(long, default_value_t = 256, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 24, value_parser = positive)]
    len: usize,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV, one row per time step
    #[arg(long)]
    data: PathBuf,
    /// Column that names the series a row belongs to [default: `id` if the header has one]
    #[arg(long)]
    id_column: Option<String>,
    /// Comma-separated columns to ignore, such as a date column
    #[arg(long, value_delimiter = ',')]
    skip_columns: Vec<String>,
    /// Cut every loaded series into windows of this many steps
    #[arg(long, value_parser = positive)]
    window: Option<usize>,
    /// Step between window starts
    #[arg(long, default_value_t = 1, value_parser = positive)]
    stride: usize,
}

fn header_has_id(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().next().is_some_and(|l| l.split(',').any(|c| c.trim() == "id")))
}

fn load_series(path: &Path, id_column: Option<&str>, skip: &[String]) -> Result<Vec<Series>> {
    let id_column = match id_column {
        Some(c) => Some(c.to_string()),
        None if header_has_id(path)? => Some("id".to_string()),
        None => None,
    };
    let opts = CsvOptions { id_column, skip_columns: skip.to_vec() };
    load_csv_with(path, &opts).with_context(|| format!("loading {}", path.display()))
}

impl DataArgs {
    fn load(&self) -> Result<Vec<Series>> {
        let series = load_series(&self.data, self.id_column.as_deref(), &self.skip_columns)?;
        match self.window {
            None => Ok(series),
            Some(w) => {
                let mut out = Vec::new();
                for s in &series {
                    out.extend(data::windows(s, w, self.stride)?);
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskMode {
    Uniform,
    Blocks,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long, value_enum, default_value_t = MaskMode::Uniform)]
    mask_mode: MaskMode,
    /// Patches to mask in uniform mode [default: ⌈T/3⌉]
    #[arg(long)]
    mask_m: Option<usize>,
    /// Number of blocks in blocks mode [default: 1]
    #[arg(long)]
    mask_blocks: Option<usize>,
    /// Patches per block in blocks mode [default: ⌈T/3⌉]
    #[arg(long)]
    mask_size: Option<usize>,
}

impl MaskArgs {
    fn spec(&self, t: usize) -> Result<MaskSpec> {
        let spec = match self.mask_mode {
            MaskMode::Uniform => {
                if self.mask_blocks.is_some() || self.mask_size.is_some() {
                    bail!("--mask-blocks and --mask-size need --mask-mode blocks");
                }
                MaskSpec::Uniform { m: self.mask_m.unwrap_or(t.div_ceil(3)) }
            }
            MaskMode::Blocks => {
                if self.mask_m.is_some() {
                    bail!("--mask-m applies to --mask-mode uniform; use --mask-blocks and --mask-size");
                }
                MaskSpec::Blocks { count: self.mask_blocks.unwrap_or(1), size: self.mask_size.unwrap_or(t.div_ceil(3)) }
            }
        };
        spec.check(t).with_context(|| format!("mask {spec} is infeasible for {t} patches per series"))?;
        Ok(spec)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 4, value_parser = positive)]
    patch_len: usize,
    #[arg(long, default_value_t = 8, value_parser = positive)]
    latent_dim: usize,
    /// GRU layers in the encoder and in the decoder
    #[arg(long, default_value_t = 2, value_parser = positive)]
    gru_layers: usize,
    /// GRU hidden width in the encoder and in the decoder
    #[arg(long, default_value_t = 24, value_parser = positive)]
    hidden: usize,
    /// Hidden dense layers in the interpolator
    #[arg(long, default_value_t = 2, value_parser = positive)]
    interp_layers: usize,
    /// Interpolator hidden width [default: 4·T·latent-dim]
    #[arg(long, value_parser = positive)]
    interp_hidden: Option<usize>,
    #[arg(long, default_value_t = 200)]
    epochs1: usize,
    #[arg(long, default_value_t = 200)]
    epochs2: usize,
    #[arg(long, default_value_t = 400)]
    epochs3: usize,
    #[arg(long, default_value_t = 32, value_parser = positive)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.ckpt")]
    out_ckpt: PathBuf,
    /// Training log, `phase,epoch,loss`
    #[arg(long, default_value = "train_log.csv")]
    log: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Copies per input series
    #[arg(long, default_value_t = 1, value_parser = positive)]
    k: usize,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated patch indices missing from every series; otherwise a
    /// mask is drawn per series from the mask flags and seed
    #[arg(long, value_delimiter = ',')]
    missing: Vec<usize>,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Real series
    #[command(flatten)]
    data: DataArgs,
    /// Synthetic series, as written by `generate` or `augment`
    #[arg(long)]
    synth: PathBuf,
    /// Checkpoint whose normalization is applied before projecting [default: fit on the real data]
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File name prefix for everything written
    #[arg(long, default_value = "eval")]
    prefix: String,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the t-SNE projection
    #[arg(long)]
    no_tsne: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn write_series(path: &Path, series: &[Series]) -> Result<()> {
    write_csv(path, series).with_context(|| format!("writing {}", path.display()))
}

fn run_sines(a: &SinesArgs, mut man: Manifest) -> Result<()> {
    let series = data::generate_sines(a.n, a.len, a.channels, a.seed)?;
    write_series(&a.out, &series)?;
    man.output(&a.out);
    man.save(&sidecar(&a.out, "run-manifest"))
}

fn run_train(a: &TrainArgs, exec: Execution, mut man: Manifest) -> Result<()> {
    let series = a.data.load()?;
    let first = series.first().context("no series loaded")?;
    let (len, channels) = (first.len(), first.channels());
    if len % a.patch_len != 0 {
        return Err(data::DataError::PatchLength { p: a.patch_len, l: len, rem: len % a.patch_len })
            .context("--patch-len must divide the series length; pick another or cut windows with --window");
    }
    let t = len / a.patch_len;
    let mut model = ModelConfig::new(t, a.patch_len, channels);
    model.latent_dim = a.latent_dim;
    model.enc_layers = a.gru_layers;
    model.dec_layers = a.gru_layers;
    model.enc_hidden = a.hidden;
    model.dec_hidden = a.hidden;
    model.interp_layers = a.interp_layers;
    model.interp_hidden = a.interp_hidden.unwrap_or(4 * t * a.latent_dim);
    model.seed = a.seed;

    let mut cfg = TrainConfig::new(t);
    cfg.epochs = [a.epochs1, a.epochs2, a.epochs3];
    cfg.batch_size = a.batch;
    cfg.adam.lr = a.lr;
    cfg.mask = a.mask.spec(t)?;
    cfg.seed = a.seed;

    let bundle = init_params(&model)?.with_norm(NormStats::fit(&series)?);
    let grids = train::prepare(&bundle, &series)?;
    let mut trainer = Trainer::new(bundle, cfg)?.with_execution(exec);
    let logs = trainer.run_until(&grids, |_| false, |log| {
        if log.epoch == 1 || log.epoch % 50 == 0 {
            eprintln!("phase {} epoch {:>4} loss {:.6}", log.phase, log.epoch, log.loss);
        }
    })?;
    save_checkpoint(&a.out_ckpt, &trainer.checkpoint())?;
    train::save_log(&a.log, &logs)?;

    man.hash("data", &a.data.data)?;
    man.push("series", &series.len().to_string());
    man.push("patches_per_series", &t.to_string());
    man.hash("checkpoint", &a.out_ckpt)?;
    man.output(&a.out_ckpt);
    man.output(&a.log);
    man.save(&sidecar(&a.out_ckpt, "run-manifest"))
}

fn load_bundle(path: &Path, man: &mut Manifest) -> Result<ModelBundle> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    man.hash("checkpoint", path)?;
    Ok(ckpt.bundle)
}

fn save_synthetic(out: &Path, items: &[Synthetic], spec: MaskSpec, mut man: Manifest) -> Result<()> {
    let series: Vec<Series> = items.iter().map(|s| s.series.clone()).collect();
    write_series(out, &series)?;
    let prov = sidecar(out, "provenance.csv");
    generate::save_provenance(&prov, items, spec)?;
    man.push("mask", &spec.to_string());
    man.output(out);
    man.output(&prov);
    man.save(&sidecar(out, "run-manifest"))
}

fn run_generate(a: &GenerateArgs, exec: Execution, mut man: Manifest) -> Result<()> {
    let bundle = load_bundle(&a.ckpt, &mut man)?;
    let series = a.data.load()?;
    man.hash("data", &a.data.data)?;
    let spec = a.mask.spec(bundle.config.t)?;
    let mut rng = SeededRng::seed_from_u64(a.seed);
    let items = generate::generate(&bundle, &series, spec, &mut rng, exec)?;
    save_synthetic(&a.out, &items, spec, man)
}

fn run_augment(a: &AugmentArgs, exec: Execution, mut man: Manifest) -> Result<()> {
    let bundle = load_bundle(&a.ckpt, &mut man)?;
    let series = a.data.load()?;
    man.hash("data", &a.data.data)?;
    let spec = a.mask.spec(bundle.config.t)?;
    let mut rng = SeededRng::seed_from_u64(a.seed);
    let items = generate::augment(&bundle, &series, a.k, spec, &mut rng, exec)?;
    save_synthetic(&a.out, &items, spec, man)
}

fn run_denoise(a: &DenoiseArgs, exec: Execution, mut man: Manifest) -> Result<()> {
    let bundle = load_bundle(&a.ckpt, &mut man)?;
    let series = a.data.load()?;
    man.hash("data", &a.data.data)?;
    let out = exec.try_map(&series, |s| generate::denoise(&bundle, s))?;
    write_series(&a.out, &out)?;
    man.output(&a.out);
    man.save(&sidecar(&a.out, "run-manifest"))
}

fn run_impute(a: &ImputeArgs, exec: Execution, mut man: Manifest) -> Result<()> {
    let bundle = load_bundle(&a.ckpt, &mut man)?;
    let series = a.data.load()?;
    man.hash("data", &a.data.data)?;
    let t = bundle.config.t;
    let masks: Vec<MaskPattern> = if a.missing.is_empty() {
        let spec = a.mask.spec(t)?;
        man.push("mask", &spec.to_string());
        let mut rng = SeededRng::seed_from_u64(a.seed);
        series.iter().map(|_| sample_mask(t, spec, &mut rng)).collect::<Result<_, _>>()?
    } else {
        let m = MaskPattern::new(t, a.missing.iter().copied())
            .with_context(|| format!("--missing must list patch indices below {t}"))?;
        vec![m; series.len()]
    };
    let jobs: Vec<(&Series, &MaskPattern)> = series.iter().zip(&masks).collect();
    let out = exec.try_map(&jobs, |(s, m)| generate::impute(&bundle, s, m))?;
    write_series(&a.out, &out)?;

    let mask_path = sidecar(&a.out, "mask.csv");
    let mut text = String::from("id,missing\n");
    for (s, m) in series.iter().zip(&masks) {
        let idx: Vec<String> = m.masked().iter().map(usize::to_string).collect();
        text.push_str(&format!("{},{}\n", s.id, idx.join(";")));
    }
    std::fs::write(&mask_path, text).with_context(|| format!("writing {}", mask_path.display()))?;
    man.output(&a.out);
    man.output(&mask_path);
    man.save(&sidecar(&a.out, "run-manifest"))
}

fn run_evaluate(a: &EvaluateArgs, exec: Execution, mut man: Manifest) -> Result<()> {
    let real = a.data.load()?;
    let synth = load_series(&a.synth, None, &[])?;
    man.hash("data", &a.data.data)?;
    man.hash("synth", &a.synth)?;
    let norm = match &a.ckpt {
        Some(p) => load_bundle(p, &mut man)?.norm,
        None => NormStats::fit(&real)?,
    };
    let normalize = |set: &[Series]| -> Result<Vec<Series>> { Ok(set.iter().map(|s| norm.apply(s)).collect::<Result<_, _>>()?) };
    let (real_n, synth_n) = (normalize(&real)?, normalize(&synth)?);

    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let path = |name: &str| a.out_dir.join(format!("{}_{name}", a.prefix));
    let mut written = Vec::new();

    let pca = eval::project_pca(&real_n, &synth_n)?;
    let p = path("pca.csv");
    eval::save_with(&p, |w| pca.write_csv(w))?;
    written.push(p);
    let p = path("pca_variance.csv");
    let ratios = pca.explained_variance.clone().unwrap_or_default();
    eval::save_with(&p, |w| {
        writeln!(w, "component,explained_variance_ratio").map_err(io_err)?;
        for (i, r) in ratios.iter().enumerate() {
            writeln!(w, "{},{r}", i + 1).map_err(io_err)?;
        }
        Ok(())
    })?;
    written.push(p);

    if !a.no_tsne {
        let cfg = TsneConfig { perplexity: a.perplexity, iters: a.iters, seed: a.seed, ..TsneConfig::default() };
        let (x, labels) = eval::flatten_for_projection(&real_n, &synth_n)?;
        let t = eval::tsne_project(&x, &cfg, exec)?;
        let p = path("tsne.csv");
        eval::save_with(&p, |w| eval::write_projection(w, &t.coords, &labels))?;
        written.push(p);
        let p = path("tsne_kl.csv");
        eval::save_with(&p, |w| {
            writeln!(w, "iteration,kl").map_err(io_err)?;
            for (i, kl) in t.kl.iter().enumerate() {
                writeln!(w, "{i},{kl}").map_err(io_err)?;
            }
            Ok(())
        })?;
        written.push(p);
        man.push("tsne_perplexity_used", &t.perplexity.to_string());
    }

    let marginals = eval::marginal_report(&real, &synth)?;
    let p = path("marginals.csv");
    eval::save_with(&p, |w| eval::write_marginals(w, &marginals))?;
    written.push(p);

    let groups = eval::group_by_source(&synth);
    if groups.iter().all(|(_, g)| g.len() >= 2) {
        let report = eval::diversity_report(&groups, exec)?;
        let p = path("diversity.csv");
        eval::save_with(&p, |w| eval::write_diversity(w, &report))?;
        written.push(p);
    } else {
        eprintln!("note: diversity report skipped; it needs at least two copies per source series (see `augment --k`)");
    }

    for p in &written {
        man.output(p);
    }
    man.save(&a.out_dir.join(format!("{}.run-manifest", a.prefix)))
}

fn io_err(source: std::io::Error) -> tsmae::Error {
    tsmae::Error::Io { path: "<report>".into(), source }
}

fn run(cli: &Cli, sub: &ArgMatches) -> Result<()> {
    let exec = execution(cli.sequential);
    let man = Manifest::new(command_name(&cli.command), sub);
    match &cli.command {
        Command::Sines(a) => run_sines(a, man),
        Command::Train(a) => run_train(a, exec, man),
        Command::Generate(a) => run_generate(a, exec, man),
        Command::Impute(a) => run_impute(a, exec, man),
        Command::Denoise(a) => run_denoise(a, exec, man),
        Command::Augment(a) => run_augment(a, exec, man),
        Command::Evaluate(a) => run_evaluate(a, exec, man),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Sines(_) => "sines",
        Command::Train(_) => "train",
        Command::Generate(_) => "generate",
        Command::Impute(_) => "impute",
        Command::Denoise(_) => "denoise",
        Command::Augment(_) => "augment",
        Command::Evaluate(_) => "evaluate",
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    match run(&cli, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
