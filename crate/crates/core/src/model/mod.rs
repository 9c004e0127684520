//! Encoder, interpolator and decoder networks plus the three training
//! losses.
//!
//! Parameter names are grouped by network: `enc.*`, `interp.*`, `dec.*`.
//! The interpolator holds dense weights and biases only; masked slots enter
//! it as zero vectors flagged by a visibility indicator, never as a learned
//! placeholder embedding.

mod config;
mod gru;
mod loss;

pub use config::ModelConfig;
pub use gru::UPDATE_GATE_BIAS;
pub use loss::{loss_auto, loss_embed, loss_recon, patch_distance_sum};

use rand::SeedableRng;

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::data::{MaskPattern, NormStats};
use crate::error::{Error, Result};
use crate::SeededRng;

pub const ENCODER: &str = "enc";
pub const INTERPOLATOR: &str = "interp";
pub const DECODER: &str = "dec";

/// Everything needed to reproduce a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub norm: NormStats,
}

/// Glorot-uniform weights, zero biases except GRU update gates, and identity
/// normalization. Deterministic in `config.seed`.
pub fn init_params(config: &ModelConfig) -> Result<ModelBundle> {
    config.validate()?;
    let mut rng = SeededRng::seed_from_u64(config.seed);
    let mut params = ParamStore::new();
    let d = config.latent_dim;

    gru::init_stack(&mut params, &mut rng, ENCODER, config.enc_layers, config.patch_width(), config.enc_hidden)?;
    params.insert(format!("{ENCODER}.proj.w"), gru::glorot(&mut rng, config.enc_hidden, d))?;
    params.insert(format!("{ENCODER}.proj.b"), Tensor::zeros(&[1, d]))?;

    for (k, (fan_in, fan_out)) in interp_dims(config).into_iter().enumerate() {
        params.insert(format!("{INTERPOLATOR}.fc{k}.w"), gru::glorot(&mut rng, fan_in, fan_out))?;
        params.insert(format!("{INTERPOLATOR}.fc{k}.b"), Tensor::zeros(&[1, fan_out]))?;
    }

    gru::init_stack(&mut params, &mut rng, DECODER, config.dec_layers, d, config.dec_hidden)?;
    params.insert(format!("{DECODER}.proj.w"), gru::glorot(&mut rng, config.dec_hidden, config.patch_width()))?;
    params.insert(format!("{DECODER}.proj.b"), Tensor::zeros(&[1, config.patch_width()]))?;

    Ok(ModelBundle { config: config.clone(), params, norm: NormStats::identity(config.c) })
}

/// `(fan_in, fan_out)` of every interpolator layer, input to output.
pub fn interp_dims(config: &ModelConfig) -> Vec<(usize, usize)> {
    let h = config.interp_hidden;
    let mut dims = vec![(config.interp_input(), h)];
    dims.extend((1..config.interp_layers).map(|_| (h, h)));
    dims.push((h, config.t * config.latent_dim));
    dims
}

/// Parameter names and shapes a bundle with `config` must hold, in
/// insertion order.
pub fn expected_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let stack = |prefix: &str, layers: usize, input: usize, hidden: usize, out: &mut Vec<(String, Vec<usize>)>| {
        for l in 0..layers {
            let fan_in = if l == 0 { input } else { hidden };
            for name in gru::GATE_PARAMS {
                let shape = match &name[..1] {
                    "w" => vec![fan_in, hidden],
                    "u" => vec![hidden, hidden],
                    _ => vec![1, hidden],
                };
                out.push((format!("{}.{name}", gru::layer_prefix(prefix, l)), shape));
            }
        }
    };
    let d = config.latent_dim;
    stack(ENCODER, config.enc_layers, config.patch_width(), config.enc_hidden, &mut out);
    out.push((format!("{ENCODER}.proj.w"), vec![config.enc_hidden, d]));
    out.push((format!("{ENCODER}.proj.b"), vec![1, d]));
    for (k, (i, o)) in interp_dims(config).into_iter().enumerate() {
        out.push((format!("{INTERPOLATOR}.fc{k}.w"), vec![i, o]));
        out.push((format!("{INTERPOLATOR}.fc{k}.b"), vec![1, o]));
    }
    stack(DECODER, config.dec_layers, d, config.dec_hidden, &mut out);
    out.push((format!("{DECODER}.proj.w"), vec![config.dec_hidden, config.patch_width()]));
    out.push((format!("{DECODER}.proj.b"), vec![1, config.patch_width()]));
    out
}

impl ModelBundle {
    /// Checks that the parameter inventory matches the config exactly.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let expected = expected_shapes(&self.config);
        if expected.len() != self.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        for (name, shape) in &expected {
            let t = self.params.get(name).ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!("parameter {name} has shape {:?}, expected {shape:?}", t.shape())));
            }
        }
        if self.norm.channels() != self.config.c {
            return Err(Error::Config("normalizer channel count differs from config".into()));
        }
        Ok(())
    }

    pub fn with_norm(mut self, norm: NormStats) -> Self {
        self.norm = norm;
        self
    }
}

/// Latent codes for all `T` slots plus which slots came from observed
/// patches. Slots that are not visible hold zero vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentGrid {
    pub codes: Tensor,
    pub visible: Vec<bool>,
}

impl LatentGrid {
    pub fn indicator(&self) -> Vec<f64> {
        self.visible.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.visible.iter().all(|&v| v)
    }

    pub fn code(&self, slot: usize) -> &[f64] {
        self.codes.row(slot)
    }
}

fn linear(g: &mut Graph, store: &ParamStore, prefix: &str, x: Var) -> Result<Var> {
    let w = g.param(store, &format!("{prefix}.w"))?;
    let b = g.param(store, &format!("{prefix}.b"))?;
    let xw = g.matmul(x, w)?;
    Ok(g.add(xw, b)?)
}

fn check_slots(config: &ModelConfig, k: usize, slots: &[usize]) -> Result<()> {
    if k == 0 || slots.len() != k {
        return Err(Error::invalid("encode", format!("need one slot per patch and at least one patch (got {k} patches, {} slots)", slots.len())));
    }
    if slots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("encode", "slot indices must be strictly increasing"));
    }
    if let Some(&s) = slots.iter().find(|&&s| s >= config.t) {
        return Err(Error::invalid("encode", format!("slot {s} out of range for {} patches", config.t)));
    }
    Ok(())
}

/// Encoder on the tape. `patches` is `[K, P*C]`; returns one `[1, d]` code
/// per row, in order. The GRU only sees the given patches.
pub fn encode_graph(g: &mut Graph, bundle: &ModelBundle, patches: Var) -> Result<Vec<Var>> {
    let cfg = &bundle.config;
    let shape = g.value(patches).shape().to_vec();
    if shape.len() != 2 || shape[1] != cfg.patch_width() {
        return Err(Error::invalid("encode", format!("patches must be [K, {}], got {shape:?}", cfg.patch_width())));
    }
    let steps = (0..shape[0]).map(|k| g.slice(patches, 0, k, k + 1)).collect::<Result<Vec<_>, _>>()?;
    let hidden = gru::run_stack(g, &bundle.params, ENCODER, cfg.enc_layers, cfg.enc_hidden, &steps)?;
    hidden.into_iter().map(|h| linear(g, &bundle.params, &format!("{ENCODER}.proj"), h)).collect()
}

/// Interpolator on the tape. `codes[s]` is the code at slot `s`, `None` for
/// slots to restore. Returns a `[1, d]` code for every slot.
pub fn interpolate_graph(g: &mut Graph, bundle: &ModelBundle, codes: &[Option<Var>]) -> Result<Vec<Var>> {
    let cfg = &bundle.config;
    let d = cfg.latent_dim;
    if codes.len() != cfg.t {
        return Err(Error::invalid("interpolate", format!("expected {} slots, got {}", cfg.t, codes.len())));
    }
    if codes.iter().all(Option::is_none) {
        return Err(Error::invalid("interpolate", "interpolator requires at least one visible code"));
    }
    let mut parts = Vec::with_capacity(cfg.t + 1);
    for c in codes {
        parts.push(match c {
            Some(v) => *v,
            None => g.constant(Tensor::zeros(&[1, d]))?,
        });
    }
    let indicator = codes.iter().map(|c| if c.is_some() { 1.0 } else { 0.0 }).collect();
    parts.push(g.constant(Tensor::new(vec![1, cfg.t], indicator)?)?);
    let mut x = g.concat(&parts, 1)?;

    let layers = cfg.interp_layers + 1;
    for k in 0..layers {
        x = linear(g, &bundle.params, &format!("{INTERPOLATOR}.fc{k}"), x)?;
        if k + 1 < layers {
            x = g.tanh(x)?;
        }
    }
    (0..cfg.t).map(|s| Ok(g.slice(x, 1, s * d, (s + 1) * d)?)).collect()
}

/// Decoder on the tape. Consumes one `[1, d]` code per slot and returns the
/// reconstruction as `[T, P*C]`.
pub fn decode_graph(g: &mut Graph, bundle: &ModelBundle, codes: &[Var]) -> Result<Var> {
    let cfg = &bundle.config;
    if codes.len() != cfg.t {
        return Err(Error::invalid("decode", format!("expected {} codes, got {}", cfg.t, codes.len())));
    }
    let hidden = gru::run_stack(g, &bundle.params, DECODER, cfg.dec_layers, cfg.dec_hidden, codes)?;
    let rows = hidden
        .into_iter()
        .map(|h| linear(g, &bundle.params, &format!("{DECODER}.proj"), h))
        .collect::<Result<Vec<_>>>()?;
    Ok(g.concat(&rows, 0)?)
}

/// Full masked pass on the tape: encode the visible rows of `grid`
/// (`[T, P*C]`), restore every slot, decode. Returns `[T, P*C]`.
pub fn reconstruct_graph(g: &mut Graph, bundle: &ModelBundle, grid: Var, mask: &MaskPattern) -> Result<Var> {
    let visible = mask.visible();
    if visible.is_empty() {
        return Err(Error::invalid("interpolate", "interpolator requires at least one visible code"));
    }
    let rows = visible.iter().map(|&t| g.slice(grid, 0, t, t + 1)).collect::<Result<Vec<_>, _>>()?;
    let vis = g.concat(&rows, 0)?;
    let codes = encode_graph(g, bundle, vis)?;
    let mut slots = vec![None; bundle.config.t];
    for (&t, c) in visible.iter().zip(codes) {
        slots[t] = Some(c);
    }
    let restored = interpolate_graph(g, bundle, &slots)?;
    decode_graph(g, bundle, &restored)
}

fn flat_patches(bundle: &ModelBundle, patches: &Tensor) -> Result<Tensor> {
    let cfg = &bundle.config;
    let s = patches.shape();
    if s.len() != 3 || s[1] != cfg.p || s[2] != cfg.c {
        return Err(Error::invalid("encode", format!("patches must be [K, {}, {}], got {s:?}", cfg.p, cfg.c)));
    }
    Ok(patches.reshape(&[s[0], cfg.patch_width()])?)
}

/// Encodes `patches` (`[K, P, C]`) and places code `k` at `slots[k]`.
pub fn encode(bundle: &ModelBundle, patches: &Tensor, slots: &[usize]) -> Result<LatentGrid> {
    let cfg = &bundle.config;
    let flat = flat_patches(bundle, patches)?;
    check_slots(cfg, flat.shape()[0], slots)?;
    let mut g = Graph::new();
    let x = g.constant(flat)?;
    let codes = encode_graph(&mut g, bundle, x)?;
    let d = cfg.latent_dim;
    let mut out = Tensor::zeros(&[cfg.t, d]);
    let mut visible = vec![false; cfg.t];
    for (&s, c) in slots.iter().zip(codes) {
        out.data_mut()[s * d..(s + 1) * d].copy_from_slice(g.value(c).data());
        visible[s] = true;
    }
    Ok(LatentGrid { codes: out, visible })
}

/// Restores every slot of `grid` from its visible codes.
pub fn interpolate(bundle: &ModelBundle, grid: &LatentGrid) -> Result<LatentGrid> {
    let cfg = &bundle.config;
    if grid.codes.shape() != [cfg.t, cfg.latent_dim] || grid.visible.len() != cfg.t {
        return Err(Error::invalid("interpolate", "latent grid does not match model geometry"));
    }
    let mut g = Graph::new();
    let mut slots = Vec::with_capacity(cfg.t);
    for (s, &vis) in grid.visible.iter().enumerate() {
        slots.push(if vis {
            Some(g.constant(Tensor::new(vec![1, cfg.latent_dim], grid.code(s).to_vec())?)?)
        } else {
            None
        });
    }
    let restored = interpolate_graph(&mut g, bundle, &slots)?;
    let data = restored.iter().flat_map(|v| g.value(*v).data().iter().copied()).collect();
    Ok(LatentGrid { codes: Tensor::new(vec![cfg.t, cfg.latent_dim], data)?, visible: vec![true; cfg.t] })
}

/// Decodes a fully populated grid to `[T, P, C]`.
pub fn decode(bundle: &ModelBundle, grid: &LatentGrid) -> Result<Tensor> {
    let cfg = &bundle.config;
    if !grid.is_complete() {
        return Err(Error::invalid("decode", "latent grid has unrestored slots"));
    }
    if grid.codes.shape() != [cfg.t, cfg.latent_dim] {
        return Err(Error::invalid("decode", "latent grid does not match model geometry"));
    }
    let mut g = Graph::new();
    let codes = (0..cfg.t)
        .map(|s| g.constant(Tensor::new(vec![1, cfg.latent_dim], grid.code(s).to_vec())?))
        .collect::<Result<Vec<_>, _>>()?;
    let out = decode_graph(&mut g, bundle, &codes)?;
    Ok(g.value(out).reshape(&[cfg.t, cfg.p, cfg.c])?)
}

/// Encode visible → interpolate → decode for one patch grid `[T, P, C]`.
pub fn reconstruct(bundle: &ModelBundle, patches: &Tensor, mask: &MaskPattern) -> Result<Tensor> {
    let cfg = &bundle.config;
    if mask.total() != cfg.t {
        return Err(Error::invalid("reconstruct", format!("mask covers {} patches, model expects {}", mask.total(), cfg.t)));
    }
    let flat = flat_patches(bundle, patches)?;
    if flat.shape()[0] != cfg.t {
        return Err(Error::invalid("reconstruct", format!("expected {} patches, got {}", cfg.t, flat.shape()[0])));
    }
    let mut g = Graph::new();
    let x = g.constant(flat)?;
    let out = reconstruct_graph(&mut g, bundle, x, mask)?;
    Ok(g.value(out).reshape(&[cfg.t, cfg.p, cfg.c])?)
}
