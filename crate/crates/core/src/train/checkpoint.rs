//! Versioned little-endian binary checkpoint.
//!
//! ```text
//! magic    8 bytes  "TSMAECKP"
//! version  u32
//! model    11 × u64   t p c latent enc_layers enc_hidden dec_layers dec_hidden
//!                     interp_layers interp_hidden seed
//! norm     u64 channels, then channels × f64 min, channels × f64 max
//! train    3 × u64 epochs, u64 batch, 4 × f64 lr β1 β2 ε,
//!          u8 mask kind (0 uniform, 1 blocks), 2 × u64 mask args,
//!          u64 seed, u8 shuffle
//! progress u8 phase, u64 epoch
//! params   u64 count, then per tensor: string name, u64 rank, rank × u64 dims,
//!          f64 data
//! adam     u64 step, then first-moment and second-moment tensors as above
//! rng      32 bytes seed, u64 stream, u128 word position
//! ```
//! Strings are a u64 byte length followed by UTF-8.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;

use super::{AdamConfig, AdamState, Progress, TrainConfig};
use crate::autodiff::{ParamStore, Tensor};
use crate::data::{MaskSpec, NormStats};
use crate::error::{Error, Result};
use crate::model::{ModelBundle, ModelConfig};
use crate::SeededRng;

const MAGIC: &[u8; 8] = b"TSMAECKP";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to resume training at an epoch boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub bundle: ModelBundle,
    pub config: TrainConfig,
    pub progress: Progress,
    pub optimizer: AdamState,
    pub rng: SeededRng,
}

struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn store(&mut self, s: &ParamStore) {
        self.usize(s.len());
        for (name, t) in s.iter() {
            self.str(name);
            self.usize(t.rank());
            for &d in t.shape() {
                self.usize(d);
            }
            for &v in t.data() {
                self.f64(v);
            }
        }
    }
}

struct Dec<'a>(&'a [u8]);

impl Dec<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::CheckpointTruncated);
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflows usize".into()))
    }
    /// A count of items of at least `unit` bytes each that must still fit.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.checked_mul(unit).is_none_or(|b| b > self.0.len()) {
            return Err(Error::CheckpointTruncated);
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))
    }
    fn store(&mut self) -> Result<ParamStore> {
        let n = self.count(16)?;
        let mut s = ParamStore::new();
        for _ in 0..n {
            let name = self.str()?;
            let rank = self.count(8)?;
            let shape = (0..rank).map(|_| self.usize()).collect::<Result<Vec<_>>>()?;
            let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
            if len.checked_mul(8).is_none_or(|b| b > self.0.len()) {
                return Err(Error::CheckpointTruncated);
            }
            let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
            s.insert(name, t).map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        Ok(s)
    }
}

fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut e = Enc(Vec::new());
    e.0.extend_from_slice(MAGIC);
    e.u32(FORMAT_VERSION);

    let m = &ckpt.bundle.config;
    for v in [m.t, m.p, m.c, m.latent_dim, m.enc_layers, m.enc_hidden, m.dec_layers, m.dec_hidden, m.interp_layers, m.interp_hidden] {
        e.usize(v);
    }
    e.u64(m.seed);

    let n = &ckpt.bundle.norm;
    e.usize(n.channels());
    n.min.iter().chain(&n.max).for_each(|&v| e.f64(v));

    let c = &ckpt.config;
    c.epochs.iter().for_each(|&v| e.usize(v));
    e.usize(c.batch_size);
    for v in [c.adam.lr, c.adam.beta1, c.adam.beta2, c.adam.eps] {
        e.f64(v);
    }
    match c.mask {
        MaskSpec::Uniform { m } => {
            e.u8(0);
            e.usize(m);
            e.usize(0);
        }
        MaskSpec::Blocks { count, size } => {
            e.u8(1);
            e.usize(count);
            e.usize(size);
        }
    }
    e.u64(c.seed);
    e.u8(u8::from(c.shuffle));

    e.u8(ckpt.progress.phase);
    e.usize(ckpt.progress.epoch);

    e.store(&ckpt.bundle.params);
    e.u64(ckpt.optimizer.step);
    e.store(&ckpt.optimizer.first);
    e.store(&ckpt.optimizer.second);

    e.0.extend_from_slice(&ckpt.rng.get_seed());
    e.u64(ckpt.rng.get_stream());
    e.0.extend_from_slice(&ckpt.rng.get_word_pos().to_le_bytes());
    e.0
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut d = Dec(bytes);
    if d.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = d.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion { found: version, expected: FORMAT_VERSION });
    }

    let mut dims = [0usize; 10];
    for v in dims.iter_mut() {
        *v = d.usize()?;
    }
    let config = ModelConfig {
        t: dims[0],
        p: dims[1],
        c: dims[2],
        latent_dim: dims[3],
        enc_layers: dims[4],
        enc_hidden: dims[5],
        dec_layers: dims[6],
        dec_hidden: dims[7],
        interp_layers: dims[8],
        interp_hidden: dims[9],
        seed: d.u64()?,
    };

    let channels = d.count(16)?;
    let min = (0..channels).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
    let max = (0..channels).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;

    let epochs = [d.usize()?, d.usize()?, d.usize()?];
    let batch_size = d.usize()?;
    let adam = AdamConfig { lr: d.f64()?, beta1: d.f64()?, beta2: d.f64()?, eps: d.f64()? };
    let kind = d.u8()?;
    let (a, b) = (d.usize()?, d.usize()?);
    let mask = match kind {
        0 => MaskSpec::Uniform { m: a },
        1 => MaskSpec::Blocks { count: a, size: b },
        k => return Err(Error::Checkpoint(format!("unknown mask kind {k}"))),
    };
    let train = TrainConfig { epochs, batch_size, adam, mask, seed: d.u64()?, shuffle: d.u8()? != 0 };

    let progress = Progress { phase: d.u8()?, epoch: d.usize()? };
    if !(1..=4).contains(&progress.phase) {
        return Err(Error::Checkpoint(format!("invalid phase {}", progress.phase)));
    }

    let params = d.store()?;
    let step = d.u64()?;
    let first = d.store()?;
    let second = d.store()?;

    let mut rng = SeededRng::from_seed(d.array::<32>()?);
    rng.set_stream(d.u64()?);
    rng.set_word_pos(u128::from_le_bytes(d.array()?));
    if !d.0.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", d.0.len())));
    }

    let bundle = ModelBundle { config, params, norm: NormStats { min, max } };
    bundle.validate()?;
    for moments in [&first, &second] {
        let aligned = moments.len() == bundle.params.len()
            && moments.iter().zip(bundle.params.iter()).all(|((a, x), (b, y))| a == b && x.shape() == y.shape());
        if !aligned {
            return Err(Error::Checkpoint("optimizer moments do not match parameters".into()));
        }
    }
    Ok(Checkpoint { bundle, config: train, progress, optimizer: AdamState { step, first, second }, rng })
}

pub fn write_checkpoint(mut w: impl Write, ckpt: &Checkpoint) -> std::io::Result<()> {
    w.write_all(&encode(ckpt))
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|source| Error::Io { path: "<checkpoint>".into(), source })?;
    decode(&bytes)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(ckpt)).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}
