//! Mask-driven synthesis and the downstream tasks built on it.
//!
//! Synthetic output is the full decoded grid, visible positions included.
//! Imputation instead copies observed patches back verbatim so that only
//! missing content comes from the model.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};

use crate::data::{patchify, sample_mask, unpatchify, MaskPattern, MaskSpec, PatchGrid, Series};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{self, ModelBundle};
use crate::SeededRng;

fn grid_for(bundle: &ModelBundle, s: &Series) -> Result<PatchGrid> {
    let cfg = &bundle.config;
    if s.len() != cfg.series_len() || s.channels() != cfg.c {
        return Err(Error::invalid(
            "generate",
            format!("series {:?} is {}x{}, model expects {}x{}", s.id, s.len(), s.channels(), cfg.series_len(), cfg.c),
        ));
    }
    Ok(patchify(&bundle.norm.apply(s)?, cfg.p)?)
}

/// Normalize → patchify → encode visible → interpolate → decode →
/// unpatchify → denormalize.
pub fn reconstruct_series(bundle: &ModelBundle, s: &Series, mask: &MaskPattern) -> Result<Series> {
    let grid = grid_for(bundle, s)?;
    let decoded = model::reconstruct(bundle, &grid.patches, mask)?;
    let out = unpatchify(&PatchGrid { patches: decoded, origin: s.id.clone() })?;
    Ok(bundle.norm.invert(&out)?)
}

/// One synthetic copy of `s` from a freshly drawn mask.
pub fn synthesize<R: Rng + ?Sized>(bundle: &ModelBundle, s: &Series, spec: MaskSpec, rng: &mut R) -> Result<Series> {
    let mask = sample_mask(bundle.config.t, spec, rng)?;
    reconstruct_series(bundle, s, &mask)
}

/// Full-visibility reconstruction.
pub fn denoise(bundle: &ModelBundle, s: &Series) -> Result<Series> {
    reconstruct_series(bundle, s, &MaskPattern::empty(bundle.config.t))
}

/// Fills the `missing` patches of `s` from the model; observed patches are
/// copied from the input unchanged.
pub fn impute(bundle: &ModelBundle, s: &Series, missing: &MaskPattern) -> Result<Series> {
    let cfg = &bundle.config;
    if missing.total() != cfg.t {
        return Err(Error::invalid("impute", format!("mask covers {} patches, model expects {}", missing.total(), cfg.t)));
    }
    if missing.m() == 0 {
        grid_for(bundle, s)?;
        return Ok(s.clone());
    }
    let filled = reconstruct_series(bundle, s, missing)?;
    let width = cfg.p * cfg.c;
    let mut values = s.values.clone();
    for &t in missing.masked() {
        let span = t * width..(t + 1) * width;
        values.data_mut()[span.clone()].copy_from_slice(&filled.values.data()[span]);
    }
    Ok(Series::new(s.id.clone(), values)?)
}

/// A generated series and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub series: Series,
    pub source_id: String,
    pub copy: usize,
    pub seed: u64,
}

/// `k` synthetic copies of every series. Per-copy seeds are drawn from `rng`
/// up front, series-major, so output is independent of the execution mode.
/// Copies are named `<source>#<copy>`.
pub fn augment<R: Rng + ?Sized>(
    bundle: &ModelBundle,
    dataset: &[Series],
    k: usize,
    spec: MaskSpec,
    rng: &mut R,
    execution: Execution,
) -> Result<Vec<Synthetic>> {
    if k == 0 {
        return Err(Error::invalid("augment", "need at least one copy per series"));
    }
    spec.check(bundle.config.t)?;
    let jobs: Vec<(usize, usize, u64)> = (0..dataset.len())
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rng.random::<u64>()))
        .collect();
    execution.try_map(&jobs, |&(i, j, seed)| {
        let src = &dataset[i];
        let mut series = synthesize(bundle, src, spec, &mut SeededRng::seed_from_u64(seed))?;
        series.id = format!("{}#{j}", src.id);
        Ok(Synthetic { series, source_id: src.id.clone(), copy: j, seed })
    })
}

/// One synthetic series per input, keeping the source ids.
pub fn generate<R: Rng + ?Sized>(
    bundle: &ModelBundle,
    dataset: &[Series],
    spec: MaskSpec,
    rng: &mut R,
    execution: Execution,
) -> Result<Vec<Synthetic>> {
    let mut out = augment(bundle, dataset, 1, spec, rng, execution)?;
    for s in &mut out {
        s.series.id.clone_from(&s.source_id);
    }
    Ok(out)
}

/// Writes `id,source_id,copy,mask,seed` rows describing each synthetic series.
pub fn write_provenance(mut w: impl Write, items: &[Synthetic], spec: MaskSpec) -> std::io::Result<()> {
    writeln!(w, "id,source_id,copy,mask,seed")?;
    for s in items {
        writeln!(w, "{},{},{},{spec},{}", s.series.id, s.source_id, s.copy, s.seed)?;
    }
    Ok(())
}

pub fn save_provenance(path: impl AsRef<Path>, items: &[Synthetic], spec: MaskSpec) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let f = std::fs::File::create(path).map_err(io)?;
    write_provenance(std::io::BufWriter::new(f), items, spec).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sines, NormStats};
    use crate::model::{init_params, ModelConfig};

    fn setup() -> (ModelBundle, Vec<Series>) {
        let series = generate_sines(4, 12, 2, 1).unwrap();
        let mut cfg = ModelConfig::new(4, 3, 2);
        cfg.latent_dim = 3;
        cfg.enc_hidden = 6;
        cfg.dec_hidden = 6;
        cfg.interp_hidden = 10;
        let b = init_params(&cfg).unwrap().with_norm(NormStats::fit(&series).unwrap());
        (b, series)
    }

    #[test]
    fn zero_mask_synthesis_is_denoise() {
        let (b, s) = setup();
        let mut rng = SeededRng::seed_from_u64(3);
        let syn = synthesize(&b, &s[0], MaskSpec::Uniform { m: 0 }, &mut rng).unwrap();
        assert_eq!(syn, denoise(&b, &s[0]).unwrap());
        assert_eq!(syn.values.shape(), &[12, 2]);
    }

    #[test]
    fn synthesis_is_seed_deterministic() {
        let (b, s) = setup();
        let run = |seed| synthesize(&b, &s[1], MaskSpec::Uniform { m: 2 }, &mut SeededRng::seed_from_u64(seed)).unwrap();
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn impute_keeps_observed_patches() {
        let (b, s) = setup();
        assert_eq!(impute(&b, &s[0], &MaskPattern::empty(4)).unwrap(), s[0]);
        let missing = MaskPattern::new(4, [1, 2]).unwrap();
        let out = impute(&b, &s[0], &missing).unwrap();
        let w = 3 * 2;
        for t in [0, 3] {
            assert_eq!(&out.values.data()[t * w..(t + 1) * w], &s[0].values.data()[t * w..(t + 1) * w]);
        }
        assert_ne!(out, s[0]);
        assert!(impute(&b, &s[0], &MaskPattern::empty(5)).is_err());
    }

    #[test]
    fn geometry_mismatch() {
        let (b, _) = setup();
        let other = generate_sines(1, 16, 2, 1).unwrap();
        assert!(denoise(&b, &other[0]).is_err());
    }

    #[test]
    fn augment_counts_ids_and_modes() {
        let (b, s) = setup();
        let spec = MaskSpec::Uniform { m: 1 };
        let seq = augment(&b, &s, 3, spec, &mut SeededRng::seed_from_u64(9), Execution::Sequential).unwrap();
        let par = augment(&b, &s, 3, spec, &mut SeededRng::seed_from_u64(9), Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.len(), 12);
        assert_eq!(seq[4].series.id, "sine1#1");
        assert_eq!(seq[4].source_id, "sine1");

        let denoised = augment(&b, &s, 1, MaskSpec::Uniform { m: 0 }, &mut SeededRng::seed_from_u64(1), Execution::Sequential).unwrap();
        for (d, src) in denoised.iter().zip(&s) {
            assert_eq!(d.series.values, denoise(&b, src).unwrap().values);
        }
        assert!(augment(&b, &s, 0, spec, &mut SeededRng::seed_from_u64(1), Execution::Sequential).is_err());
    }

    #[test]
    fn provenance_rows() {
        let (b, s) = setup();
        let spec = MaskSpec::Blocks { count: 1, size: 2 };
        let out = generate(&b, &s[..2], spec, &mut SeededRng::seed_from_u64(2), Execution::Sequential).unwrap();
        assert_eq!(out[1].series.id, "sine1");
        let mut buf = Vec::new();
        write_provenance(&mut buf, &out, spec).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,source_id,copy,mask,seed\nsine0,sine0,0,blocks:1x2,"), "{text}");
        assert_eq!(text.lines().count(), 3);
    }
}
