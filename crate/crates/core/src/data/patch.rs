use super::{DataError, MaskPattern, Series};
use crate::autodiff::Tensor;

/// A series cut into `T` patches of `P` steps, shape `[T, P, C]`.
///
/// Row-major `[L, C]` and `[T, P, C]` share a layout, so a flattened patch is
/// step-major, channel-minor.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    pub patches: Tensor,
    pub origin: String,
}

impl PatchGrid {
    pub fn t(&self) -> usize {
        self.patches.shape()[0]
    }

    pub fn p(&self) -> usize {
        self.patches.shape()[1]
    }

    pub fn c(&self) -> usize {
        self.patches.shape()[2]
    }

    /// Length of one flattened patch, `P * C`.
    pub fn patch_width(&self) -> usize {
        self.p() * self.c()
    }

    pub fn patch(&self, t: usize) -> &[f64] {
        let w = self.patch_width();
        &self.patches.data()[t * w..(t + 1) * w]
    }
}

pub fn patchify(s: &Series, p: usize) -> Result<PatchGrid, DataError> {
    let l = s.len();
    if p == 0 || !l.is_multiple_of(p) {
        return Err(DataError::PatchLength { p, l, rem: if p == 0 { l } else { l % p } });
    }
    let patches = s.values.reshape(&[l / p, p, s.channels()])?;
    Ok(PatchGrid { patches, origin: s.id.clone() })
}

pub fn unpatchify(g: &PatchGrid) -> Result<Series, DataError> {
    let values = g.patches.reshape(&[g.t() * g.p(), g.c()])?;
    Series::new(g.origin.clone(), values)
}

/// Visible and masked patches of a grid, each in temporal order. A part is
/// `None` when it holds no patches.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPatches {
    pub visible: Option<Tensor>,
    pub masked: Option<Tensor>,
}

fn gather(g: &PatchGrid, idx: &[usize]) -> Result<Option<Tensor>, DataError> {
    if idx.is_empty() {
        return Ok(None);
    }
    let data = idx.iter().flat_map(|&t| g.patch(t).iter().copied()).collect();
    Ok(Some(Tensor::new(vec![idx.len(), g.p(), g.c()], data)?))
}

pub fn split_patches(g: &PatchGrid, m: &MaskPattern) -> Result<SplitPatches, DataError> {
    if m.total() != g.t() {
        return Err(DataError::Geometry(format!("mask covers {} patches, grid has {}", m.total(), g.t())));
    }
    Ok(SplitPatches { visible: gather(g, &m.visible())?, masked: gather(g, m.masked())? })
}

/// Inverse of [`split_patches`].
pub fn merge_patches(parts: &SplitPatches, m: &MaskPattern, origin: &str) -> Result<PatchGrid, DataError> {
    let shape = parts
        .visible
        .as_ref()
        .or(parts.masked.as_ref())
        .map(|t| t.shape().to_vec())
        .ok_or_else(|| DataError::Geometry("nothing to merge".into()))?;
    let width = shape[1] * shape[2];
    let count = |t: &Option<Tensor>| t.as_ref().map_or(0, |t| t.shape()[0]);
    if count(&parts.visible) != m.n() || count(&parts.masked) != m.m() {
        return Err(DataError::Geometry("split sizes do not match mask".into()));
    }
    let (mut vi, mut mi) = (0, 0);
    let mut data = Vec::with_capacity(m.total() * width);
    for t in 0..m.total() {
        let (src, k) = if m.is_masked(t) {
            mi += 1;
            (parts.masked.as_ref(), mi - 1)
        } else {
            vi += 1;
            (parts.visible.as_ref(), vi - 1)
        };
        let src = src.expect("count checked");
        data.extend_from_slice(&src.data()[k * width..(k + 1) * width]);
    }
    Ok(PatchGrid {
        patches: Tensor::new(vec![m.total(), shape[1], shape[2]], data)?,
        origin: origin.to_string(),
    })
}
