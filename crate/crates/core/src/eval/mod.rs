//! Qualitative and distributional comparison of real and synthetic data.
//!
//! Every series is flattened to one row of length `L·C` (time-major) before
//! projection. The marginal and diversity reports are simple summary
//! statistics, not a measure of sample quality.

mod pca;
mod tsne;

use std::fmt;
use std::io::Write;
use std::path::Path;

pub use pca::{pca_project, Pca, POWER_MAX_ITERS, POWER_TOLERANCE};
pub use tsne::{tsne_project, Tsne, TsneConfig, MAX_POINTS as TSNE_MAX_POINTS};

use crate::autodiff::Tensor;
use crate::data::Series;
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Real,
    Synthetic,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "real",
            Label::Synthetic => "synth",
        })
    }
}

fn check_geometry(a: &[Series], b: &[Series]) -> Result<(usize, usize)> {
    let first = a.first().or(b.first()).ok_or_else(|| Error::invalid("eval", "no series given"))?;
    let (l, c) = (first.len(), first.channels());
    if let Some(s) = a.iter().chain(b).find(|s| s.len() != l || s.channels() != c) {
        return Err(Error::invalid(
            "eval",
            format!("series {:?} is {}x{}, expected {l}x{c}", s.id, s.len(), s.channels()),
        ));
    }
    Ok((l, c))
}

/// Stacks real then synthetic series into `[n, L·C]` with matching labels.
pub fn flatten_for_projection(real: &[Series], synthetic: &[Series]) -> Result<(Tensor, Vec<Label>)> {
    let (l, c) = check_geometry(real, synthetic)?;
    let data: Vec<f64> = real.iter().chain(synthetic).flat_map(|s| s.values.data().iter().copied()).collect();
    let labels = std::iter::repeat_n(Label::Real, real.len())
        .chain(std::iter::repeat_n(Label::Synthetic, synthetic.len()))
        .collect();
    Ok((Tensor::new(vec![real.len() + synthetic.len(), l * c], data)?, labels))
}

/// Inverse of the flattening for a single group of rows.
pub fn unflatten(x: &Tensor, len: usize, channels: usize) -> Result<Vec<Series>> {
    if x.rank() != 2 || x.shape()[1] != len * channels {
        return Err(Error::invalid("eval", format!("rows of {:?} are not {len}x{channels} series", x.shape())));
    }
    (0..x.shape()[0])
        .map(|i| Ok(Series::new(format!("row{i}"), Tensor::new(vec![len, channels], x.row(i).to_vec())?)?))
        .collect()
}

/// Writes `x,y,label` rows; `coords` is `[n, ≥2]` and only the first two
/// columns are used.
pub fn write_projection(mut w: impl Write, coords: &Tensor, labels: &[Label]) -> Result<()> {
    if coords.rank() != 2 || coords.shape()[1] < 2 || coords.shape()[0] != labels.len() {
        return Err(Error::invalid("eval", "projection and labels disagree in shape"));
    }
    let io = |source| Error::Io { path: "<projection>".into(), source };
    writeln!(w, "x,y,label").map_err(io)?;
    for (i, label) in labels.iter().enumerate() {
        let r = coords.row(i);
        writeln!(w, "{},{},{label}", r[0], r[1]).map_err(io)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Pca,
    Tsne,
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// `[n_real + n_synth, 2]`
    pub coords: Tensor,
    pub labels: Vec<Label>,
    pub method: Method,
    /// PCA only
    pub explained_variance: Option<Vec<f64>>,
}

impl ProjectionResult {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_projection(w, &self.coords, &self.labels)
    }
}

/// Flattens, stacks and projects onto the top two principal components.
pub fn project_pca(real: &[Series], synthetic: &[Series]) -> Result<ProjectionResult> {
    let (x, labels) = flatten_for_projection(real, synthetic)?;
    let pca = pca_project(&x, 2)?;
    Ok(ProjectionResult { coords: pca.coords, labels, method: Method::Pca, explained_variance: Some(pca.ratios) })
}

/// Flattens, stacks and embeds with t-SNE.
pub fn project_tsne(real: &[Series], synthetic: &[Series], cfg: &TsneConfig, exec: Execution) -> Result<ProjectionResult> {
    let (x, labels) = flatten_for_projection(real, synthetic)?;
    let t = tsne_project(&x, cfg, exec)?;
    Ok(ProjectionResult { coords: t.coords, labels, method: Method::Tsne, explained_variance: None })
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the
/// empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ks", "both samples must be non-empty"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("ks", "samples contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-channel comparison of values pooled over all series and time steps.
/// Standard deviations are population (divide by `n`).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMarginal {
    pub channel: usize,
    pub real_mean: f64,
    pub real_std: f64,
    pub synthetic_mean: f64,
    pub synthetic_std: f64,
    pub ks: f64,
}

impl ChannelMarginal {
    pub fn mean_delta(&self) -> f64 {
        self.synthetic_mean - self.real_mean
    }

    pub fn std_delta(&self) -> f64 {
        self.synthetic_std - self.real_std
    }
}

pub fn marginal_report(real: &[Series], synthetic: &[Series]) -> Result<Vec<ChannelMarginal>> {
    if real.is_empty() || synthetic.is_empty() {
        return Err(Error::invalid("marginals", "need both real and synthetic series"));
    }
    let (_, c) = check_geometry(real, synthetic)?;
    let pooled = |set: &[Series], ch: usize| -> Vec<f64> {
        set.iter().flat_map(|s| (0..s.len()).map(move |t| s.get(t, ch))).collect()
    };
    (0..c)
        .map(|ch| {
            let (r, s) = (pooled(real, ch), pooled(synthetic, ch));
            let (real_mean, real_std) = mean_std(&r);
            let (synthetic_mean, synthetic_std) = mean_std(&s);
            Ok(ChannelMarginal { channel: ch, real_mean, real_std, synthetic_mean, synthetic_std, ks: ks_statistic(&r, &s)? })
        })
        .collect()
}

pub fn write_marginals(mut w: impl Write, report: &[ChannelMarginal]) -> Result<()> {
    let io = |source| Error::Io { path: "<marginals>".into(), source };
    writeln!(w, "channel,real_mean,real_std,synthetic_mean,synthetic_std,mean_delta,std_delta,ks_pooled").map_err(io)?;
    for r in report {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.channel,
            r.real_mean,
            r.real_std,
            r.synthetic_mean,
            r.synthetic_std,
            r.mean_delta(),
            r.std_delta(),
            r.ks
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Mean pairwise Euclidean distance within each group of synthetic series,
/// and the unweighted mean over groups.
#[derive(Clone, Debug, PartialEq)]
pub struct DiversityReport {
    pub groups: Vec<(String, f64)>,
    pub grand_mean: f64,
}

fn distance(a: &Series, b: &Series) -> f64 {
    a.values.data().iter().zip(b.values.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mean_pairwise(group: &[Series], exec: Execution) -> f64 {
    let n = group.len();
    let rows = exec.map_range(n, |i| (i + 1..n).map(|j| distance(&group[i], &group[j])).sum::<f64>());
    rows.iter().sum::<f64>() / (n * (n - 1) / 2) as f64
}

pub fn diversity_report(groups: &[(String, Vec<Series>)], exec: Execution) -> Result<DiversityReport> {
    if groups.is_empty() {
        return Err(Error::invalid("diversity", "no groups given"));
    }
    let all: Vec<Series> = groups.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
    check_geometry(&all, &[])?;
    if let Some((name, g)) = groups.iter().find(|(_, g)| g.len() < 2) {
        return Err(Error::invalid("diversity", format!("group {name:?} has {} member(s), need at least 2", g.len())));
    }
    let groups: Vec<(String, f64)> = groups.iter().map(|(name, g)| (name.clone(), mean_pairwise(g, exec))).collect();
    let grand_mean = groups.iter().map(|(_, d)| d).sum::<f64>() / groups.len() as f64;
    Ok(DiversityReport { groups, grand_mean })
}

pub fn write_diversity(mut w: impl Write, report: &DiversityReport) -> Result<()> {
    let io = |source| Error::Io { path: "<diversity>".into(), source };
    writeln!(w, "group,mean_pairwise_distance").map_err(io)?;
    for (name, d) in &report.groups {
        writeln!(w, "{name},{d}").map_err(io)?;
    }
    writeln!(w, "ALL,{}", report.grand_mean).map_err(io)
}

/// Groups series by the part of their id before `#`, keeping first-seen
/// order.
pub fn group_by_source(series: &[Series]) -> Vec<(String, Vec<Series>)> {
    let mut groups: indexmap::IndexMap<String, Vec<Series>> = indexmap::IndexMap::new();
    for s in series {
        let key = s.id.split_once('#').map_or(s.id.as_str(), |(k, _)| k);
        groups.entry(key.to_string()).or_default().push(s.clone());
    }
    groups.into_iter().collect()
}

pub fn save_with(path: impl AsRef<Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f(&mut w)?;
    w.flush().map_err(io)
}
