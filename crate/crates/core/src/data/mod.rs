//! Series ingestion, the Sines generator, normalization, and the
//! patch/mask machinery.

mod csv_io;
mod mask;
mod norm;
mod patch;
mod sines;

pub use csv_io::{load_csv, load_csv_with, read_csv, read_csv_with, write_csv, write_series_csv, CsvOptions};
pub use mask::{sample_mask, MaskPattern, MaskSpec};
pub use norm::NormStats;
pub use patch::{merge_patches, patchify, split_patches, unpatchify, PatchGrid, SplitPatches};
pub use sines::generate_sines;

use crate::autodiff::Tensor;

/// A multivariate series of shape `[L, C]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub id: String,
    pub values: Tensor,
}

impl Series {
    pub fn new(id: impl Into<String>, values: Tensor) -> Result<Self, DataError> {
        if values.rank() != 2 {
            return Err(DataError::Geometry(format!(
                "series values must be [L, C], got {:?}",
                values.shape()
            )));
        }
        if !values.all_finite() {
            return Err(DataError::Geometry("series contains non-finite values".into()));
        }
        Ok(Series { id: id.into(), values })
    }

    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn get(&self, step: usize, channel: usize) -> f64 {
        self.values.data()[step * self.channels() + channel]
    }
}

/// Cuts `s` into windows of `len` steps, advancing by `stride`.
///
/// Window ids are `<id>@<start>`.
pub fn windows(s: &Series, len: usize, stride: usize) -> Result<Vec<Series>, DataError> {
    if len == 0 || stride == 0 {
        return Err(DataError::Geometry("window length and stride must be positive".into()));
    }
    if len > s.len() {
        return Err(DataError::Geometry(format!(
            "window length {len} exceeds series length {}",
            s.len()
        )));
    }
    let c = s.channels();
    (0..=s.len() - len)
        .step_by(stride)
        .map(|start| {
            let data = s.values.data()[start * c..(start + len) * c].to_vec();
            Series::new(format!("{}@{start}", s.id), Tensor::new(vec![len, c], data)?)
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: cannot parse {value:?} as a finite number")]
    Parse { row: usize, column: usize, value: String },
    #[error("no data rows")]
    NoData,
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("series {id:?} has {len} rows, expected {expected}")]
    Ragged { id: String, len: usize, expected: usize },
    #[error("patch length {p} does not divide series length {l} (remainder {rem})")]
    PatchLength { p: usize, l: usize, rem: usize },
    #[error("infeasible mask: {0}")]
    Mask(String),
    #[error("{0}")]
    Geometry(String),
    #[error(transparent)]
    Tensor(#[from] crate::autodiff::TensorError),
}
