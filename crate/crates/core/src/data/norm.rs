use super::{DataError, Series};
use crate::autodiff::Tensor;

/// Per-channel min/max of a training split, mapping each channel onto [0, 1].
///
/// Constant channels (max == min) map to 0.5 and invert to their value.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn fit(train: &[Series]) -> Result<Self, DataError> {
        let first = train.first().ok_or_else(|| DataError::Geometry("cannot fit normalizer on no series".into()))?;
        let c = first.channels();
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for s in train {
            if s.channels() != c {
                return Err(DataError::Geometry(format!(
                    "series {:?} has {} channels, expected {c}",
                    s.id,
                    s.channels()
                )));
            }
            for row in s.values.data().chunks(c) {
                for (k, &v) in row.iter().enumerate() {
                    min[k] = min[k].min(v);
                    max[k] = max[k].max(v);
                }
            }
        }
        Ok(NormStats { min, max })
    }

    /// Stats that leave values unchanged.
    pub fn identity(channels: usize) -> Self {
        NormStats { min: vec![0.0; channels], max: vec![1.0; channels] }
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn is_constant(&self, channel: usize) -> bool {
        self.max[channel] == self.min[channel]
    }

    fn check(&self, s: &Series) -> Result<(), DataError> {
        if s.channels() != self.channels() {
            return Err(DataError::Geometry(format!(
                "normalizer fitted on {} channels, series {:?} has {}",
                self.channels(),
                s.id,
                s.channels()
            )));
        }
        Ok(())
    }

    fn map(&self, s: &Series, f: impl Fn(usize, f64) -> f64) -> Result<Series, DataError> {
        self.check(s)?;
        let c = self.channels();
        let data = s.values.data().iter().enumerate().map(|(i, &v)| f(i % c, v)).collect();
        Series::new(s.id.clone(), Tensor::new(s.values.shape().to_vec(), data)?)
    }

    pub fn apply(&self, s: &Series) -> Result<Series, DataError> {
        self.map(s, |k, v| {
            if self.is_constant(k) {
                0.5
            } else {
                (v - self.min[k]) / (self.max[k] - self.min[k])
            }
        })
    }

    pub fn invert(&self, s: &Series) -> Result<Series, DataError> {
        self.map(s, |k, v| self.min[k] + v * (self.max[k] - self.min[k]))
    }
}
