use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::DataError;

/// How many patches to hide, and in what arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskSpec {
    /// `m` distinct patches chosen uniformly at random.
    Uniform { m: usize },
    /// `count` non-overlapping runs of `size` consecutive patches.
    Blocks { count: usize, size: usize },
}

impl MaskSpec {
    /// Number of masked patches the spec produces.
    pub fn masked_count(&self) -> usize {
        match *self {
            MaskSpec::Uniform { m } => m,
            MaskSpec::Blocks { count, size } => count * size,
        }
    }

    pub fn check(&self, t: usize) -> Result<(), DataError> {
        match *self {
            MaskSpec::Uniform { m } if m > t => {
                Err(DataError::Mask(format!("cannot mask {m} of {t} patches")))
            }
            MaskSpec::Blocks { count, size } if size == 0 && count > 0 => {
                Err(DataError::Mask("block size must be positive".into()))
            }
            MaskSpec::Blocks { count, size } if count * size > t => Err(DataError::Mask(format!(
                "{count} blocks of {size} patches do not fit in {t} patches"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSpec::Uniform { m } => write!(f, "uniform:{m}"),
            MaskSpec::Blocks { count, size } => write!(f, "blocks:{count}x{size}"),
        }
    }
}

impl FromStr for MaskSpec {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::Mask(format!("cannot parse mask spec {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "uniform" => Ok(MaskSpec::Uniform { m: rest.parse().map_err(|_| bad())? }),
            "blocks" => {
                let (c, z) = rest.split_once('x').ok_or_else(bad)?;
                Ok(MaskSpec::Blocks { count: c.parse().map_err(|_| bad())?, size: z.parse().map_err(|_| bad())? })
            }
            _ => Err(bad()),
        }
    }
}

/// Partition of the patch indices `0..t` into masked and visible sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaskPattern {
    t: usize,
    masked: Vec<usize>,
}

impl MaskPattern {
    /// Builds a pattern from any collection of masked indices; duplicates
    /// are merged and the result is sorted.
    pub fn new(t: usize, masked: impl IntoIterator<Item = usize>) -> Result<Self, DataError> {
        let mut masked: Vec<usize> = masked.into_iter().collect();
        masked.sort_unstable();
        masked.dedup();
        if let Some(&bad) = masked.iter().find(|&&i| i >= t) {
            return Err(DataError::Mask(format!("index {bad} out of range for {t} patches")));
        }
        Ok(MaskPattern { t, masked })
    }

    pub fn empty(t: usize) -> Self {
        MaskPattern { t, masked: Vec::new() }
    }

    pub fn total(&self) -> usize {
        self.t
    }

    pub fn masked(&self) -> &[usize] {
        &self.masked
    }

    pub fn visible(&self) -> Vec<usize> {
        (0..self.t).filter(|i| !self.is_masked(*i)).collect()
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.masked.binary_search(&i).is_ok()
    }

    /// Number of masked patches.
    pub fn m(&self) -> usize {
        self.masked.len()
    }

    /// Number of visible patches.
    pub fn n(&self) -> usize {
        self.t - self.masked.len()
    }
}

/// Draws a mask over `t` patches.
///
/// Block placements are drawn uniformly over all valid arrangements: a
/// placement of `count` runs of length `size` corresponds one-to-one to a
/// choice of `count` slots among `t - count*size + count`, with run `i`
/// starting at `slot_i + i*(size-1)`.
pub fn sample_mask<R: Rng + ?Sized>(t: usize, spec: MaskSpec, rng: &mut R) -> Result<MaskPattern, DataError> {
    spec.check(t)?;
    match spec {
        MaskSpec::Uniform { m } => {
            let masked = rand::seq::index::sample(rng, t, m).into_vec();
            MaskPattern::new(t, masked)
        }
        MaskSpec::Blocks { count: 0, .. } => Ok(MaskPattern::empty(t)),
        MaskSpec::Blocks { count, size } => {
            let slots = t - count * size + count;
            let mut chosen = rand::seq::index::sample(rng, slots, count).into_vec();
            chosen.sort_unstable();
            let masked = chosen
                .iter()
                .enumerate()
                .flat_map(|(i, &c)| {
                    let start = c + i * (size - 1);
                    start..start + size
                })
                .collect::<Vec<_>>();
            MaskPattern::new(t, masked)
        }
    }
}
