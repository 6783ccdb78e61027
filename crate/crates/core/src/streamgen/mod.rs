//! Synthetic workloads and ground truth.
//!
//! Streams are drawn either uniformly from a universe of `n` items or from a
//! Zipfian law over ranks `1..=n` (`P(k) ∝ 1/k^alpha`). Zipf ranks are mapped
//! to item ids through a seeded permutation so frequent items are scattered
//! over the key space.

mod oracle;
mod zipf;

pub use oracle::{eval_accuracy, AccuracyReport, ExactOracle};
pub use zipf::ZipfTable;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator used for stream sampling.
pub const STREAM_PRNG: &str = "xoshiro256++";

/// Offset mixed into the seed of the rank permutation so it is independent
/// of the sampling sequence.
const PERMUTATION_SALT: u64 = 0xA076_1D64_78BD_642F;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    Zipf { alpha: f64 },
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distribution::Uniform => write!(f, "uniform"),
            Distribution::Zipf { alpha } => write!(f, "zipf({alpha})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub distribution: Distribution,
    /// Universe size `n`; items are drawn from `0..n`.
    pub universe: u64,
    /// Stream length `N`.
    pub length: u64,
    pub seed: u64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.universe == 0 {
            return Err(Error::invalid("n", "universe must contain at least one item"));
        }
        if self.universe > 1 << 32 {
            return Err(Error::invalid("n", "items are 32-bit, universe is at most 2^32"));
        }
        if let Distribution::Zipf { alpha } = self.distribution {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::invalid("alpha", format!("{alpha} must be positive")));
            }
        }
        Ok(())
    }
}

enum Sampler {
    Uniform { universe: u64 },
    Zipf { table: ZipfTable, items: Vec<u32> },
}

/// Lazily produces the items of a [`StreamSpec`].
pub struct StreamGenerator {
    rng: Xoshiro256PlusPlus,
    sampler: Sampler,
    remaining: u64,
}

impl StreamGenerator {
    pub fn new(spec: &StreamSpec) -> Result<Self> {
        spec.validate()?;
        let sampler = match spec.distribution {
            Distribution::Uniform => Sampler::Uniform {
                universe: spec.universe,
            },
            Distribution::Zipf { alpha } => {
                let table = ZipfTable::new(spec.universe as usize, alpha)?;
                let mut items: Vec<u32> = (0..spec.universe).map(|i| i as u32).collect();
                let mut perm_rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed ^ PERMUTATION_SALT);
                items.shuffle(&mut perm_rng);
                Sampler::Zipf { table, items }
            }
        };
        Ok(StreamGenerator {
            rng: Xoshiro256PlusPlus::seed_from_u64(spec.seed),
            sampler,
            remaining: spec.length,
        })
    }

    /// Item id assigned to Zipf rank `rank` (1-based); `None` for uniform streams.
    pub fn item_of_rank(&self, rank: usize) -> Option<u32> {
        match &self.sampler {
            Sampler::Zipf { items, .. } => items.get(rank.checked_sub(1)?).copied(),
            Sampler::Uniform { .. } => None,
        }
    }
}

impl Iterator for StreamGenerator {
    type Item = u32;

    #[inline]
    fn next(&mut self) -> Option<u32> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(match &self.sampler {
            Sampler::Uniform { universe } => self.rng.random_range(0..*universe) as u32,
            Sampler::Zipf { table, items } => items[table.sample_index(self.rng.random::<f64>())],
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, usize::try_from(self.remaining).ok())
    }
}

/// Materialises the whole stream described by `spec`.
pub fn gen_stream(spec: &StreamSpec) -> Result<Vec<u32>> {
    let len = usize::try_from(spec.length).map_err(|_| Error::invalid("count", "stream too long for memory"))?;
    let generator = StreamGenerator::new(spec)?;
    let mut out = Vec::new();
    out.try_reserve_exact(len).map_err(|_| Error::Capacity {
        cells: len,
        bytes_per_cell: 4,
    })?;
    out.extend(generator);
    Ok(out)
}
