use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::{CountMinSketch, Counter};

/// Exact item frequencies of a stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExactOracle {
    counts: HashMap<u32, u64>,
    total: u64,
}

impl ExactOracle {
    pub fn from_items(items: &[u32]) -> Self {
        let mut oracle = ExactOracle::default();
        oracle.extend(items.iter().copied());
        oracle
    }

    pub fn frequency(&self, x: u32) -> u64 {
        self.counts.get(&x).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }
}

impl Extend<u32> for ExactOracle {
    fn extend<I: IntoIterator<Item = u32>>(&mut self, iter: I) {
        for x in iter {
            *self.counts.entry(x).or_insert(0) += 1;
            self.total += 1;
        }
    }
}

impl FromIterator<u32> for ExactOracle {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut o = ExactOracle::default();
        o.extend(iter);
        o
    }
}

/// Deviation of sketch estimates from exact counts over the distinct items
/// of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub items: u64,
    pub distinct: usize,
    pub epsilon: f64,
    /// `epsilon · N`.
    pub threshold: f64,
    pub max_overestimate: i64,
    pub mean_overestimate: f64,
    /// Items whose overestimate is at least `epsilon · N`.
    pub failures: usize,
    pub failure_fraction: f64,
    /// Items estimated below their true count; only racy builds produce these.
    pub underestimates: usize,
    pub min_deviation: i64,
    pub one_sided: bool,
}

pub fn eval_accuracy<C: Counter>(
    cms: &CountMinSketch<C>,
    oracle: &ExactOracle,
    epsilon: f64,
) -> Result<AccuracyReport> {
    if cms.items_processed() != oracle.total() {
        return Err(Error::TotalsMismatch {
            sketch: cms.items_processed(),
            oracle: oracle.total(),
        });
    }
    let threshold = epsilon * oracle.total() as f64;
    let (mut max_over, mut min_dev, mut sum) = (i64::MIN, i64::MAX, 0i128);
    let (mut failures, mut under) = (0usize, 0usize);
    for (x, f) in oracle.iter() {
        let dev = cms.query(x).to_u64() as i64 - f as i64;
        max_over = max_over.max(dev);
        min_dev = min_dev.min(dev);
        sum += dev as i128;
        if dev as f64 >= threshold {
            failures += 1;
        }
        if dev < 0 {
            under += 1;
        }
    }
    let distinct = oracle.distinct();
    if distinct == 0 {
        max_over = 0;
        min_dev = 0;
    }
    Ok(AccuracyReport {
        items: oracle.total(),
        distinct,
        epsilon,
        threshold,
        max_overestimate: max_over,
        mean_overestimate: if distinct == 0 { 0.0 } else { sum as f64 / distinct as f64 },
        failures,
        failure_fraction: if distinct == 0 { 0.0 } else { failures as f64 / distinct as f64 },
        underestimates: under,
        min_deviation: min_dev,
        one_sided: under == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SketchParams;

    #[test]
    fn counts() {
        let empty = ExactOracle::from_items(&[]);
        assert!(empty.is_empty());
        assert_eq!(empty.total(), 0);

        let o = ExactOracle::from_items(&[7, 7, 9]);
        assert_eq!(o.frequency(7), 2);
        assert_eq!(o.frequency(9), 1);
        assert_eq!(o.frequency(1), 0);
        assert_eq!(o.total(), 3);
        assert_eq!(o.iter().map(|(_, f)| f).sum::<u64>(), 3);
    }

    #[test]
    fn single_item_stream_is_exact() {
        let mut cms = CountMinSketch::<u32>::new(SketchParams::with_dims(4, 50).unwrap(), 1).unwrap();
        let items = vec![42u32; 17];
        cms.extend_from_slice(&items);
        let r = eval_accuracy(&cms, &ExactOracle::from_items(&items), 0.01).unwrap();
        assert_eq!(r.max_overestimate, 0);
        assert_eq!(r.failures, 0);
        assert!(r.one_sided);
    }

    #[test]
    fn totals_must_match() {
        let mut cms = CountMinSketch::<u32>::new(SketchParams::with_dims(2, 8).unwrap(), 1).unwrap();
        cms.extend_from_slice(&[1, 2]);
        let err = eval_accuracy(&cms, &ExactOracle::from_items(&[1]), 0.1).unwrap_err();
        assert_eq!(err, Error::TotalsMismatch { sketch: 2, oracle: 1 });
    }

    #[test]
    fn underestimates_are_reported() {
        // A sketch that lost increments: built from fewer copies than the oracle saw.
        let params = SketchParams::with_dims(1, 4).unwrap();
        let mut cms = CountMinSketch::<u32>::new(params, 3).unwrap();
        cms.extend_from_slice(&[5]);
        let cms = CountMinSketch::<u32>::from_parts(params, cms.seeds(), 2, false, cms.row(0)).unwrap();
        let r = eval_accuracy(&cms, &ExactOracle::from_items(&[5, 5]), 0.5).unwrap();
        assert_eq!(r.min_deviation, -1);
        assert_eq!(r.underestimates, 1);
        assert!(!r.one_sided);
    }
}
