use serde::{Deserialize, Serialize};
use tabsketch::{memory_footprint, AccuracyReport, BuildStats, Distribution, F2sTrace, MemoryLayout};

/// Outcome of one build, or the average of several identical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub strategy: String,
    pub tau: usize,
    pub batch: usize,
    pub depth: usize,
    pub width: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub counter_bits: u32,
    pub distribution: String,
    pub alpha: Option<f64>,
    pub items: u64,
    pub repeats: usize,
    pub seconds: f64,
    /// Millions of items per second: `items / seconds / 1e6`.
    pub throughput_mips: f64,
    pub hash_seconds: f64,
    pub update_seconds: f64,
    pub memory_bits_multi_table: u64,
    pub memory_bits_single_table: u64,
    pub slowdown: Option<f64>,
    pub f2s: Option<F2sTrace>,
    pub accuracy: Option<AccuracyReport>,
}

/// Counter memory of both layouts for a sketch of `depth x width` fed
/// `items` items by `tau` workers.
pub fn memory_bits(depth: usize, width: usize, tau: usize, batch: usize, items: u64) -> (u64, u64) {
    let f = |layout| memory_footprint(depth as u64, width as u64, tau as u64, batch as u64, items, layout);
    (f(MemoryLayout::MultiTable), f(MemoryLayout::SingleTableBuffered))
}

pub fn throughput_mips(items: u64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        items as f64 / seconds / 1e6
    } else {
        0.0
    }
}

/// Fields shared by every report of one configuration.
#[derive(Debug, Clone)]
pub struct RunShape {
    pub strategy: String,
    pub tau: usize,
    pub batch: usize,
    pub depth: usize,
    pub width: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub counter_bits: u32,
    pub distribution: Option<Distribution>,
    pub items: u64,
    pub slowdown: Option<f64>,
}

impl BenchReport {
    /// Averages the timings of `runs`, which must not be empty.
    pub fn from_runs(shape: RunShape, runs: &[BuildStats], f2s: Option<F2sTrace>, accuracy: Option<AccuracyReport>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = |f: fn(&BuildStats) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let seconds = mean(|s| s.total.as_secs_f64());
        let (multi, single) = memory_bits(shape.depth, shape.width, shape.tau, shape.batch, shape.items);
        let (distribution, alpha) = match shape.distribution {
            Some(Distribution::Uniform) => ("uniform".to_string(), None),
            Some(Distribution::Zipf { alpha }) => ("zipf".to_string(), Some(alpha)),
            None => ("file".to_string(), None),
        };
        BenchReport {
            strategy: shape.strategy,
            tau: shape.tau,
            batch: shape.batch,
            depth: shape.depth,
            width: shape.width,
            epsilon: shape.epsilon,
            delta: shape.delta,
            counter_bits: shape.counter_bits,
            distribution,
            alpha,
            items: shape.items,
            repeats: runs.len(),
            seconds,
            throughput_mips: throughput_mips(shape.items, seconds),
            hash_seconds: mean(|s| s.hash_time.as_secs_f64()),
            update_seconds: mean(|s| s.update_time.as_secs_f64()),
            memory_bits_multi_table: multi,
            memory_bits_single_table: single,
            slowdown: shape.slowdown,
            f2s,
            accuracy,
        }
    }

    pub fn csv_row(&self) -> CsvRow {
        let last = |v: &[f64]| v.last().copied();
        CsvRow {
            strategy: self.strategy.clone(),
            tau: self.tau,
            batch: self.batch,
            depth: self.depth,
            width: self.width,
            epsilon: self.epsilon,
            delta: self.delta,
            counter_bits: self.counter_bits,
            distribution: self.distribution.clone(),
            alpha: self.alpha,
            items: self.items,
            repeats: self.repeats,
            seconds: self.seconds,
            throughput_mips: self.throughput_mips,
            hash_seconds: self.hash_seconds,
            update_seconds: self.update_seconds,
            memory_bits_multi_table: self.memory_bits_multi_table,
            memory_bits_single_table: self.memory_bits_single_table,
            slowdown: self.slowdown,
            final_hash_f2s: self.f2s.as_ref().and_then(|t| last(&t.hashing)),
            final_update_f2s: self.f2s.as_ref().and_then(|t| last(&t.update)),
            max_overestimate: self.accuracy.as_ref().map(|a| a.max_overestimate),
            failure_fraction: self.accuracy.as_ref().map(|a| a.failure_fraction),
            underestimates: self.accuracy.as_ref().map(|a| a.underestimates),
        }
    }
}

/// Flat form of [`BenchReport`] for CSV output. Traces are reduced to their
/// final values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub strategy: String,
    pub tau: usize,
    pub batch: usize,
    pub depth: usize,
    pub width: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub counter_bits: u32,
    pub distribution: String,
    pub alpha: Option<f64>,
    pub items: u64,
    pub repeats: usize,
    pub seconds: f64,
    pub throughput_mips: f64,
    pub hash_seconds: f64,
    pub update_seconds: f64,
    pub memory_bits_multi_table: u64,
    pub memory_bits_single_table: u64,
    pub slowdown: Option<f64>,
    pub final_hash_f2s: Option<f64>,
    pub final_update_f2s: Option<f64>,
    pub max_overestimate: Option<i64>,
    pub failure_fraction: Option<f64>,
    pub underestimates: Option<usize>,
}
