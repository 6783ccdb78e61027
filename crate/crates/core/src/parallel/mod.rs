//! Shared-memory sketch construction.
//!
//! * [`build_sequential`]: one thread, one item at a time.
//! * [`build_multi_table`]: one private sketch per worker over a slice of the
//!   stream, summed at the end.
//! * [`build_naive`]: workers insert items straight into the shared sketch,
//!   either with indivisible increments or with plain racy ones.
//! * [`build_buffered`]: batches processed in two phases. Workers first fill a
//!   [`HashBuffer`] with the column ids of their share of the batch, meet at a
//!   rendezvous, then each worker applies the increments of the rows it owns.
//!   No counter is ever written by two workers, so the result is exact.

mod barrier;
mod buffer;
mod observer;
mod partition;

pub use barrier::SpinBarrier;
pub use buffer::HashBuffer;
pub use observer::{BuildEvent, BuildObserver, EventLog, NoObserver};
pub use partition::{balanced_range, RowPartition};

use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::{CountMinSketch, Counter};

/// Batch size used when none is given.
pub const DEFAULT_BATCH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Sequential,
    MultiTable,
    NaiveSync,
    NaiveRelaxed,
    Buffered,
}

/// Whether naive parallel increments are indivisible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSync {
    Synchronized,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildConfig {
    pub threads: usize,
    pub batch: usize,
    pub strategy: Strategy,
}

impl BuildConfig {
    pub fn new(strategy: Strategy, threads: usize) -> Self {
        BuildConfig {
            threads,
            batch: DEFAULT_BATCH,
            strategy,
        }
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    /// Row ownership used in the update phase of buffered builds.
    pub fn row_partition(&self, depth: usize) -> RowPartition {
        RowPartition::contiguous(depth, self.threads)
    }

    pub fn build<C: Counter>(&self, cms: &mut CountMinSketch<C>, items: &[u32]) -> Result<BuildStats> {
        match self.strategy {
            Strategy::Sequential => Ok(build_sequential(cms, items)),
            Strategy::MultiTable => build_multi_table(cms, items, self.threads),
            Strategy::NaiveSync => build_naive(cms, items, self.threads, UpdateSync::Synchronized),
            Strategy::NaiveRelaxed => build_naive(cms, items, self.threads, UpdateSync::Relaxed),
            Strategy::Buffered => build_buffered(cms, items, self.threads, self.batch),
        }
    }
}

/// Timings gathered during a build. Phase times are only filled in by
/// buffered builds, measured by worker 0 at the rendezvous points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub items: u64,
    pub threads: usize,
    pub batch: usize,
    pub batches: usize,
    pub total: Duration,
    pub hash_time: Duration,
    pub update_time: Duration,
    /// Number of full `d x w` counter tables alive during the build.
    pub counter_tables: usize,
}

impl BuildStats {
    /// Millions of items per second.
    pub fn throughput_mips(&self) -> f64 {
        let secs = self.total.as_secs_f64();
        if secs == 0.0 {
            0.0
        } else {
            self.items as f64 / secs / 1e6
        }
    }
}

fn check_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::invalid("threads", "at least one worker is required"));
    }
    Ok(())
}

pub fn build_sequential<C: Counter>(cms: &mut CountMinSketch<C>, items: &[u32]) -> BuildStats {
    let start = Instant::now();
    cms.extend_from_slice(items);
    BuildStats {
        items: items.len() as u64,
        threads: 1,
        batch: items.len(),
        batches: usize::from(!items.is_empty()),
        total: start.elapsed(),
        counter_tables: 1,
        ..Default::default()
    }
}

/// Each worker inserts a contiguous slice of `items` directly into the shared
/// counters.
///
/// With [`UpdateSync::Relaxed`] increments race: some are lost, none are
/// invented, so every counter ends up at most its sequential value.
pub fn build_naive<C: Counter>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    threads: usize,
    sync: UpdateSync,
) -> Result<BuildStats> {
    check_threads(threads)?;
    let start = Instant::now();
    let width = cms.width() as u32;
    // No counter can exceed the item count, so fetch_add is safe below this.
    let may_saturate = cms.items_processed().saturating_add(items.len() as u64) > C::MAX.to_u64();
    let saturated = AtomicBool::new(false);
    {
        let (hasher, storage) = cms.parts_mut();
        let stride = storage.stride();
        let cells = C::as_atomic(storage.padded_mut());
        let worker = |part: &[u32]| {
            let mut ok = true;
            for &x in part {
                hasher.for_each_column(x, width, |r, c| {
                    let cell = &cells[r * stride + c as usize];
                    match sync {
                        UpdateSync::Synchronized if may_saturate => ok &= C::atomic_inc_saturating(cell),
                        UpdateSync::Synchronized => C::atomic_inc(cell),
                        UpdateSync::Relaxed => ok &= C::racy_inc(cell),
                    }
                });
            }
            if !ok {
                saturated.store(true, Ordering::Relaxed);
            }
        };
        thread::scope(|s| {
            for t in 1..threads {
                let part = &items[balanced_range(items.len(), threads, t)];
                s.spawn(move || worker(part));
            }
            worker(&items[balanced_range(items.len(), threads, 0)]);
        });
    }
    cms.record_items(items.len() as u64, saturated.into_inner());
    Ok(BuildStats {
        items: items.len() as u64,
        threads,
        batch: items.len(),
        batches: usize::from(!items.is_empty()),
        total: start.elapsed(),
        counter_tables: 1,
        ..Default::default()
    })
}

/// One private sketch per worker over a contiguous slice of the stream, all
/// sharing `cms`'s hash functions; the partial sketches are added into `cms`.
pub fn build_multi_table<C: Counter>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    threads: usize,
) -> Result<BuildStats> {
    check_threads(threads)?;
    let start = Instant::now();
    let params = *cms.params();
    let hasher = cms.hasher().clone();
    let partials: Vec<Result<CountMinSketch<C>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let part = &items[balanced_range(items.len(), threads, t)];
                let hasher = hasher.clone();
                s.spawn(move || {
                    let mut local = CountMinSketch::<C>::with_hasher(params, hasher)?;
                    local.extend_from_slice(part);
                    Ok(local)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    });
    for partial in partials {
        cms.merge_from(&partial?)?;
    }
    Ok(BuildStats {
        items: items.len() as u64,
        threads,
        batch: items.len(),
        batches: usize::from(!items.is_empty()),
        total: start.elapsed(),
        counter_tables: threads,
        ..Default::default()
    })
}

/// Two-phase buffered construction over batches of `batch` items.
pub fn build_buffered<C: Counter>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    threads: usize,
    batch: usize,
) -> Result<BuildStats> {
    build_buffered_observed(cms, items, threads, batch, &NoObserver)
}

/// [`build_buffered`] reporting every phase boundary to `observer`.
pub fn build_buffered_observed<C: Counter, O: BuildObserver>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    threads: usize,
    batch: usize,
    observer: &O,
) -> Result<BuildStats> {
    check_threads(threads)?;
    if batch == 0 {
        return Err(Error::invalid("batch", "batch size must be at least 1"));
    }
    let start = Instant::now();
    let depth = cms.depth();
    let width = cms.width() as u32;
    let n = items.len();
    let batches = n.div_ceil(batch);
    let partition = RowPartition::contiguous(depth, threads);
    let buffer = HashBuffer::new(batch.min(n.max(1)), depth);
    let barrier = SpinBarrier::new(threads);
    let saturated = AtomicBool::new(false);

    let (hash_time, update_time) = {
        let (hasher, storage) = cms.parts_mut();
        let mut rows = storage.rows_mut().into_iter().enumerate();
        let mut owned: Vec<Vec<(usize, &mut [C])>> = (0..threads)
            .map(|w| rows.by_ref().take(partition.rows_of(w).len()).collect())
            .collect();

        let worker = |id: usize, mut my_rows: Vec<(usize, &mut [C])>| {
            let _guard = barrier.poison_on_panic();
            let mut ok = true;
            let (mut hash_time, mut update_time) = (Duration::ZERO, Duration::ZERO);
            for b in 0..batches {
                let t0 = Instant::now();
                let chunk = &items[b * batch..((b + 1) * batch).min(n)];
                let mine = balanced_range(chunk.len(), threads, id);
                observer.record(BuildEvent::HashBegin { worker: id, batch: b });
                for j in mine {
                    hasher.for_each_column(chunk[j], width, |r, c| buffer.set(j, r, c));
                }
                observer.record(BuildEvent::HashEnd { worker: id, batch: b });
                barrier.wait();
                let t1 = Instant::now();

                for (row, cells) in my_rows.iter_mut() {
                    let items = 0..chunk.len();
                    observer.record(BuildEvent::UpdateBegin {
                        worker: id,
                        batch: b,
                        stage: 0,
                        row: *row,
                        items: items.clone(),
                    });
                    for j in items.clone() {
                        ok &= cells[buffer.get(j, *row) as usize].saturating_inc();
                    }
                    observer.record(BuildEvent::UpdateEnd {
                        worker: id,
                        batch: b,
                        stage: 0,
                        row: *row,
                        items,
                    });
                }
                barrier.wait();
                hash_time += t1 - t0;
                update_time += t1.elapsed();
            }
            if !ok {
                saturated.store(true, Ordering::Relaxed);
            }
            (hash_time, update_time)
        };

        thread::scope(|s| {
            let first = std::mem::take(&mut owned[0]);
            for (id, rows) in owned.into_iter().enumerate().skip(1) {
                let worker = &worker;
                s.spawn(move || worker(id, rows));
            }
            worker(0, first)
        })
    };
    cms.record_items(n as u64, saturated.into_inner());
    Ok(BuildStats {
        items: n as u64,
        threads,
        batch,
        batches,
        total: start.elapsed(),
        hash_time,
        update_time,
        counter_tables: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::TabulationTable;
    use crate::sketch::SketchParams;

    /// Counters recomputed with one naive table per row and a scalar loop.
    fn recount(cms: &CountMinSketch<u32>, items: &[u32]) -> Vec<Vec<u32>> {
        let tables: Vec<_> = cms.seeds().iter().map(|&s| TabulationTable::new(s)).collect();
        let w = cms.width() as u32;
        let mut rows = vec![vec![0u32; cms.width()]; cms.depth()];
        for &x in items {
            for (r, t) in tables.iter().enumerate() {
                rows[r][(t.hash32(x) % w) as usize] += 1;
            }
        }
        rows
    }

    fn rows_of(cms: &CountMinSketch<u32>) -> Vec<Vec<u32>> {
        cms.rows().map(|r| r.to_vec()).collect()
    }

    fn stream(n: usize, seed: u32) -> Vec<u32> {
        (0..n as u32)
            .map(|i| (i ^ seed).wrapping_mul(0x9E37_79B9).rotate_left(7) % 5000)
            .collect()
    }

    fn fresh(d: usize, w: usize) -> CountMinSketch<u32> {
        CountMinSketch::new(SketchParams::with_dims(d, w).unwrap(), 7).unwrap()
    }

    #[test]
    fn sequential_matches_recount() {
        let items = stream(1 << 16, 1);
        let mut cms = fresh(8, 2003);
        build_sequential(&mut cms, &items);
        assert_eq!(rows_of(&cms), recount(&cms, &items));
    }

    #[test]
    fn empty_and_tiny_streams() {
        let mut cms = fresh(3, 10);
        build_sequential(&mut cms, &[]);
        assert!(cms.rows().all(|r| r.iter().all(|&c| c == 0)));
        build_sequential(&mut cms, &[4, 4, 9]);
        assert!(cms.rows().all(|r| r.iter().sum::<u32>() == 3));

        let mut buffered = fresh(3, 10);
        build_buffered(&mut buffered, &[], 3, 4).unwrap();
        assert_eq!(buffered.items_processed(), 0);
    }

    #[test]
    fn buffered_matches_sequential_for_odd_shapes() {
        let items = stream(1000, 2);
        let mut expected = fresh(7, 101);
        build_sequential(&mut expected, &items);
        for (threads, batch) in [(1, 1000), (1, 1024), (2, 1024), (3, 64), (4, 7), (9, 100), (16, 1)] {
            let mut cms = fresh(7, 101);
            build_buffered(&mut cms, &items, threads, batch).unwrap();
            assert_eq!(cms, expected, "threads={threads} batch={batch}");
        }
    }

    #[test]
    fn naive_and_multi_match_sequential() {
        let items = stream(1 << 16, 3);
        let mut expected = fresh(8, 2003);
        build_sequential(&mut expected, &items);
        for threads in [1, 4] {
            let mut cms = fresh(8, 2003);
            build_naive(&mut cms, &items, threads, UpdateSync::Synchronized).unwrap();
            assert_eq!(cms, expected);
        }
        for threads in [1, 8] {
            let mut cms = fresh(8, 2003);
            let stats = build_multi_table(&mut cms, &items, threads).unwrap();
            assert_eq!(cms, expected);
            assert_eq!(stats.counter_tables, threads);
        }
        let mut single = fresh(8, 2003);
        build_naive(&mut single, &items, 1, UpdateSync::Relaxed).unwrap();
        assert_eq!(single, expected);
    }

    #[test]
    fn relaxed_never_exceeds_sequential() {
        let items = stream(1 << 16, 4);
        let mut expected = fresh(4, 31);
        build_sequential(&mut expected, &items);
        let mut cms = fresh(4, 31);
        build_naive(&mut cms, &items, 4, UpdateSync::Relaxed).unwrap();
        for (a, b) in cms.rows().zip(expected.rows()) {
            assert!(a.iter().zip(b).all(|(x, y)| x <= y));
            assert!(a.iter().map(|&c| c as u64).sum::<u64>() <= items.len() as u64);
        }
    }

    #[test]
    fn zero_threads_or_batch_rejected() {
        let mut cms = fresh(2, 4);
        assert!(build_buffered(&mut cms, &[1], 0, 4).is_err());
        assert!(build_buffered(&mut cms, &[1], 1, 0).is_err());
        assert!(build_naive(&mut cms, &[1], 0, UpdateSync::Relaxed).is_err());
        assert!(build_multi_table(&mut cms, &[1], 0).is_err());
    }

    #[test]
    fn buffered_saturates_like_sequential() {
        let params = SketchParams::with_dims(2, 3).unwrap();
        let full = [u32::MAX - 1; 6];
        let mut a = CountMinSketch::<u32>::from_parts(params, &[1, 2], 0, false, &full).unwrap();
        let mut b = a.clone();
        build_sequential(&mut a, &[5, 5, 5]);
        build_buffered(&mut b, &[5, 5, 5], 2, 2).unwrap();
        assert_eq!(a, b);
        assert!(b.is_saturated());
    }

    #[test]
    fn build_config_dispatch() {
        let items = stream(5000, 5);
        let mut expected = fresh(6, 97);
        build_sequential(&mut expected, &items);
        for strategy in [Strategy::Sequential, Strategy::MultiTable, Strategy::NaiveSync, Strategy::Buffered] {
            let cfg = BuildConfig::new(strategy, 3).with_batch(128);
            let mut cms = fresh(6, 97);
            let stats = cfg.build(&mut cms, &items).unwrap();
            assert_eq!(cms, expected, "{strategy:?}");
            assert_eq!(stats.items, 5000);
        }
        assert_eq!(BuildConfig::new(Strategy::Buffered, 4).row_partition(8).rows_of(3), 6..8);
    }
}
