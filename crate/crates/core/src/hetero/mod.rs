//! Buffered construction on cores of two speed classes.
//!
//! Workers come in fast/slow pairs. Hashing splits each batch between the
//! fast and the slow workers according to one [`Balancer`]. Updates use a
//! second balancer: each pair owns two rows and processes them in two stages
//! (see [`PairSchedule`]) so that no row is ever written by two workers at
//! once, yet the fast worker does the larger share of both rows.
//!
//! Slow cores are emulated with [`Slowdown`]: slow workers busy-wait
//! `factor - 1` times the current per-item cost for every item they process.
//! The cost is calibrated before the build and then tracked from the
//! workers' measured times. Each balancer is fed the median time of the
//! fast and of the slow workers. The balancers only see measured times, so
//! real heterogeneous hardware needs no extra configuration.

mod affinity;
mod balancer;
mod clock;
mod emulation;
mod schedule;

pub use affinity::{pin_current_thread, AffinityHint};
pub use balancer::{BalanceStep, Balancer, Smoothing, DEFAULT_FREEZE_AFTER, DEFAULT_WINDOW, FREEZE_SPAN};
pub use clock::{calibrate, Slowdown, WorkClock};
pub use schedule::{pair_schedule, PairSchedule, RowPair, Role};

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use emulation::{calibrate_costs, CostEstimate, PhaseTimes, SharedCost};
use crate::parallel::{balanced_range, BuildEvent, BuildObserver, BuildStats, HashBuffer, NoObserver, SpinBarrier};
use crate::sketch::{CountMinSketch, Counter};

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroConfig {
    /// Number of fast/slow worker pairs; the team has `2 * pairs` threads.
    pub pairs: usize,
    pub batch: usize,
    /// Slow workers take this many times longer than fast ones.
    pub slowdown: f64,
    pub window: usize,
    pub smoothing: Smoothing,
    pub freeze_after: Option<usize>,
    pub clock: WorkClock,
    /// Rows of each worker pair. Defaults to adjacent rows `(2k, 2k+1)`
    /// spread over the pairs; required when the row count is odd.
    pub assignment: Option<Vec<Vec<RowPair>>>,
    pub affinity: Option<AffinityHint>,
}

impl HeteroConfig {
    pub fn new(pairs: usize, batch: usize) -> Self {
        HeteroConfig {
            pairs,
            batch,
            slowdown: 1.0,
            window: DEFAULT_WINDOW,
            smoothing: Smoothing::default(),
            freeze_after: Some(DEFAULT_FREEZE_AFTER),
            clock: WorkClock::default(),
            assignment: None,
            affinity: None,
        }
    }

    /// One pair per two rows.
    pub fn for_depth(depth: usize, batch: usize) -> Self {
        Self::new((depth / 2).max(1), batch)
    }

    pub fn with_slowdown(mut self, factor: f64) -> Self {
        self.slowdown = factor;
        self
    }

    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn with_freeze_after(mut self, batches: Option<usize>) -> Self {
        self.freeze_after = batches;
        self
    }

    pub fn with_assignment(mut self, assignment: Vec<Vec<RowPair>>) -> Self {
        self.assignment = Some(assignment);
        self
    }

    /// Rows owned by each worker pair, validated against `depth`.
    pub fn resolve_assignment(&self, depth: usize) -> Result<Vec<Vec<RowPair>>> {
        if self.pairs == 0 {
            return Err(Error::invalid("pairs", "at least one worker pair is required"));
        }
        let assignment = match &self.assignment {
            Some(a) => a.clone(),
            None => {
                if !depth.is_multiple_of(2) {
                    return Err(Error::RowAssignment(format!(
                        "{depth} rows cannot be paired; pass an explicit assignment"
                    )));
                }
                let row_pairs = depth / 2;
                (0..self.pairs)
                    .map(|p| {
                        balanced_range(row_pairs, self.pairs, p)
                            .map(|k| RowPair::pair(2 * k, 2 * k + 1))
                            .collect()
                    })
                    .collect()
            }
        };
        if assignment.len() != self.pairs {
            return Err(Error::RowAssignment(format!(
                "{} row groups for {} worker pairs",
                assignment.len(),
                self.pairs
            )));
        }
        let mut seen = vec![false; depth];
        for rp in assignment.iter().flatten() {
            for row in std::iter::once(rp.first).chain(rp.second) {
                if row >= depth {
                    return Err(Error::RowAssignment(format!("row {row} out of range for depth {depth}")));
                }
                if std::mem::replace(&mut seen[row], true) {
                    return Err(Error::RowAssignment(format!("row {row} assigned twice")));
                }
            }
        }
        if let Some(row) = seen.iter().position(|s| !s) {
            return Err(Error::RowAssignment(format!("row {row} is not assigned")));
        }
        Ok(assignment)
    }
}

/// Fast-to-slow ratios after each full batch, for both phases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct F2sTrace {
    pub hashing: Vec<f64>,
    pub update: Vec<f64>,
}

impl F2sTrace {
    /// `(batch, hashing F2S, update F2S)` rows.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.hashing
            .iter()
            .zip(&self.update)
            .enumerate()
            .map(|(i, (&h, &u))| (i, h, u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroStats {
    pub build: BuildStats,
    pub trace: F2sTrace,
    pub hash_split: (usize, usize),
    pub update_split: (usize, usize),
    pub slowdown: f64,
    pub pairs: usize,
}

/// Share of a short batch of `len` items matching a `fast` share of `batch`.
fn scale(fast: usize, len: usize, batch: usize) -> usize {
    if len == batch {
        fast
    } else {
        ((fast as f64 * len as f64 / batch as f64).round_ties_even() as usize).min(len)
    }
}

struct Coordinator {
    hashing: Balancer,
    update: Balancer,
    trace: F2sTrace,
    hash_time: Duration,
    update_time: Duration,
    hash_cost: CostEstimate,
    update_cost: CostEstimate,
}

pub fn build_buffered_hetero<C: Counter>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    config: &HeteroConfig,
) -> Result<HeteroStats> {
    build_buffered_hetero_observed(cms, items, config, &NoObserver)
}

pub fn build_buffered_hetero_observed<C: Counter, O: BuildObserver>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    config: &HeteroConfig,
    observer: &O,
) -> Result<HeteroStats> {
    let depth = cms.depth();
    let assignment = config.resolve_assignment(depth)?;
    let slowdown = Slowdown::new(config.slowdown)?;
    let batch = config.batch;
    let coordinator = Coordinator {
        hashing: Balancer::new(batch, config.window, config.freeze_after)?.with_smoothing(config.smoothing),
        update: Balancer::new(batch, config.window, config.freeze_after)?.with_smoothing(config.smoothing),
        trace: F2sTrace::default(),
        hash_time: Duration::ZERO,
        update_time: Duration::ZERO,
        hash_cost: CostEstimate::default(),
        update_cost: CostEstimate::default(),
    };

    let start = Instant::now();
    let pairs = config.pairs;
    let team = 2 * pairs;
    let n = items.len();
    let batches = n.div_ceil(batch);
    let width = cms.width() as u32;
    let clock = config.clock;
    let buffer = HashBuffer::new(batch.min(n.max(1)), depth);
    let barrier = SpinBarrier::new(team);
    let hash_fast = AtomicUsize::new(coordinator.hashing.fast_size());
    let update_fast = AtomicUsize::new(coordinator.update.fast_size());
    let hash_times = PhaseTimes::new(team);
    let update_times = PhaseTimes::new(team);
    let saturated = AtomicBool::new(false);

    let mut coordinator = {
        let (hasher, storage) = cms.parts_mut();
        // Slow workers pad by the current per-item cost estimate, seeded by
        // an up-front calibration.
        let emulate = slowdown.factor() > 1.0;
        let (h, u) = if emulate {
            calibrate_costs::<C>(hasher, width, items, clock)
        } else {
            (0.0, 0.0)
        };
        let (hash_cost, update_cost) = (SharedCost::new(h), SharedCost::new(u));
        let overhead = clock.read_overhead();
        let rows: Vec<Mutex<&mut [C]>> = storage.rows_mut().into_iter().map(Mutex::new).collect();

        let worker = |id: usize, mut coord: Option<Coordinator>| -> Option<Coordinator> {
            let _guard = barrier.poison_on_panic();
            let slow = id >= pairs;
            let pair = id % pairs;
            if let Some(core) = config.affinity.as_ref().and_then(|a| a.core_for(slow, pair)) {
                pin_current_thread(core);
            }
            let role = if slow { Role::Slow } else { Role::Fast };
            let mut ok = true;

            for b in 0..batches {
                let wall0 = Instant::now();
                let chunk = &items[b * batch..((b + 1) * batch).min(n)];
                let len = chunk.len();
                let full = len == batch;

                // Phase 1: hashing, fast workers take the head of the batch.
                let hf = scale(hash_fast.load(Ordering::Relaxed), len, batch);
                let mine = if slow {
                    let r = balanced_range(len - hf, pairs, pair);
                    hf + r.start..hf + r.end
                } else {
                    balanced_range(hf, pairs, pair)
                };
                observer.record(BuildEvent::HashBegin { worker: id, batch: b });
                let t0 = clock.now();
                let count = mine.len();
                for j in mine {
                    hasher.for_each_column(chunk[j], width, |r, c| buffer.set(j, r, c));
                }
                let t1 = clock.now();
                if slow {
                    slowdown.pad(clock, t1, count, hash_cost.get());
                }
                hash_times.record(id, clock.now() - t0, t1 - t0, count);
                observer.record(BuildEvent::HashEnd { worker: id, batch: b });
                barrier.wait();
                let wall1 = Instant::now();

                if let Some(c) = coord.as_mut() {
                    if emulate {
                        if let Some(cost) = c.hash_cost.observe(&hash_times, pairs, overhead) {
                            hash_cost.set(cost);
                        }
                    }
                    if full {
                        c.hashing
                            .update(hash_times.median_secs(0, pairs), hash_times.median_secs(pairs, team))
                            .expect("times are positive");
                        c.trace.hashing.push(c.hashing.f2s());
                        hash_fast.store(c.hashing.fast_size(), Ordering::Relaxed);
                    }
                }

                // Phase 2: two update stages over the pair's rows.
                let uf = scale(update_fast.load(Ordering::Relaxed), len, batch);
                let mut spent = Duration::ZERO;
                let mut raw = Duration::ZERO;
                let mut done = 0;
                for stage in [1u8, 2] {
                    for rp in &assignment[pair] {
                        for (_, row, range) in rp.tasks(stage, len, uf).into_iter().flatten().filter(|t| t.0 == role) {
                            let mut cells = rows[row]
                                .try_lock()
                                .expect("row is owned by a single worker per stage");
                            let event = |end| {
                                let (worker, batch, items) = (id, b, range.clone());
                                if end {
                                    BuildEvent::UpdateEnd { worker, batch, stage, row, items }
                                } else {
                                    BuildEvent::UpdateBegin { worker, batch, stage, row, items }
                                }
                            };
                            observer.record(event(false));
                            let t0 = clock.now();
                            for j in range.clone() {
                                ok &= cells[buffer.get(j, row) as usize].saturating_inc();
                            }
                            let t1 = clock.now();
                            if slow {
                                slowdown.pad(clock, t1, range.len(), update_cost.get());
                            }
                            spent += clock.now() - t0;
                            raw += t1 - t0;
                            done += range.len();
                            observer.record(event(true));
                        }
                    }
                    if stage == 1 {
                        barrier.wait();
                    }
                }
                update_times.record(id, spent, raw, done);
                barrier.wait();

                if let Some(c) = coord.as_mut() {
                    if emulate {
                        if let Some(cost) = c.update_cost.observe(&update_times, pairs, overhead) {
                            update_cost.set(cost);
                        }
                    }
                    if full {
                        c.update
                            .update(update_times.median_secs(0, pairs), update_times.median_secs(pairs, team))
                            .expect("times are positive");
                        c.trace.update.push(c.update.f2s());
                        update_fast.store(c.update.fast_size(), Ordering::Relaxed);
                    }
                    c.hash_time += wall1 - wall0;
                    c.update_time += wall1.elapsed();
                }
            }
            if !ok {
                saturated.store(true, Ordering::Relaxed);
            }
            coord
        };

        let results: Vec<Option<Coordinator>> = thread::scope(|s| {
            let worker = &worker;
            let mut coord = Some(coordinator);
            let handles: Vec<_> = (0..team)
                .map(|id| {
                    let c = coord.take();
                    s.spawn(move || worker(id, c))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
                .collect()
        });
        results
            .into_iter()
            .flatten()
            .next()
            .expect("worker 0 returns the coordinator")
    };

    cms.record_items(n as u64, saturated.into_inner());
    let trace = std::mem::take(&mut coordinator.trace);
    Ok(HeteroStats {
        build: BuildStats {
            items: n as u64,
            threads: team,
            batch,
            batches,
            total: start.elapsed(),
            hash_time: coordinator.hash_time,
            update_time: coordinator.update_time,
            counter_tables: 1,
        },
        trace,
        hash_split: (coordinator.hashing.fast_size(), coordinator.hashing.slow_size()),
        update_split: (coordinator.update.fast_size(), coordinator.update.slow_size()),
        slowdown: config.slowdown,
        pairs,
    })
}
