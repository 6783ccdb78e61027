use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::Duration;

use super::balancer::median;
use super::clock::{calibrate, WorkClock};
use crate::hashing::MergedTabulationTable;
use crate::parallel::HashBuffer;
use crate::sketch::Counter;

const CALIBRATION_ITEMS: usize = 4096;
const COST_HISTORY: usize = 3;

/// Per-item cost of hashing an item into all rows, and of one row update,
/// measured on the same buffer and counter types the build uses.
pub(crate) fn calibrate_costs<C: Counter>(
    hasher: &MergedTabulationTable,
    width: u32,
    items: &[u32],
    clock: WorkClock,
) -> (f64, f64) {
    let sample = &items[..items.len().min(CALIBRATION_ITEMS)];
    let buffer = HashBuffer::new(sample.len().max(1), hasher.depth());
    let hash = calibrate(clock, sample.len(), 5, || {
        for (j, &x) in sample.iter().enumerate() {
            hasher.for_each_column(x, width, |r, c| buffer.set(j, r, c));
        }
    });
    let mut row = vec![C::ZERO; width as usize];
    let update = calibrate(clock, sample.len(), 5, || {
        let mut ok = true;
        for j in 0..sample.len() {
            ok &= row[buffer.get(j, 0) as usize].saturating_inc();
        }
        std::hint::black_box((&mut row, ok));
    });
    (hash, update)
}

/// What each worker of the team reported for one phase of a batch.
pub(crate) struct PhaseTimes {
    /// Measured time, including any emulation padding (ns).
    total: Vec<AtomicU64>,
    /// Time spent on the items themselves (ns).
    raw: Vec<AtomicU64>,
    items: Vec<AtomicUsize>,
}

impl PhaseTimes {
    pub(crate) fn new(team: usize) -> Self {
        PhaseTimes {
            total: (0..team).map(|_| AtomicU64::new(0)).collect(),
            raw: (0..team).map(|_| AtomicU64::new(0)).collect(),
            items: (0..team).map(|_| AtomicUsize::new(0)).collect(),
        }
    }

    pub(crate) fn record(&self, worker: usize, total: Duration, raw: Duration, items: usize) {
        self.total[worker].store(total.as_nanos() as u64, Ordering::Relaxed);
        self.raw[worker].store(raw.as_nanos() as u64, Ordering::Relaxed);
        self.items[worker].store(items, Ordering::Relaxed);
    }

    /// Median measured time of workers `lo..hi`, in seconds. One worker
    /// hit by an interrupt does not move it.
    pub(crate) fn median_secs(&self, lo: usize, hi: usize) -> f64 {
        median(self.total[lo..hi].iter().map(|c| c.load(Ordering::Relaxed) as f64 * 1e-9)).max(1e-9)
    }

    fn median_raw(&self, lo: usize, hi: usize) -> f64 {
        median(self.raw[lo..hi].iter().map(|c| c.load(Ordering::Relaxed) as f64 * 1e-9))
    }

    fn mean_items(&self, lo: usize, hi: usize) -> f64 {
        self.items[lo..hi].iter().map(|c| c.load(Ordering::Relaxed) as f64).sum::<f64>() / (hi - lo) as f64
    }
}

/// Per-item cost in seconds the slow workers pad by, published by the
/// coordinator.
pub(crate) struct SharedCost(AtomicU64);

impl SharedCost {
    pub(crate) fn new(cost: f64) -> Self {
        SharedCost(AtomicU64::new(cost.to_bits()))
    }

    pub(crate) fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    pub(crate) fn set(&self, cost: f64) {
        self.0.store(cost.to_bits(), Ordering::Relaxed);
    }
}

/// Running per-item cost estimate.
///
/// Fast and slow workers pay the same fixed cost per phase on top of their
/// items, so the slope `(t_fast - t_slow) / (n_fast - n_slow)` of their raw
/// times isolates the per-item cost. The estimate is the median of the last
/// few batches.
#[derive(Debug, Default)]
pub(crate) struct CostEstimate {
    recent: VecDeque<f64>,
}

impl CostEstimate {
    /// Folds in the times of a batch, the first `pairs` workers being fast,
    /// and returns the updated estimate in seconds per item.
    pub(crate) fn observe(&mut self, times: &PhaseTimes, pairs: usize, overhead: Duration) -> Option<f64> {
        let team = times.items.len();
        let (nf, ns) = (times.mean_items(0, pairs), times.mean_items(pairs, team));
        let (tf, ts) = (times.median_raw(0, pairs), times.median_raw(pairs, team));
        let estimate = if nf - ns >= (nf / 4.0).max(8.0) {
            (tf - ts) / (nf - ns)
        } else {
            (tf - overhead.as_secs_f64()) / nf
        };
        if estimate > 0.0 && estimate.is_finite() {
            if self.recent.len() == COST_HISTORY {
                self.recent.pop_front();
            }
            self.recent.push_back(estimate);
        }
        let mut sorted: Vec<f64> = self.recent.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        sorted.get(sorted.len() / 2).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_near(got: Option<f64>, want: f64) {
        let got = got.expect("an estimate");
        assert!((got - want).abs() < want * 1e-9, "{got} vs {want}");
    }

    fn times(rows: &[(u64, u64, usize)]) -> PhaseTimes {
        let t = PhaseTimes::new(rows.len());
        for (i, &(total, raw, n)) in rows.iter().enumerate() {
            t.record(i, Duration::from_nanos(total), Duration::from_nanos(raw), n);
        }
        t
    }

    #[test]
    fn slope_cancels_fixed_cost() {
        // 20 ns per item plus 500 ns fixed on every worker.
        let t = times(&[(16_900, 16_900, 820), (16_900, 4_600, 205)]);
        let mut c = CostEstimate::default();
        assert_near(c.observe(&t, 1, Duration::ZERO), 20e-9);
        assert_eq!(t.median_secs(1, 2), 16.9e-6);
    }

    #[test]
    fn even_split_falls_back_to_fast_rate() {
        let t = times(&[(10_300, 10_300, 512), (40_000, 10_300, 512)]);
        let mut c = CostEstimate::default();
        assert_near(c.observe(&t, 1, Duration::from_nanos(60)), 20e-9);
    }

    #[test]
    fn outliers_are_filtered() {
        let normal = times(&[(16_900, 16_900, 820), (16_900, 4_600, 205)]);
        let spike = times(&[(160_000, 160_000, 820), (16_900, 4_600, 205)]);
        let mut c = CostEstimate::default();
        for _ in 0..3 {
            c.observe(&normal, 1, Duration::ZERO);
        }
        assert_near(c.observe(&spike, 1, Duration::ZERO), 20e-9);
    }

    #[test]
    fn shared_cost_round_trips() {
        let c = SharedCost::new(3e-9);
        assert_eq!(c.get(), 3e-9);
        c.set(1.5e-9);
        assert_eq!(c.get(), 1.5e-9);
    }
}
