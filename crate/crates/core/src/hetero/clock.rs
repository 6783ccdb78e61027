use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Clock used to time a worker's share of a phase.
///
/// `ThreadCpu` counts only the CPU time of the calling thread, so a worker
/// that gets descheduled (an oversubscribed machine, a noisy neighbour) does
/// not look slow to the balancer. Both clocks are monotonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkClock {
    ThreadCpu,
    Monotonic,
}

impl Default for WorkClock {
    fn default() -> Self {
        if cfg!(target_os = "linux") {
            WorkClock::ThreadCpu
        } else {
            WorkClock::Monotonic
        }
    }
}

impl WorkClock {
    /// Reading relative to an arbitrary fixed origin.
    #[inline]
    pub fn now(self) -> Duration {
        match self {
            WorkClock::ThreadCpu => thread_cpu_time().unwrap_or_else(monotonic),
            WorkClock::Monotonic => monotonic(),
        }
    }

    /// Smallest observed gap between two back-to-back readings, i.e. the
    /// cost a measurement adds to the interval it measures.
    pub fn read_overhead(self) -> Duration {
        static CPU: OnceLock<Duration> = OnceLock::new();
        static MONO: OnceLock<Duration> = OnceLock::new();
        let cell = match self {
            WorkClock::ThreadCpu => &CPU,
            WorkClock::Monotonic => &MONO,
        };
        *cell.get_or_init(|| {
            (0..256)
                .map(|_| {
                    let a = self.now();
                    self.now().saturating_sub(a)
                })
                .min()
                .unwrap_or_default()
        })
    }
}

fn monotonic() -> Duration {
    static ORIGIN: OnceLock<Instant> = OnceLock::new();
    ORIGIN.get_or_init(Instant::now).elapsed()
}

#[cfg(target_os = "linux")]
fn thread_cpu_time() -> Option<Duration> {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    (rc == 0).then(|| Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32))
}

#[cfg(not(target_os = "linux"))]
fn thread_cpu_time() -> Option<Duration> {
    None
}

/// Emulated slow core: after processing `items` items a slow worker
/// busy-waits `factor - 1` times their calibrated cost, so its per-item cost
/// is `factor` times that of a fast worker. Fixed per-section costs (clock
/// reads, synchronisation) are not scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slowdown {
    factor: f64,
}

impl Slowdown {
    pub fn new(factor: f64) -> crate::Result<Self> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(crate::Error::invalid("slowdown", format!("{factor} must be a finite factor >= 1")));
        }
        Ok(Slowdown { factor })
    }

    pub fn none() -> Self {
        Slowdown { factor: 1.0 }
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Extra time owed for `items` items costing `per_item` seconds each.
    pub fn penalty(&self, items: usize, per_item: f64) -> Duration {
        Duration::from_secs_f64((self.factor - 1.0) * items as f64 * per_item.max(0.0))
    }

    /// Busy-waits until the penalty of `items` items has passed since the
    /// reading `from`. The final clock read's overshoot counts towards it.
    #[inline]
    pub fn pad(&self, clock: WorkClock, from: Duration, items: usize, per_item: f64) {
        if self.factor <= 1.0 || items == 0 {
            return;
        }
        let until = from + self.penalty(items, per_item).saturating_sub(clock.read_overhead() / 2);
        while clock.now() < until {
            std::hint::spin_loop();
        }
    }
}

/// Per-item cost in seconds of `work`, which processes `items` items: the
/// fastest of `runs` timed repetitions.
pub fn calibrate(clock: WorkClock, items: usize, runs: usize, mut work: impl FnMut()) -> f64 {
    let best = (0..runs.max(1))
        .map(|_| {
            let t0 = clock.now();
            work();
            clock.now().saturating_sub(t0)
        })
        .min()
        .unwrap_or_default();
    best.saturating_sub(clock.read_overhead()).as_secs_f64() / items.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burn(clock: WorkClock, d: Duration) {
        let s = clock.now();
        while clock.now() - s < d {
            std::hint::spin_loop();
        }
    }

    #[test]
    fn clocks_advance() {
        for clock in [WorkClock::ThreadCpu, WorkClock::Monotonic] {
            let a = clock.now();
            burn(clock, Duration::from_micros(200));
            assert!(clock.now() >= a + Duration::from_micros(200));
        }
    }

    #[test]
    fn pad_waits_for_penalty() {
        let clock = WorkClock::default();
        let slow = Slowdown::new(3.0).unwrap();
        assert_eq!(slow.penalty(1000, 1e-6), Duration::from_millis(2));
        let start = clock.now();
        slow.pad(clock, start, 1000, 1e-6);
        assert!(clock.now() - start >= Duration::from_millis(2) - clock.read_overhead());
        let t = clock.now();
        Slowdown::none().pad(clock, t, 1000, 1.0);
        assert!(clock.now() - t < Duration::from_millis(100));
    }

    #[test]
    fn calibration_measures_per_item_cost() {
        let clock = WorkClock::default();
        let per = calibrate(clock, 100, 3, || burn(clock, Duration::from_micros(500)));
        assert!((4e-6..50e-6).contains(&per), "{per}");
    }

    #[test]
    fn rejects_speedups() {
        assert!(Slowdown::new(0.5).is_err());
        assert!(Slowdown::new(f64::NAN).is_err());
        assert_eq!(Slowdown::new(1.0).unwrap(), Slowdown::none());
    }
}
