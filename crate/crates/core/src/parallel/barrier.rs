use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;

/// Reusable rendezvous for a fixed team of threads.
///
/// Waiters spin briefly and then yield. When the team is larger than the
/// number of hardware threads spinning is skipped entirely, since a spinning
/// waiter would only delay the peers it is waiting for.
pub struct SpinBarrier {
    parties: usize,
    arrived: AtomicUsize,
    generation: AtomicUsize,
    poisoned: AtomicBool,
    spin_limit: u32,
}

impl SpinBarrier {
    pub fn new(parties: usize) -> Self {
        let cores = thread::available_parallelism().map_or(1, |n| n.get());
        SpinBarrier {
            parties: parties.max(1),
            arrived: AtomicUsize::new(0),
            generation: AtomicUsize::new(0),
            poisoned: AtomicBool::new(false),
            spin_limit: if parties > cores { 0 } else { 1 << 12 },
        }
    }

    /// Blocks until all parties have arrived. Returns `true` on exactly one
    /// thread per round. Panics if a peer panicked.
    pub fn wait(&self) -> bool {
        if self.parties == 1 {
            return true;
        }
        let gen = self.generation.load(Ordering::Acquire);
        if self.arrived.fetch_add(1, Ordering::AcqRel) + 1 == self.parties {
            self.arrived.store(0, Ordering::Relaxed);
            self.generation.fetch_add(1, Ordering::Release);
            return true;
        }
        let mut spins = 0;
        while self.generation.load(Ordering::Acquire) == gen {
            if self.poisoned.load(Ordering::Relaxed) {
                panic!("a worker of this team panicked");
            }
            if spins < self.spin_limit {
                std::hint::spin_loop();
                spins += 1;
            } else {
                thread::yield_now();
            }
        }
        false
    }

    /// Guard that poisons the barrier if its thread unwinds, releasing peers
    /// stuck in [`wait`](Self::wait).
    pub fn poison_on_panic(&self) -> PoisonGuard<'_> {
        PoisonGuard(self)
    }
}

pub struct PoisonGuard<'a>(&'a SpinBarrier);

impl Drop for PoisonGuard<'_> {
    fn drop(&mut self) {
        if thread::panicking() {
            self.0.poisoned.store(true, Ordering::Relaxed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;

    #[test]
    fn rounds_are_separated() {
        let team = 4;
        let barrier = SpinBarrier::new(team);
        let counter = AtomicU64::new(0);
        let leaders = AtomicU64::new(0);
        thread::scope(|s| {
            for _ in 0..team {
                s.spawn(|| {
                    for round in 0..200u64 {
                        counter.fetch_add(1, Ordering::SeqCst);
                        if barrier.wait() {
                            leaders.fetch_add(1, Ordering::SeqCst);
                        }
                        assert!(counter.load(Ordering::SeqCst) >= (round + 1) * team as u64);
                        barrier.wait();
                    }
                });
            }
        });
        assert_eq!(leaders.load(Ordering::SeqCst), 200);
    }

    #[test]
    fn single_party_never_blocks() {
        let b = SpinBarrier::new(1);
        assert!(b.wait());
        assert!(b.wait());
    }

    #[test]
    fn panicking_peer_releases_waiters() {
        let barrier = SpinBarrier::new(2);
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            thread::scope(|s| {
                s.spawn(|| {
                    let _g = barrier.poison_on_panic();
                    panic!("boom");
                });
                let _g = barrier.poison_on_panic();
                barrier.wait();
            })
        }));
        assert!(result.is_err());
    }
}
