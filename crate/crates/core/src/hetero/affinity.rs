use serde::{Deserialize, Serialize};

/// OS core ids for the fast and slow members of each worker pair. Pair `p`
/// uses `fast[p % fast.len()]` and `slow[p % slow.len()]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinityHint {
    pub fast: Vec<usize>,
    pub slow: Vec<usize>,
}

impl AffinityHint {
    pub(crate) fn core_for(&self, slow: bool, pair: usize) -> Option<usize> {
        let cores = if slow { &self.slow } else { &self.fast };
        (!cores.is_empty()).then(|| cores[pair % cores.len()])
    }
}

/// Pins the calling thread to `core`. Returns whether pinning took effect.
#[cfg(target_os = "linux")]
pub fn pin_current_thread(core: usize) -> bool {
    if core >= libc::CPU_SETSIZE as usize {
        return false;
    }
    // SAFETY: cpu_set_t is plain data; CPU_ZERO/CPU_SET only write inside it,
    // and sched_setaffinity reads it for the calling thread (pid 0).
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread(_core: usize) -> bool {
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cores_cycle() {
        let h = AffinityHint {
            fast: vec![4, 5],
            slow: vec![0],
        };
        assert_eq!(h.core_for(false, 3), Some(5));
        assert_eq!(h.core_for(true, 3), Some(0));
        assert_eq!(AffinityHint::default().core_for(true, 0), None);
    }

    #[test]
    fn out_of_range_core_is_ignored() {
        assert!(!pin_current_thread(1 << 20));
    }
}
