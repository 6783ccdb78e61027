use std::fmt::Debug;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

mod private {
    pub trait Sealed {}
    impl Sealed for u32 {}
    impl Sealed for u64 {}
}

/// Unsigned counter cell of a sketch: 32 or 64 bits wide.
///
/// Increments saturate at `MAX` instead of wrapping so an overflowing sketch
/// keeps overestimating rather than wrapping to small values.
pub trait Counter:
    Copy + Default + Ord + Eq + Send + Sync + Debug + 'static + private::Sealed
{
    const BITS: u32;
    const MAX: Self;
    const ZERO: Self;

    /// Atomic twin with the same in-memory representation.
    type Atomic: Send + Sync;

    fn to_u64(self) -> u64;
    fn from_u64(v: u64) -> Option<Self>;

    /// Adds one; returns `false` (leaving the value at `MAX`) on saturation.
    fn saturating_inc(&mut self) -> bool;

    /// Sum clamped at `MAX`, with a flag telling whether clamping happened.
    fn saturating_sum(self, other: Self) -> (Self, bool);

    /// Reinterprets exclusive counters as shared atomics for the duration of the borrow.
    fn as_atomic(cells: &mut [Self]) -> &[Self::Atomic];

    /// Indivisible increment without a saturation check.
    fn atomic_inc(cell: &Self::Atomic);

    /// Indivisible saturating increment; returns `false` on saturation.
    fn atomic_inc_saturating(cell: &Self::Atomic) -> bool;

    /// Separate load and store: concurrent callers may lose increments but
    /// never produce a value above the number of completed calls.
    fn racy_inc(cell: &Self::Atomic) -> bool;
}

macro_rules! impl_counter {
    ($t:ty, $atomic:ty) => {
        impl Counter for $t {
            const BITS: u32 = <$t>::BITS;
            const MAX: Self = <$t>::MAX;
            const ZERO: Self = 0;
            type Atomic = $atomic;

            #[inline]
            fn to_u64(self) -> u64 {
                self as u64
            }

            #[inline]
            fn from_u64(v: u64) -> Option<Self> {
                <$t>::try_from(v).ok()
            }

            #[inline(always)]
            fn saturating_inc(&mut self) -> bool {
                match self.checked_add(1) {
                    Some(v) => {
                        *self = v;
                        true
                    }
                    None => false,
                }
            }

            #[inline]
            fn saturating_sum(self, other: Self) -> (Self, bool) {
                match self.checked_add(other) {
                    Some(v) => (v, false),
                    None => (<$t>::MAX, true),
                }
            }

            fn as_atomic(cells: &mut [Self]) -> &[$atomic] {
                // SAFETY: the atomic type has the same size and alignment as the
                // integer, and the exclusive borrow guarantees no non-atomic
                // access overlaps the returned shared view.
                unsafe { &*(cells as *mut [$t] as *const [$atomic]) }
            }

            #[inline(always)]
            fn atomic_inc(cell: &$atomic) {
                cell.fetch_add(1, Ordering::Relaxed);
            }

            #[inline]
            fn atomic_inc_saturating(cell: &$atomic) -> bool {
                cell.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |v| v.checked_add(1))
                    .is_ok()
            }

            #[inline(always)]
            fn racy_inc(cell: &$atomic) -> bool {
                let v = cell.load(Ordering::Relaxed);
                match v.checked_add(1) {
                    Some(n) => {
                        cell.store(n, Ordering::Relaxed);
                        true
                    }
                    None => false,
                }
            }
        }
    };
}

impl_counter!(u32, AtomicU32);
impl_counter!(u64, AtomicU64);
