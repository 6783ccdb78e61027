//! The Count-Min Sketch: a `d x w` grid of counters, one tabulation hash per row.
//!
//! Inserting `x` increments one counter per row; a query returns the minimum of
//! the `d` counters `x` maps to. Estimates never fall below the true frequency.

mod counter;
mod params;
mod storage;

pub use counter::Counter;
pub use params::{DepthMode, SketchParams, WidthMode};
pub use storage::{RowStorage, ROW_ALIGN_BYTES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{derive_seeds, MergedTabulationTable};

#[derive(Clone, PartialEq, Eq)]
pub struct CountMinSketch<C: Counter = u32> {
    params: SketchParams,
    hasher: MergedTabulationTable,
    counters: RowStorage<C>,
    items: u64,
    saturated: bool,
}

impl PartialEq for SketchParams {
    fn eq(&self, other: &Self) -> bool {
        self.depth == other.depth
            && self.width == other.width
            && self.epsilon.to_bits() == other.epsilon.to_bits()
            && self.delta.to_bits() == other.delta.to_bits()
            && self.width_mode == other.width_mode
            && self.depth_mode == other.depth_mode
    }
}

impl Eq for SketchParams {}

impl<C: Counter> CountMinSketch<C> {
    /// Zeroed sketch whose `d` row seeds are derived from `master_seed`.
    pub fn new(params: SketchParams, master_seed: u64) -> Result<Self> {
        params.validate()?;
        Self::with_seeds(params, &derive_seeds(master_seed, params.depth))
    }

    pub fn with_seeds(params: SketchParams, seeds: &[u64]) -> Result<Self> {
        Self::with_hasher(params, MergedTabulationTable::new(seeds)?)
    }

    /// Zeroed sketch over an arbitrary merged table (one function per row).
    pub fn with_hasher(params: SketchParams, hasher: MergedTabulationTable) -> Result<Self> {
        params.validate()?;
        if hasher.depth() != params.depth {
            return Err(Error::invalid(
                "seeds",
                format!("{} hash functions for {} rows", hasher.depth(), params.depth),
            ));
        }
        Ok(CountMinSketch {
            counters: RowStorage::new(params.depth, params.width)?,
            params,
            hasher,
            items: 0,
            saturated: false,
        })
    }

    /// Rebuilds a sketch from stored state. `counters` is row-major, `d·w` cells.
    pub fn from_parts(
        params: SketchParams,
        seeds: &[u64],
        items_processed: u64,
        saturated: bool,
        counters: &[C],
    ) -> Result<Self> {
        let mut s = Self::with_seeds(params, seeds)?;
        if counters.len() != params.depth * params.width {
            return Err(Error::invalid(
                "counters",
                format!("expected {} cells, got {}", params.depth * params.width, counters.len()),
            ));
        }
        for (r, chunk) in counters.chunks_exact(params.width).enumerate() {
            s.counters.row_mut(r).copy_from_slice(chunk);
        }
        s.items = items_processed;
        s.saturated = saturated;
        Ok(s)
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.params.depth
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn seeds(&self) -> &[u64] {
        self.hasher.seeds()
    }

    pub fn hasher(&self) -> &MergedTabulationTable {
        &self.hasher
    }

    pub fn items_processed(&self) -> u64 {
        self.items
    }

    /// Whether any counter ever hit its maximum.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn row(&self, r: usize) -> &[C] {
        self.counters.row(r)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C]> + '_ {
        self.counters.iter_rows()
    }

    pub fn counter(&self, row: usize, col: usize) -> C {
        self.counters.row(row)[col]
    }

    #[inline]
    pub fn insert(&mut self, x: u32) {
        let width = self.params.width as u32;
        let counters = &mut self.counters;
        let mut ok = true;
        self.hasher.for_each_column(x, width, |r, c| {
            ok &= counters.row_mut(r)[c as usize].saturating_inc();
        });
        self.saturated |= !ok;
        self.items = self.items.saturating_add(1);
    }

    /// Inserts every item of `items` in order.
    pub fn extend_from_slice(&mut self, items: &[u32]) {
        for &x in items {
            self.insert(x);
        }
    }

    /// Minimum over the `d` counters addressed by `x`.
    pub fn query(&self, x: u32) -> C {
        let width = self.params.width as u32;
        let mut est = C::MAX;
        self.hasher.for_each_column(x, width, |r, c| {
            est = est.min(self.counters.row(r)[c as usize]);
        });
        est
    }

    /// Fails unless `other` has the same dimensions and hash seeds.
    pub fn check_compatible<D: Counter>(&self, other: &CountMinSketch<D>) -> Result<()> {
        if self.depth() != other.depth() || self.width() != other.width() {
            return Err(Error::DimensionMismatch {
                left_rows: self.depth(),
                left_cols: self.width(),
                right_rows: other.depth(),
                right_cols: other.width(),
            });
        }
        if self.seeds() != other.seeds() {
            return Err(Error::SeedMismatch);
        }
        Ok(())
    }

    /// Adds `other`'s counters into `self`.
    pub fn merge_from(&mut self, other: &CountMinSketch<C>) -> Result<()> {
        self.check_compatible(other)?;
        let mut clamped = false;
        for (r, dst) in self.counters.rows_mut().into_iter().enumerate() {
            for (a, &b) in dst.iter_mut().zip(other.counters.row(r)) {
                let (sum, hit) = a.saturating_sum(b);
                *a = sum;
                clamped |= hit;
            }
        }
        self.items = self.items.saturating_add(other.items);
        self.saturated |= clamped || other.saturated;
        Ok(())
    }

    /// Elementwise sum of two compatible sketches.
    pub fn merge(&self, other: &CountMinSketch<C>) -> Result<Self> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// Copies counters into a sketch with a different counter width.
    /// Fails if some counter does not fit.
    pub fn convert<D: Counter>(&self) -> Result<CountMinSketch<D>> {
        let mut out = CountMinSketch::<D>::with_hasher(self.params, self.hasher.clone())?;
        for (r, dst) in out.counters.rows_mut().into_iter().enumerate() {
            for (d, &s) in dst.iter_mut().zip(self.counters.row(r)) {
                *d = D::from_u64(s.to_u64()).ok_or_else(|| {
                    Error::invalid("counter width", format!("value {s:?} needs more than {} bits", D::BITS))
                })?;
            }
        }
        out.items = self.items;
        out.saturated = self.saturated;
        Ok(out)
    }

    /// Zeroes every counter and the item count.
    pub fn clear(&mut self) {
        self.counters.fill(C::ZERO);
        self.items = 0;
        self.saturated = false;
    }

    pub(crate) fn parts_mut(&mut self) -> (&MergedTabulationTable, &mut RowStorage<C>) {
        (&self.hasher, &mut self.counters)
    }

    pub(crate) fn record_items(&mut self, n: u64, saturated: bool) {
        self.items = self.items.saturating_add(n);
        self.saturated |= saturated;
    }
}

impl<C: Counter> std::fmt::Debug for CountMinSketch<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CountMinSketch")
            .field("depth", &self.depth())
            .field("width", &self.width())
            .field("counter_bits", &C::BITS)
            .field("items", &self.items)
            .field("saturated", &self.saturated)
            .finish()
    }
}

/// Storage strategy whose footprint [`memory_footprint`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryLayout {
    /// One private sketch per worker.
    MultiTable,
    /// One shared sketch plus a `b x d` buffer of column ids.
    SingleTableBuffered,
}

/// `ceil(log2(x))`, with `ceil_log2(1) == 0`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        u64::BITS - (x - 1).leading_zeros()
    }
}

/// Memory in bits for counters able to hold `items` plus, for the buffered
/// layout, the column-id buffer.
///
/// * multi-table: `d · w · tau · ceil(log2 N)`
/// * single-table buffered: `d · (w · ceil(log2 N) + b · ceil(log2 w))`
pub fn memory_footprint(
    depth: u64,
    width: u64,
    threads: u64,
    batch: u64,
    items: u64,
    layout: MemoryLayout,
) -> u64 {
    let counter_bits = ceil_log2(items) as u64;
    match layout {
        MemoryLayout::MultiTable => depth * width * threads * counter_bits,
        MemoryLayout::SingleTableBuffered => {
            depth * (width * counter_bits + batch * ceil_log2(width) as u64)
        }
    }
}
