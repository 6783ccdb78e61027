use std::ops::Range;

/// Contiguous share `index` of `total` items split over `parts` workers. The
/// first `total % parts` workers get one extra item.
pub fn balanced_range(total: usize, parts: usize, index: usize) -> Range<usize> {
    let parts = parts.max(1);
    let base = total / parts;
    let extra = total % parts;
    let start = index * base + index.min(extra);
    let len = base + usize::from(index < extra);
    start.min(total)..(start + len).min(total)
}

/// Assignment of sketch rows to the workers that update them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPartition {
    ranges: Vec<Range<usize>>,
}

impl RowPartition {
    /// Contiguous blocks of `floor(d/tau)` or `ceil(d/tau)` rows, larger blocks
    /// first. With more workers than rows the excess workers own nothing.
    pub fn contiguous(rows: usize, workers: usize) -> Self {
        let workers = workers.max(1);
        RowPartition {
            ranges: (0..workers).map(|w| balanced_range(rows, workers, w)).collect(),
        }
    }

    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn rows_of(&self, worker: usize) -> Range<usize> {
        self.ranges[worker].clone()
    }

    pub fn owner(&self, row: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.contains(&row))
    }
}
