use std::sync::atomic::{AtomicU32, Ordering};

/// Column ids of one batch: `d` entries per item, the `d` ids of item `j`
/// stored contiguously at `j*d .. (j+1)*d`.
///
/// Cells are atomics accessed with relaxed ordering. Workers write disjoint
/// item slices during hashing and everyone reads after a rendezvous, which
/// supplies the ordering.
pub struct HashBuffer {
    batch: usize,
    depth: usize,
    cells: Box<[AtomicU32]>,
}

impl HashBuffer {
    pub fn new(batch: usize, depth: usize) -> Self {
        HashBuffer {
            batch,
            depth,
            cells: (0..batch * depth).map(|_| AtomicU32::new(0)).collect(),
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of cells, `b·d`.
    pub fn capacity(&self) -> usize {
        self.cells.len()
    }

    #[inline(always)]
    pub fn set(&self, item: usize, row: usize, column: u32) {
        self.cells[item * self.depth + row].store(column, Ordering::Relaxed);
    }

    #[inline(always)]
    pub fn get(&self, item: usize, row: usize) -> u32 {
        self.cells[item * self.depth + row].load(Ordering::Relaxed)
    }

    /// The `d` column ids of `item`.
    pub fn item(&self, item: usize) -> Vec<u32> {
        (0..self.depth).map(|r| self.get(item, r)).collect()
    }
}

impl std::fmt::Debug for HashBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashBuffer")
            .field("batch", &self.batch)
            .field("depth", &self.depth)
            .finish()
    }
}
