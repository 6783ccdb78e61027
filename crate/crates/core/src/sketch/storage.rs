//! Row-major counter storage whose rows start on cache-line boundaries, so
//! workers owning different rows never write to the same line.

use crate::error::{Error, Result};

/// Every row begins at a multiple of this many bytes.
pub const ROW_ALIGN_BYTES: usize = 64;

pub struct RowStorage<C> {
    data: Vec<C>,
    offset: usize,
    stride: usize,
    rows: usize,
    width: usize,
}

impl<C: Copy + Default> RowStorage<C> {
    pub fn new(rows: usize, width: usize) -> Result<Self> {
        let elem = std::mem::size_of::<C>();
        let per_line = (ROW_ALIGN_BYTES / elem).max(1);
        let stride = width.div_ceil(per_line) * per_line;
        let cells = rows
            .checked_mul(stride)
            .and_then(|c| c.checked_add(per_line))
            .ok_or(Error::Capacity {
                cells: usize::MAX,
                bytes_per_cell: elem,
            })?;
        let mut data = Vec::new();
        data.try_reserve_exact(cells).map_err(|_| Error::Capacity {
            cells,
            bytes_per_cell: elem,
        })?;
        data.resize(cells, C::default());
        let offset = data.as_ptr().align_offset(ROW_ALIGN_BYTES).min(per_line - 1);
        Ok(RowStorage {
            data,
            offset,
            stride,
            rows,
            width,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Distance in cells between the starts of consecutive rows.
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C] {
        let start = self.offset + r * self.stride;
        &self.data[start..start + self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [C] {
        let start = self.offset + r * self.stride;
        &mut self.data[start..start + self.width]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[C]> + '_ {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Splits the storage into independent mutable rows.
    pub fn rows_mut(&mut self) -> Vec<&mut [C]> {
        let (stride, width, rows) = (self.stride, self.width, self.rows);
        self.data[self.offset..]
            .chunks_mut(stride)
            .take(rows)
            .map(|chunk| &mut chunk[..width])
            .collect()
    }

    /// All rows including padding; row `r` starts at `r * stride()`.
    pub fn padded_mut(&mut self) -> &mut [C] {
        let end = self.offset + self.rows * self.stride;
        &mut self.data[self.offset..end]
    }

    pub fn fill(&mut self, value: C) {
        self.data.fill(value);
    }
}

impl<C: Copy + Default> Clone for RowStorage<C> {
    fn clone(&self) -> Self {
        let mut copy = RowStorage::new(self.rows, self.width).expect("clone of an allocated storage");
        for r in 0..self.rows {
            copy.row_mut(r).copy_from_slice(self.row(r));
        }
        copy
    }
}

impl<C: Copy + Default + PartialEq> PartialEq for RowStorage<C> {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.width == other.width
            && self.iter_rows().zip(other.iter_rows()).all(|(a, b)| a == b)
    }
}

impl<C: Copy + Default + Eq> Eq for RowStorage<C> {}

impl<C> std::fmt::Debug for RowStorage<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RowStorage")
            .field("rows", &self.rows)
            .field("width", &self.width)
            .field("stride", &self.stride)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_line_aligned() {
        for width in [1, 15, 16, 17, 2003] {
            let s = RowStorage::<u32>::new(8, width).unwrap();
            for r in 0..8 {
                let addr = s.row(r).as_ptr() as usize;
                assert_eq!(addr % ROW_ALIGN_BYTES, 0, "width {width} row {r}");
                assert_eq!(s.row(r).len(), width);
            }
            let s64 = RowStorage::<u64>::new(3, width).unwrap();
            assert_eq!(s64.row(2).as_ptr() as usize % ROW_ALIGN_BYTES, 0);
        }
    }

    #[test]
    fn clone_and_eq_ignore_padding() {
        let mut a = RowStorage::<u32>::new(3, 5).unwrap();
        a.row_mut(1)[4] = 9;
        let b = a.clone();
        assert_eq!(a, b);
        assert_eq!(b.row(1)[4], 9);
        assert_eq!(b.row(1).as_ptr() as usize % ROW_ALIGN_BYTES, 0);
    }

    #[test]
    fn split_rows_are_disjoint() {
        let mut s = RowStorage::<u32>::new(4, 10).unwrap();
        for (r, row) in s.rows_mut().into_iter().enumerate() {
            row.fill(r as u32 + 1);
        }
        for r in 0..4 {
            assert!(s.row(r).iter().all(|&c| c == r as u32 + 1));
        }
    }
}
