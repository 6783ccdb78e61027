use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which member of a worker pair a task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Fast,
    Slow,
}

/// Two-stage update plan for one batch on the two rows of a fast/slow pair.
///
/// Stage 1: the fast worker updates `fast_row` for items `[0, fast)`, the slow
/// worker updates `slow_row` for items `[0, slow)`. Stage 2: they swap rows
/// and each resumes where its mate stopped, the fast worker covering
/// `[slow, b)` of `slow_row` and the slow worker `[fast, b)` of `fast_row`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSchedule {
    pub pair: usize,
    pub fast_row: usize,
    pub slow_row: usize,
    pub batch: usize,
    pub fast_size: usize,
    pub slow_size: usize,
}

/// Schedule for the pair owning rows `row` and `row + 1`.
pub fn pair_schedule(batch: usize, fast_size: usize, slow_size: usize, row: usize) -> Result<PairSchedule> {
    PairSchedule::new(row / 2, row, row + 1, batch, fast_size, slow_size)
}

impl PairSchedule {
    pub fn new(
        pair: usize,
        fast_row: usize,
        slow_row: usize,
        batch: usize,
        fast_size: usize,
        slow_size: usize,
    ) -> Result<Self> {
        if fast_size + slow_size != batch {
            return Err(Error::invalid(
                "split",
                format!("{fast_size} + {slow_size} does not add up to batch size {batch}"),
            ));
        }
        if fast_row == slow_row {
            return Err(Error::RowAssignment(format!("pair {pair} uses row {fast_row} twice")));
        }
        Ok(PairSchedule {
            pair,
            fast_row,
            slow_row,
            batch,
            fast_size,
            slow_size,
        })
    }

    /// `(role, row, items)` tasks of stage 1 or 2.
    pub fn stage(&self, stage: u8) -> [(Role, usize, Range<usize>); 2] {
        match stage {
            1 => [
                (Role::Fast, self.fast_row, 0..self.fast_size),
                (Role::Slow, self.slow_row, 0..self.slow_size),
            ],
            2 => [
                (Role::Fast, self.slow_row, self.slow_size..self.batch),
                (Role::Slow, self.fast_row, self.fast_size..self.batch),
            ],
            _ => panic!("stage must be 1 or 2"),
        }
    }
}

/// Rows handled by one worker pair: two rows updated in alternation, or a
/// single row whose items are split between the fast worker (stage 1) and
/// the slow worker (stage 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowPair {
    pub first: usize,
    pub second: Option<usize>,
}

impl RowPair {
    pub fn pair(first: usize, second: usize) -> Self {
        RowPair {
            first,
            second: Some(second),
        }
    }

    pub fn single(row: usize) -> Self {
        RowPair { first: row, second: None }
    }

    /// Tasks of `stage` for a batch of `len` items split `fast`/`len - fast`.
    pub(crate) fn tasks(&self, stage: u8, len: usize, fast: usize) -> [Option<(Role, usize, Range<usize>)>; 2] {
        let slow = len - fast;
        match (self.second, stage) {
            (Some(second), _) => PairSchedule {
                pair: 0,
                fast_row: self.first,
                slow_row: second,
                batch: len,
                fast_size: fast,
                slow_size: slow,
            }
            .stage(stage)
            .map(Some),
            (None, 1) => [Some((Role::Fast, self.first, 0..fast)), None],
            (None, _) => [Some((Role::Slow, self.first, fast..len)), None],
        }
    }
}
