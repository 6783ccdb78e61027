use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of batches the speed estimates are averaged over.
pub const DEFAULT_WINDOW: usize = 4;
/// Updates after which the split is fixed.
pub const DEFAULT_FREEZE_AFTER: usize = 30;
/// Number of most recent splits whose median becomes the frozen split.
pub const FREEZE_SPAN: usize = 8;

/// Median of `values`, the mean of the middle two for an even count.
/// `values` must not be empty.
pub(crate) fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// How the per-batch speeds in the window are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Arithmetic mean.
    Mean,
    /// Median (mean of the middle two for an even count), which ignores a
    /// single disturbed batch.
    #[default]
    Median,
}

impl Smoothing {
    fn combine(self, values: impl Iterator<Item = f64>) -> f64 {
        match self {
            Smoothing::Mean => {
                let v: Vec<f64> = values.collect();
                v.iter().sum::<f64>() / v.len() as f64
            }
            Smoothing::Median => median(values),
        }
    }
}

/// Split of a batch of `b` items between a fast and a slow worker.
///
/// After each batch the measured times give per-item speeds
/// `s_F = fast / t_F` and `s_S = slow / t_S`. The shift `x` that equalises the
/// next batch's finishing times solves
/// `(fast + x) / s_F = (slow - x) / s_S`, i.e.
/// `x = (s_F·slow - s_S·fast) / (s_F + s_S)`.
/// Speeds are smoothed over a sliding window before solving. `x` is rounded
/// half-to-even and the fast share clamped to `[1, b-1]`. After
/// `freeze_after` updates the split is fixed at the median fast share of the
/// last [`FREEZE_SPAN`] splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Balancer {
    batch: usize,
    fast: usize,
    slow: usize,
    window: usize,
    smoothing: Smoothing,
    speeds: VecDeque<(f64, f64)>,
    history: Vec<(usize, usize)>,
    freeze_after: Option<usize>,
    frozen: bool,
}

/// Outcome of one [`Balancer::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceStep {
    /// Unrounded solution of the balance equation (0 when frozen).
    pub x: f64,
    /// Change applied to the fast share.
    pub applied: i64,
}

impl Balancer {
    /// Starts from an even split.
    pub fn new(batch: usize, window: usize, freeze_after: Option<usize>) -> Result<Self> {
        if batch < 2 {
            return Err(Error::invalid("batch", "a split batch needs at least 2 items"));
        }
        let fast = batch / 2;
        Self::with_split(batch, fast, batch - fast, window, freeze_after)
    }

    pub fn with_split(
        batch: usize,
        fast: usize,
        slow: usize,
        window: usize,
        freeze_after: Option<usize>,
    ) -> Result<Self> {
        if fast + slow != batch {
            return Err(Error::invalid("split", format!("{fast} + {slow} != {batch}")));
        }
        if fast == 0 || slow == 0 {
            return Err(Error::invalid("split", "both workers need at least one item"));
        }
        Ok(Balancer {
            batch,
            fast,
            slow,
            window: window.max(1),
            smoothing: Smoothing::default(),
            speeds: VecDeque::new(),
            history: Vec::new(),
            freeze_after,
            frozen: false,
        })
    }

    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn fast_size(&self) -> usize {
        self.fast
    }

    pub fn slow_size(&self) -> usize {
        self.slow
    }

    /// Fast-to-slow ratio of the current split.
    pub fn f2s(&self) -> f64 {
        self.fast as f64 / self.slow as f64
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Splits produced by past updates, oldest first.
    pub fn history(&self) -> &[(usize, usize)] {
        &self.history
    }

    /// Feeds the times (seconds) the fast and slow worker spent on the
    /// current split and moves to the next one.
    pub fn update(&mut self, t_fast: f64, t_slow: f64) -> Result<BalanceStep> {
        if !(t_fast > 0.0 && t_fast.is_finite()) {
            return Err(Error::invalid("t_fast", format!("{t_fast} must be positive")));
        }
        if !(t_slow > 0.0 && t_slow.is_finite()) {
            return Err(Error::invalid("t_slow", format!("{t_slow} must be positive")));
        }
        if self.frozen {
            return Ok(BalanceStep { x: 0.0, applied: 0 });
        }
        if self.speeds.len() == self.window {
            self.speeds.pop_front();
        }
        self.speeds
            .push_back((self.fast as f64 / t_fast, self.slow as f64 / t_slow));
        let s_fast = self.smoothing.combine(self.speeds.iter().map(|s| s.0));
        let s_slow = self.smoothing.combine(self.speeds.iter().map(|s| s.1));

        let x = (s_fast * self.slow as f64 - s_slow * self.fast as f64) / (s_fast + s_slow);
        let before = self.fast as i64;
        let target = (before + x.round_ties_even() as i64).clamp(1, self.batch as i64 - 1);
        self.set_fast(target as usize);
        self.history.push((self.fast, self.slow));

        if self.freeze_after.is_some_and(|k| self.history.len() >= k) {
            let recent = &self.history[self.history.len().saturating_sub(FREEZE_SPAN)..];
            let fast = median(recent.iter().map(|h| h.0 as f64));
            self.set_fast((fast.round_ties_even() as usize).clamp(1, self.batch - 1));
            self.frozen = true;
        }
        Ok(BalanceStep {
            x,
            applied: target - before,
        })
    }

    fn set_fast(&mut self, fast: usize) {
        self.fast = fast;
        self.slow = self.batch - fast;
    }
}
