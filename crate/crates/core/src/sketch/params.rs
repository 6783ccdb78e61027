use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the column count is derived from the error factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMode {
    /// `w = ceil(e / epsilon)`.
    CeilEOverEps,
    /// `w` = smallest prime strictly greater than `2 / epsilon`.
    PrimeAfterTwoOverEps,
    /// Fixed column count.
    Explicit(usize),
}

/// How the row count is derived from the error probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// `d = ceil(ln(1 / delta))`.
    CeilLnInvDelta,
    /// Fixed row count.
    Explicit(usize),
}

/// Dimensions of a sketch together with the parameters they came from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SketchParams {
    pub epsilon: f64,
    pub delta: f64,
    pub depth: usize,
    pub width: usize,
    pub width_mode: WidthMode,
    pub depth_mode: DepthMode,
}

impl SketchParams {
    /// Derives `d` and `w` from `(epsilon, delta)` under the selected modes.
    pub fn from_error(
        epsilon: f64,
        delta: f64,
        width_mode: WidthMode,
        depth_mode: DepthMode,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("{epsilon} is outside (0, 1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("{delta} is outside (0, 1)")));
        }
        let width = match width_mode {
            WidthMode::CeilEOverEps => ceil_tolerant(std::f64::consts::E / epsilon),
            WidthMode::PrimeAfterTwoOverEps => prime_after(2.0 / epsilon),
            WidthMode::Explicit(w) => w as u64,
        };
        let depth = match depth_mode {
            DepthMode::CeilLnInvDelta => ceil_tolerant((1.0 / delta).ln()).max(1),
            DepthMode::Explicit(d) => d as u64,
        };
        let params = SketchParams {
            epsilon,
            delta,
            depth: to_usize(depth, "depth")?,
            width: to_usize(width, "width")?,
            width_mode,
            depth_mode,
        };
        params.validate()?;
        Ok(params)
    }

    /// Fixed dimensions. `epsilon` and `delta` are set to the values the
    /// standard formulas would map onto these dimensions (`e / w`, `exp(-d)`).
    pub fn with_dims(depth: usize, width: usize) -> Result<Self> {
        let params = SketchParams {
            epsilon: std::f64::consts::E / width.max(1) as f64,
            delta: (-(depth as f64)).exp(),
            depth,
            width,
            width_mode: WidthMode::Explicit(width),
            depth_mode: DepthMode::Explicit(depth),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::invalid("depth", "at least one row is required"));
        }
        if self.width == 0 {
            return Err(Error::invalid("width", "at least one column is required"));
        }
        if self.width > u32::MAX as usize {
            return Err(Error::invalid("width", "column ids must fit in 32 bits"));
        }
        Ok(())
    }
}

fn to_usize(v: u64, name: &'static str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::invalid(name, format!("{v} does not fit in memory")))
}

/// Ceiling that ignores floating-point noise just above an integer.
fn ceil_tolerant(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Smallest prime strictly greater than `x`.
fn prime_after(x: f64) -> u64 {
    let r = x.round();
    let floor = if (x - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { x.floor() };
    let mut candidate = floor as u64 + 1;
    while !is_prime(candidate) {
        candidate += 1;
    }
    candidate
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut f = 3;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}
