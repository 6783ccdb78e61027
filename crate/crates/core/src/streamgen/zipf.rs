use crate::error::{Error, Result};

/// Normalised cumulative distribution of a Zipf law over ranks `1..=n`,
/// sampled by inverse transform with binary search.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    alpha: f64,
    cdf: Vec<f64>,
}

impl ZipfTable {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "universe must contain at least one item"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("{alpha} must be positive")));
        }
        let mut cdf = Vec::new();
        cdf.try_reserve_exact(n).map_err(|_| Error::Capacity {
            cells: n,
            bytes_per_cell: 8,
        })?;
        // Compensated summation keeps the tail accurate for large n.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 1..=n {
            let y = (k as f64).powf(-alpha) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            cdf.push(sum);
        }
        for c in cdf.iter_mut() {
            *c /= sum;
        }
        Ok(ZipfTable { alpha, cdf })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability of rank `rank` (1-based).
    pub fn probability(&self, rank: usize) -> f64 {
        let i = rank - 1;
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    /// Maps `u` in `[0, 1)` to a 0-based rank index.
    #[inline]
    pub fn sample_index(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}
