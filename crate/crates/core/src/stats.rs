//! Order-independent streaming sums.
//!
//! Values are rounded onto a fixed grid of spacing `2^-64` and added as
//! 128-bit integers, so any partition of the samples merges to the same bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedSum(i128);

impl FixedSum {
    pub fn add(&mut self, x: f64) -> Result<()> {
        let q = (x * SCALE).round();
        if !q.is_finite() || q.abs() >= 1.6e38 {
            return Err(Error::InvalidArgument(format!("value {x:e} outside the accumulator range")));
        }
        self.0 = self
            .0
            .checked_add(q as i128)
            .ok_or_else(|| Error::InvalidArgument("accumulator overflow".into()))?;
        Ok(())
    }

    pub fn merge(&mut self, other: FixedSum) -> Result<()> {
        self.0 = self.0.checked_add(other.0).ok_or_else(|| Error::InvalidArgument("accumulator overflow".into()))?;
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / SCALE
    }
}

/// Running count, sum and sum of squares for a vector of observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    count: u64,
    sum: Vec<FixedSum>,
    sum_sq: Vec<FixedSum>,
}

impl MomentAccumulator {
    pub fn new(width: usize) -> Self {
        MomentAccumulator { count: 0, sum: vec![FixedSum::default(); width], sum_sq: vec![FixedSum::default(); width] }
    }

    pub fn width(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.sum.len() {
            return Err(Error::InvalidArgument(format!(
                "sample has {} values, accumulator expects {}",
                values.len(),
                self.sum.len()
            )));
        }
        for ((s, q), &x) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(values) {
            s.add(x)?;
            q.add(x * x)?;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if other.width() != self.width() {
            return Err(Error::InvalidArgument("merging accumulators of different widths".into()));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            a.merge(*b)?;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            a.merge(*b)?;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i].value() / self.count as f64
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let m = self.count as f64;
        let mean = self.mean(i);
        ((self.sum_sq[i].value() / m - mean * mean) * m / (m - 1.0)).max(0.0)
    }

    /// Standard error of the mean, `sqrt(var / M)`.
    pub fn stderr(&self, i: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance(i) / self.count as f64).sqrt()
    }
}
