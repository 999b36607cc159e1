//! Sufficient statistics and the closed-form log-likelihood of a node's
//! embeddings under its own maximum-likelihood diagonal Gaussian.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-dimension variance floor.
pub const DEFAULT_VAR_FLOOR: f64 = 1e-6;

const CONSISTENCY_TOL: f64 = 1e-9;

/// One word token's prosody embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodySample {
    pub token_id: String,
    pub word: String,
    pub embedding: Vec<f64>,
}

/// Count, per-dimension sum and per-dimension sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub n: usize,
    pub sum: Vec<f64>,
    pub sumsq: Vec<f64>,
}

impl SufficientStats {
    pub fn zeros(dim: usize) -> Self {
        SufficientStats {
            n: 0,
            sum: vec![0.0; dim],
            sumsq: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        self.n += 1;
        for ((s, q), &v) in self.sum.iter_mut().zip(self.sumsq.iter_mut()).zip(x) {
            *s += v;
            *q += v * v;
        }
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// ML variances, floored per dimension.
    pub fn variances(&self, floor: f64) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sumsq)
            .map(|(s, q)| {
                let m = s / n;
                (q / n - m * m).max(floor)
            })
            .collect()
    }
}

impl AddAssign<&SufficientStats> for SufficientStats {
    fn add_assign(&mut self, rhs: &SufficientStats) {
        assert_eq!(
            self.dim(),
            rhs.dim(),
            "adding statistics of different dimension"
        );
        self.n += rhs.n;
        for (a, b) in self.sum.iter_mut().zip(&rhs.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&rhs.sumsq) {
            *a += b;
        }
    }
}

impl Add for &SufficientStats {
    type Output = SufficientStats;

    fn add(self, rhs: &SufficientStats) -> SufficientStats {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

/// Accumulates statistics over `samples` in one pass.
///
/// An empty slice yields `n = 0` with zero vectors of dimension `dim`.
pub fn accumulate<'a, I>(dim: usize, samples: I) -> Result<SufficientStats>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut stats = SufficientStats::zeros(dim);
    for x in samples {
        stats.push(x)?;
    }
    Ok(stats)
}

/// Convenience wrapper over [`accumulate`] for [`ProsodySample`] slices.
pub fn accumulate_samples(dim: usize, samples: &[ProsodySample]) -> Result<SufficientStats> {
    accumulate(dim, samples.iter().map(|s| s.embedding.as_slice()))
}

/// `-(n/2) * sum_j [ln(2 pi var_j) + 1]` with `var_j` the floored ML variance.
pub fn node_log_likelihood(stats: &SufficientStats, floor: f64) -> Result<f64> {
    if stats.n == 0 {
        return Err(Error::EmptyNode);
    }
    let n = stats.n as f64;
    let per_dim: f64 = stats
        .variances(floor)
        .iter()
        .map(|v| (2.0 * PI * v).ln() + 1.0)
        .sum();
    Ok(-0.5 * n * per_dim)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Log-likelihood increase from splitting `parent` into `left` and `right`.
pub fn split_gain(
    parent: &SufficientStats,
    left: &SufficientStats,
    right: &SufficientStats,
    floor: f64,
) -> Result<f64> {
    if left.n + right.n != parent.n {
        return Err(Error::InconsistentStats(format!(
            "child counts {} + {} != parent count {}",
            left.n, right.n, parent.n
        )));
    }
    if left.dim() != parent.dim() || right.dim() != parent.dim() {
        return Err(Error::InconsistentStats(
            "dimension differs between parent and children".into(),
        ));
    }
    let sums_agree = (0..parent.dim()).all(|j| {
        close(parent.sum[j], left.sum[j] + right.sum[j])
            && close(parent.sumsq[j], left.sumsq[j] + right.sumsq[j])
    });
    if !sums_agree {
        return Err(Error::InconsistentStats(
            "parent sums differ from left + right".into(),
        ));
    }
    Ok(
        node_log_likelihood(left, floor)? + node_log_likelihood(right, floor)?
            - node_log_likelihood(parent, floor)?,
    )
}
