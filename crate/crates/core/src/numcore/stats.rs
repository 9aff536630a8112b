//! Pairwise cosine statistics over a set of vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::{cosine_from_parts, dot, norm};
use super::{Mat, Rng};
use crate::{Error, Result};

/// Exact enumeration stops here; larger sets are subsampled.
pub const DEFAULT_PAIR_BUDGET: u64 = 50_000_000;

/// Mean / min / max cosine over unordered pairs of distinct rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeStats {
    pub mean_cos: f64,
    pub min_cos: f64,
    pub max_cos: f64,
    /// Number of pairs the statistics were computed over.
    pub pair_count: u64,
    /// True when `pair_count` pairs were drawn uniformly instead of enumerated.
    pub sampled: bool,
}

/// Exact-vs-sampled policy for [`pairwise_cosine_stats_with`].
#[derive(Clone, Copy, Debug)]
pub struct PairSampling {
    pub budget: u64,
    pub seed: u64,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self {
            budget: DEFAULT_PAIR_BUDGET,
            seed: 0,
        }
    }
}

pub fn pairwise_cosine_stats(rows: &Mat) -> Result<ConeStats> {
    pairwise_cosine_stats_with(rows, PairSampling::default())
}

/// Cosine statistics over all `n(n-1)/2` pairs when that count fits in the
/// budget, otherwise over `budget` uniformly drawn distinct pairs.
pub fn pairwise_cosine_stats_with(rows: &Mat, sampling: PairSampling) -> Result<ConeStats> {
    let n = rows.rows();
    if n < 2 {
        return Err(Error::TooFewVectors { needed: 2, found: n });
    }
    let norms: Vec<f64> = rows.row_iter().map(norm).collect();
    if norms.iter().any(|&x| !(x > 1e-300)) {
        return Err(Error::ZeroVector);
    }
    let total_pairs = (n as u64) * (n as u64 - 1) / 2;
    let cos = |i: usize, j: usize| cosine_from_parts(dot(rows.row(i), rows.row(j)), norms[i], norms[j]);

    if total_pairs <= sampling.budget {
        // per-row partials in parallel, folded in row order
        let partials: Vec<(f64, f64, f64)> = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut acc = (0.0, f64::INFINITY, f64::NEG_INFINITY);
                for j in i + 1..n {
                    let c = cos(i, j);
                    acc.0 += c;
                    acc.1 = acc.1.min(c);
                    acc.2 = acc.2.max(c);
                }
                acc
            })
            .collect();
        Ok(fold(partials.into_iter(), total_pairs, false))
    } else {
        let mut rng = Rng::new(sampling.seed);
        let pairs: Vec<(usize, usize)> = (0..sampling.budget)
            .map(|_| {
                let i = rng.below(n as u64) as usize;
                let mut j = rng.below(n as u64 - 1) as usize;
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect();
        let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| cos(i, j)).collect();
        Ok(fold(values.into_iter().map(|c| (c, c, c)), sampling.budget, true))
    }
}

fn fold(parts: impl Iterator<Item = (f64, f64, f64)>, count: u64, sampled: bool) -> ConeStats {
    let (sum, min, max) = parts.fold((0.0, f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0 + p.0, a.1.min(p.1), a.2.max(p.2))
    });
    ConeStats {
        mean_cos: sum / count as f64,
        min_cos: min,
        max_cos: max,
        pair_count: count,
        sampled,
    }
}

/// Mean and unbiased (n - 1) variance by two passes. Variance is 0 for n < 2.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1) as f64)
}
