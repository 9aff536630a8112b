//! Gap vector, CLIP's symmetric contrastive loss and the embedding-shift
//! loss landscape.
//!
//! For unit-norm images `X` and texts `Y` (`N × d`) and temperature `τ`, the
//! logits are `S = X Yᵀ / τ` and
//!
//! ```text
//! L = ½ (1/N Σ_i [lse_j S_ij - S_ii] + 1/N Σ_j [lse_i S_ij - S_jj])
//! ```
//!
//! Gradients treat the unit-norm rows as free variables; callers that keep
//! embeddings on the sphere renormalize after each step.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numcore::{norm, normalize, Mat};
use crate::{EmbeddingSet, Error, Result};

/// `N` matched (image, text) pairs, both sides unit norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedBatch {
    images: EmbeddingSet,
    texts: EmbeddingSet,
}

impl PairedBatch {
    pub fn new(images: EmbeddingSet, texts: EmbeddingSet) -> Result<Self> {
        if images.is_empty() || texts.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if images.len() != texts.len() {
            return Err(Error::DimensionMismatch {
                expected: images.len(),
                found: texts.len(),
            });
        }
        if images.dim() != texts.dim() {
            return Err(Error::DimensionMismatch {
                expected: images.dim(),
                found: texts.dim(),
            });
        }
        for set in [&images, &texts] {
            if !set.is_unit_norm() {
                let worst = set
                    .vectors()
                    .row_iter()
                    .map(norm)
                    .max_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
                    .unwrap_or(0.0);
                return Err(Error::NotUnitNorm { norm: worst });
            }
        }
        Ok(Self { images, texts })
    }

    /// Wraps raw matrices, checking that every row is unit norm.
    pub fn from_mats(images: Mat, texts: Mat) -> Result<Self> {
        Self::new(EmbeddingSet::unit(images, "image")?, EmbeddingSet::unit(texts, "text")?)
    }

    pub fn images(&self) -> &EmbeddingSet {
        &self.images
    }

    pub fn texts(&self) -> &EmbeddingSet {
        &self.texts
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.images.dim()
    }

    pub fn into_parts(self) -> (EmbeddingSet, EmbeddingSet) {
        (self.images, self.texts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Image centroid minus text centroid.
    pub delta: Vec<f64>,
    pub distance: f64,
}

pub fn gap_vector(batch: &PairedBatch) -> Result<GapReport> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let delta: Vec<f64> = batch
        .images
        .centroid()
        .iter()
        .zip(batch.texts.centroid())
        .map(|(a, b)| a - b)
        .collect();
    let distance = norm(&delta);
    Ok(GapReport { delta, distance })
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}

fn check_pair_shapes(x: &Mat, y: &Mat) -> Result<()> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.rows() * x.cols(),
            found: y.rows() * y.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// Logit matrix `X Yᵀ / τ`.
fn logits(x: &Mat, y: &Mat, tau: f64) -> Result<Mat> {
    Ok(x.matmul(&y.transpose())?.map(|s| s / tau))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn clip_loss(batch: &PairedBatch, tau: f64) -> Result<f64> {
    clip_loss_mats(batch.images.vectors(), batch.texts.vectors(), tau)
}

/// [`clip_loss`] on raw matrices; rows need not be unit norm.
pub fn clip_loss_mats(x: &Mat, y: &Mat, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_pair_shapes(x, y)?;
    let s = logits(x, y, tau)?;
    let n = s.rows();
    let mut image_to_text = 0.0;
    let mut text_to_image = 0.0;
    for i in 0..n {
        image_to_text += log_sum_exp(s.row(i).iter().copied()) - s[(i, i)];
        text_to_image += log_sum_exp((0..n).map(|k| s[(k, i)])) - s[(i, i)];
    }
    Ok(0.5 * (image_to_text + text_to_image) / n as f64)
}

pub fn clip_loss_grad(batch: &PairedBatch, tau: f64) -> Result<(Mat, Mat)> {
    clip_loss_grad_mats(batch.images.vectors(), batch.texts.vectors(), tau)
}

/// Gradients of [`clip_loss_mats`] with respect to `x` and `y`.
///
/// With `P` the row softmax and `Q` the column softmax of the logits,
/// `∂L/∂S = (P + Q - 2I) / 2N`, so `∂L/∂X = G Y / τ` and `∂L/∂Y = Gᵀ X / τ`.
pub fn clip_loss_grad_mats(x: &Mat, y: &Mat, tau: f64) -> Result<(Mat, Mat)> {
    check_tau(tau)?;
    check_pair_shapes(x, y)?;
    let s = logits(x, y, tau)?;
    let n = s.rows();
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        let row = s.row(i);
        let lse = log_sum_exp(row.iter().copied());
        for (j, &v) in row.iter().enumerate() {
            g[(i, j)] += (v - lse).exp();
        }
    }
    for j in 0..n {
        let lse = log_sum_exp((0..n).map(|k| s[(k, j)]));
        for i in 0..n {
            g[(i, j)] += (s[(i, j)] - lse).exp();
        }
    }
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        g[(i, i)] -= 2.0;
    }
    let g = g.map(|v| v * scale / tau);
    Ok((g.matmul(y)?, g.t_matmul(x)?))
}

/// Moves images by `-λ·delta` and texts by `+λ·delta`, then renormalizes.
pub fn shift_embeddings(batch: &PairedBatch, lambda: f64, delta: &[f64]) -> Result<PairedBatch> {
    if delta.len() != batch.dim() {
        return Err(Error::DimensionMismatch {
            expected: batch.dim(),
            found: delta.len(),
        });
    }
    // a zero move is an exact no-op; renormalizing could perturb the last bit
    if lambda == 0.0 || delta.iter().all(|&d| d == 0.0) {
        return Ok(batch.clone());
    }
    let shift = |set: &EmbeddingSet, sign: f64| -> Result<EmbeddingSet> {
        let rows = set
            .vectors()
            .row_iter()
            .map(|r| {
                let moved: Vec<f64> = r.iter().zip(delta).map(|(a, d)| a + sign * lambda * d).collect();
                normalize(&moved)
            })
            .collect::<Result<Vec<_>>>()?;
        EmbeddingSet::unit(Mat::from_rows(&rows)?, set.modality())
    };
    PairedBatch::new(shift(&batch.images, -1.0)?, shift(&batch.texts, 1.0)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    /// Value of the swept parameter (λ for shift sweeps, θ for the sphere sim).
    pub control: f64,
    pub remaining_gap: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCurve {
    /// Name of the swept parameter, used as the first CSV column.
    pub control: String,
    pub points: Vec<LandscapePoint>,
    pub global_min_index: usize,
    pub local_min_indices: Vec<usize>,
}

impl LandscapeCurve {
    /// Annotates minima; `points` must be nonempty with strictly increasing
    /// controls.
    pub fn new(control: impl Into<String>, points: Vec<LandscapePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("landscape needs at least one point".into()));
        }
        if points.windows(2).any(|w| !(w[1].control > w[0].control)) {
            return Err(Error::InvalidConfig("sweep grid must be strictly increasing".into()));
        }
        let losses: Vec<f64> = points.iter().map(|p| p.loss).collect();
        let global_min_index = losses
            .iter()
            .enumerate()
            .fold(0, |best, (i, &l)| if l < losses[best] { i } else { best });
        Ok(Self {
            control: control.into(),
            local_min_indices: local_minima(&losses),
            global_min_index,
            points,
        })
    }

    pub fn global_min(&self) -> &LandscapePoint {
        &self.points[self.global_min_index]
    }

    /// Index of the smallest remaining gap (first on ties).
    pub fn min_gap_index(&self) -> usize {
        let gaps: Vec<f64> = self.points.iter().map(|p| p.remaining_gap).collect();
        gaps.iter()
            .enumerate()
            .fold(0, |best, (i, &g)| if g < gaps[best] { i } else { best })
    }

    /// CSV with columns `<control>, remaining_gap, loss, is_global_min, is_local_min`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{},remaining_gap,loss,is_global_min,is_local_min", self.control)?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{},{}",
                p.control,
                p.remaining_gap,
                p.loss,
                i == self.global_min_index,
                self.local_min_indices.contains(&i)
            )?;
        }
        Ok(())
    }
}

/// Interior strict local minima. A run of equal values counts once, at its
/// first index, when both values bordering the run are larger.
fn local_minima(losses: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut start = 1;
    while start + 1 < losses.len() {
        let mut end = start;
        while end + 1 < losses.len() && losses[end + 1] == losses[start] {
            end += 1;
        }
        if end + 1 < losses.len() && losses[start - 1] > losses[start] && losses[end + 1] > losses[start] {
            out.push(start);
        }
        start = end + 1;
    }
    out
}

/// 101 evenly spaced λ values over `[-1, 1.5]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=100).map(|i| -1.0 + 2.5 * i as f64 / 100.0).collect()
}

pub fn landscape_sweep(batch: &PairedBatch, tau: f64, lambda_grid: &[f64]) -> Result<LandscapeCurve> {
    landscape_sweep_batched(std::slice::from_ref(batch), tau, lambda_grid)
}

/// Shift sweep over several batches of the same dataset. The gap vector and
/// the remaining gap are taken over all pairs together; the loss at each λ is
/// the mean of the per-batch losses.
pub fn landscape_sweep_batched(
    batches: &[PairedBatch],
    tau: f64,
    lambda_grid: &[f64],
) -> Result<LandscapeCurve> {
    check_tau(tau)?;
    if batches.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let delta = pooled_gap(batches)?.delta;
    let points = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let shifted = batches
                .iter()
                .map(|b| shift_embeddings(b, lambda, &delta))
                .collect::<Result<Vec<_>>>()?;
            let loss = shifted
                .iter()
                .map(|b| clip_loss(b, tau))
                .sum::<Result<f64>>()?
                / shifted.len() as f64;
            Ok(LandscapePoint {
                control: lambda,
                remaining_gap: pooled_gap(&shifted)?.distance,
                loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LandscapeCurve::new("lambda", points)
}

fn pooled_gap(batches: &[PairedBatch]) -> Result<GapReport> {
    if batches.len() == 1 {
        return gap_vector(&batches[0]);
    }
    let d = batches[0].dim();
    let mut delta = vec![0.0; d];
    let mut n = 0usize;
    for b in batches {
        if b.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: b.dim(),
            });
        }
        for i in 0..b.len() {
            for ((s, x), y) in delta.iter_mut().zip(b.images.row(i)).zip(b.texts.row(i)) {
                *s += x - y;
            }
        }
        n += b.len();
    }
    delta.iter_mut().for_each(|v| *v /= n as f64);
    let distance = norm(&delta);
    Ok(GapReport { delta, distance })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperaturePoint {
    pub tau: f64,
    pub argmin_lambda: f64,
    pub gap_at_argmin: f64,
}

/// Loss-minimizing shift and the gap left there, for each temperature.
pub fn temperature_gap_profile(
    batch: &PairedBatch,
    taus: &[f64],
    lambda_grid: &[f64],
) -> Result<Vec<TemperaturePoint>> {
    if taus.is_empty() {
        return Err(Error::InvalidConfig("need at least one temperature".into()));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("temperatures must be ascending".into()));
    }
    taus.iter()
        .map(|&tau| {
            let curve = landscape_sweep(batch, tau, lambda_grid)?;
            let p = curve.global_min();
            Ok(TemperaturePoint {
                tau,
                argmin_lambda: p.control,
                gap_at_argmin: p.remaining_gap,
            })
        })
        .collect()
}
