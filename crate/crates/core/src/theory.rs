//! Monte-Carlo checks of why random ReLU layers narrow the cone.
//!
//! Three results are exercised here:
//!
//! - one random affine + ReLU layer with `N(0, 1/d_out)` weights and biases
//!   increases the cosine between two inputs with probability `1 - O(1/d_out)`,
//!   provided `cos(u, v) < (½ (r + 1/r))⁻¹` where `‖u‖ = r ‖v‖`;
//! - `1 + uᵀv ≤ E[(Wu + b)ᵀ(Wv + b)] ≤ 2 E[φ(Wu + b)ᵀ φ(Wv + b)]`;
//! - the share of an output coordinate's variance explained by the random
//!   initialization is at least `β = 1 - tr Var[h^(L-1)(U) | Θ]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{build_mlp, MlpSpec};
use crate::numcore::{cosine, dot, mean_and_variance, normal_cdf, normal_pdf, Mat, Rng};
use crate::{EmbeddingSet, Error, Result};

/// Two-sided 95 % normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Two-sided 99 % normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Largest cosine for which the monotonicity result applies at norm ratio `r`.
pub fn cos_bound(norm_ratio: f64) -> f64 {
    1.0 / (0.5 * (norm_ratio + 1.0 / norm_ratio))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Config {
    d_in: usize,
    d_out: usize,
    target_cos: f64,
    norm_ratio: f64,
    n_trials: usize,
    seed: u64,
}

impl Theorem1Config {
    pub fn new(
        d_in: usize,
        d_out: usize,
        target_cos: f64,
        norm_ratio: f64,
        n_trials: usize,
        seed: u64,
    ) -> Result<Self> {
        if d_in < 2 || d_out < 1 || n_trials < 1 {
            return Err(Error::InvalidConfig(
                "need d_in >= 2, d_out >= 1 and at least one trial".into(),
            ));
        }
        if !(norm_ratio > 0.0) || !norm_ratio.is_finite() {
            return Err(Error::InvalidConfig(format!("norm ratio must be positive, got {norm_ratio}")));
        }
        if !(target_cos.abs() < 1.0) {
            return Err(Error::InvalidCos(target_cos));
        }
        let bound = cos_bound(norm_ratio);
        if target_cos >= bound {
            return Err(Error::PreconditionViolated {
                cos: target_cos,
                bound,
            });
        }
        Ok(Self {
            d_in,
            d_out,
            target_cos,
            norm_ratio,
            n_trials,
            seed,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn target_cos(&self) -> f64 {
        self.target_cos
    }

    pub fn norm_ratio(&self) -> f64 {
        self.norm_ratio
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Success count of a Bernoulli experiment with its Wilson 95 % half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub wilson_halfwidth_95: f64,
}

impl TrialReport {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials && trials > 0);
        let (lo, hi) = wilson_interval(successes, trials, Z_95);
        Self {
            successes,
            trials,
            rate: successes as f64 / trials as f64,
            wilson_halfwidth_95: (hi - lo) / 2.0,
        }
    }

    pub fn wilson_interval(&self) -> (f64, f64) {
        wilson_interval(self.successes, self.trials, Z_95)
    }
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// True when the rates never decrease, tolerating at most one decrease whose
/// Wilson intervals overlap.
pub fn rates_non_decreasing(reports: &[TrialReport]) -> bool {
    let mut inversions = 0;
    for w in reports.windows(2) {
        if w[1].rate < w[0].rate {
            let (lo0, _) = w[0].wilson_interval();
            let (_, hi1) = w[1].wilson_interval();
            if hi1 < lo0 {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

/// Draws `(u, v)` with `‖v‖ = 1`, `‖u‖ = r`, `cos(u, v) = target_cos`, the
/// pair's orientation uniformly random.
pub fn make_pair_with_cos(
    d_in: usize,
    target_cos: f64,
    norm_ratio: f64,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(target_cos.abs() < 1.0) {
        return Err(Error::InvalidCos(target_cos));
    }
    if d_in < 2 {
        return Err(Error::DimTooSmall(d_in));
    }
    if !(norm_ratio > 0.0) || !norm_ratio.is_finite() {
        return Err(Error::InvalidConfig(format!("norm ratio must be positive, got {norm_ratio}")));
    }
    let v = rng.unit_vector(d_in);
    let w = loop {
        let mut w = rng.unit_vector(d_in);
        let p = dot(&w, &v);
        w.iter_mut().zip(&v).for_each(|(x, y)| *x -= p * y);
        let n = dot(&w, &w).sqrt();
        if n > 1e-6 {
            w.iter_mut().for_each(|x| *x /= n);
            break w;
        }
    };
    let sin = (1.0 - target_cos * target_cos).sqrt();
    let u = v
        .iter()
        .zip(&w)
        .map(|(a, b)| norm_ratio * (target_cos * a + sin * b))
        .collect();
    Ok((u, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Trial {
    pub cos_before: f64,
    /// `None` when either ReLU output is the zero vector.
    pub cos_after: Option<f64>,
    pub increased: bool,
}

/// One random layer `φ(W · + b)` with `W, b ~ N(0, 1/d_out)`, applied to both
/// inputs. Row `k` of `W` is drawn, then `b_k`.
pub fn theorem1_trial(u: &[f64], v: &[f64], d_out: usize, rng: &mut Rng) -> Result<Theorem1Trial> {
    let cos_before = cosine(u, v)?;
    let sd = (1.0 / d_out as f64).sqrt();
    let mut row = vec![0.0; u.len()];
    let (mut hu, mut hv) = (vec![0.0; d_out], vec![0.0; d_out]);
    for k in 0..d_out {
        rng.fill_normal(&mut row, sd);
        let b = sd * rng.normal();
        hu[k] = (dot(&row, u) + b).max(0.0);
        hv[k] = (dot(&row, v) + b).max(0.0);
    }
    let cos_after = cosine(&hu, &hv).ok();
    Ok(Theorem1Trial {
        cos_before,
        cos_after,
        increased: cos_after.is_some_and(|c| c > cos_before),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub config: Theorem1Config,
    pub trials: TrialReport,
    /// Mean and sd of `cos_after - cos_before` over non-degenerate trials.
    pub mean_delta: f64,
    pub sd_delta: f64,
    /// One-sample t statistic of the mean increase.
    pub t_stat: f64,
    /// Trials where a ReLU output was entirely zero (counted as failures).
    pub degenerate: u64,
}

/// Repeats [`theorem1_trial`] on a fresh random pair per trial; trial `t`
/// draws everything from child stream `t` of the config seed.
pub fn theorem1_experiment(cfg: &Theorem1Config) -> Result<Theorem1Report> {
    let root = Rng::new(cfg.seed);
    let outcomes = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = root.child(t);
            let (u, v) = make_pair_with_cos(cfg.d_in, cfg.target_cos, cfg.norm_ratio, &mut rng)?;
            theorem1_trial(&u, &v, cfg.d_out, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.increased).count() as u64;
    let deltas: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.cos_after.map(|c| c - o.cos_before))
        .collect();
    let (mean_delta, var) = mean_and_variance(&deltas);
    let sd_delta = var.sqrt();
    let t_stat = if sd_delta > 0.0 {
        mean_delta / (sd_delta / (deltas.len() as f64).sqrt())
    } else if mean_delta > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(Theorem1Report {
        config: cfg.clone(),
        trials: TrialReport::new(successes, cfg.n_trials as u64),
        mean_delta,
        sd_delta,
        t_stat,
        degenerate: (outcomes.len() - deltas.len()) as u64,
    })
}

/// Monte-Carlo estimate of the two expectations in the inner-product lemma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Check {
    /// `1 + uᵀv`, exact.
    pub lhs: f64,
    /// Estimate of `E[(Wu + b)ᵀ(Wv + b)]`; its closed form is also `uᵀv + 1`.
    pub mid_est: f64,
    pub mid_ci: f64,
    /// Estimate of `2 E[φ(Wu + b)ᵀ φ(Wv + b)]`.
    pub upper_est: f64,
    pub upper_ci: f64,
    /// Half-width for the paired difference `upper - mid`.
    pub diff_ci: f64,
    /// Both inequalities hold up to their confidence half-widths.
    pub holds: bool,
    /// `|mid_est - (uᵀv + 1)| <= mid_ci`.
    pub mid_matches_closed_form: bool,
}

/// Estimates both sides of the lemma from `n_samples` independent draws of
/// `(W, b)`; half-widths are `z · sd / √n`.
pub fn lemma1_check(
    u: &[f64],
    v: &[f64],
    d_out: usize,
    n_samples: usize,
    z: f64,
    rng: &Rng,
) -> Result<Lemma1Check> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if n_samples < 100 {
        return Err(Error::InvalidConfig(format!("need at least 100 samples, got {n_samples}")));
    }
    if d_out == 0 {
        return Err(Error::InvalidConfig("d_out must be at least 1".into()));
    }
    let sd = (1.0 / d_out as f64).sqrt();
    let samples: Vec<(f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng.child(s);
            let mut row = vec![0.0; u.len()];
            let (mut mid, mut upper) = (0.0, 0.0);
            for _ in 0..d_out {
                rng.fill_normal(&mut row, sd);
                let b = sd * rng.normal();
                let (a, c) = (dot(&row, u) + b, dot(&row, v) + b);
                mid += a * c;
                upper += a.max(0.0) * c.max(0.0);
            }
            (mid, 2.0 * upper)
        })
        .collect();
    let n = n_samples as f64;
    let mids: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let uppers: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let diffs: Vec<f64> = samples.iter().map(|s| s.1 - s.0).collect();
    let (mid_est, mid_var) = mean_and_variance(&mids);
    let (upper_est, upper_var) = mean_and_variance(&uppers);
    let (diff_mean, diff_var) = mean_and_variance(&diffs);
    let mid_ci = z * (mid_var / n).sqrt();
    let upper_ci = z * (upper_var / n).sqrt();
    let diff_ci = z * (diff_var / n).sqrt();
    let lhs = 1.0 + dot(u, v);
    Ok(Lemma1Check {
        lhs,
        mid_est,
        mid_ci,
        upper_est,
        upper_ci,
        diff_ci,
        holds: lhs <= mid_est + mid_ci && diff_mean >= -diff_ci,
        mid_matches_closed_form: (mid_est - lhs).abs() <= mid_ci,
    })
}

/// One row of [`lemma1_random_pairs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1PairCheck {
    pub cos: f64,
    pub check: Lemma1Check,
}

/// Runs [`lemma1_check`] on `n_pairs` unit pairs with cosines spread over
/// `(-0.95, 0.95)`. Pair `p` uses child stream `p` of `seed`: its sub-stream 0
/// draws the pair, sub-stream 1 drives the sampling.
pub fn lemma1_random_pairs(
    n_pairs: usize,
    d_in: usize,
    d_out: usize,
    n_samples: usize,
    z: f64,
    seed: u64,
) -> Result<Vec<Lemma1PairCheck>> {
    let root = Rng::new(seed);
    (0..n_pairs as u64)
        .map(|p| {
            let pair_rng = root.child(p);
            let mut draw = pair_rng.child(0);
            let cos = 0.95 * (2.0 * draw.uniform() - 1.0);
            let (u, v) = make_pair_with_cos(d_in, cos, 1.0, &mut draw)?;
            Ok(Lemma1PairCheck {
                cos,
                check: lemma1_check(&u, &v, d_out, n_samples, z, &pair_rng.child(1))?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectifiedMoments {
    pub mean: f64,
    pub variance: f64,
}

impl RectifiedMoments {
    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }
}

/// Mean and variance of `max(X, 0)` for `X ~ N(mu, sigma²)`.
///
/// With `Ψ`, `ψ` the standard normal cdf / pdf and `a = -mu/sigma`:
/// mean `= mu (1 - Ψ(a)) + sigma ψ(a)`, variance
/// `= mu² Ψ(a)(1 - Ψ(a)) + mu sigma ψ(a)(2Ψ(a) - 1) + sigma² (1 - Ψ(a) - ψ(a)²)`.
pub fn rectified_gaussian_moments(mu: f64, sigma: f64) -> Result<RectifiedMoments> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    let a = -mu / sigma;
    let (cdf, pdf) = (normal_cdf(a), normal_pdf(a));
    let mean = mu * (1.0 - cdf) + sigma * pdf;
    let variance = mu * mu * cdf * (1.0 - cdf)
        + mu * sigma * pdf * (2.0 * cdf - 1.0)
        + sigma * sigma * (1.0 - cdf - pdf * pdf);
    Ok(RectifiedMoments { mean, variance })
}

/// Within- / between-initialization variance split of one output coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Mean over seeds of the across-data variance, `E[Var[h | Θ]]`.
    pub within: f64,
    /// Variance over seeds of the across-data mean, `Var[E[h | Θ]]`.
    pub between: f64,
    /// `between / (within + between)`; 0 when both vanish.
    pub ratio: f64,
    /// `1 - mean_seeds tr Cov[h^(L-1)]`; `None` for a zero-layer network.
    pub beta_est: Option<f64>,
    pub n_seeds: usize,
    pub n_data: usize,
    /// Set when the budget is too small for stable estimates
    /// (fewer than 10 seeds or 30 data points).
    pub low_budget: bool,
}

/// Shares one set of sphere-uniform inputs (child stream 0) across `n_seeds`
/// networks; network `s` is seeded from child stream `s + 1`.
pub fn variance_decomposition(
    spec: &MlpSpec,
    coordinate: usize,
    n_seeds: usize,
    n_data: usize,
    rng: &Rng,
) -> Result<VarianceReport> {
    if n_seeds < 2 || n_data < 2 {
        return Err(Error::InvalidConfig("need at least 2 seeds and 2 data points".into()));
    }
    if coordinate >= spec.output_dim() {
        return Err(Error::InvalidConfig(format!(
            "coordinate {coordinate} out of range for output dim {}",
            spec.output_dim()
        )));
    }
    spec.validate()?;
    let mut data_rng = rng.child(0);
    let rows: Vec<Vec<f64>> = (0..n_data).map(|_| data_rng.unit_vector(spec.input_dim)).collect();
    let inputs = EmbeddingSet::from_rows(&rows, "sphere")?;
    let depth = spec.depth();

    let per_seed = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = rng.child(s + 1).next_u64();
            let layers = build_mlp(spec, seed)?.forward_all(&inputs)?;
            let output = &layers[depth];
            let (mean, var) = mean_and_variance(&output.column(coordinate));
            let trace = (depth > 0).then(|| covariance_trace(&layers[depth - 1]));
            Ok((mean, var, trace))
        })
        .collect::<Result<Vec<_>>>()?;

    let means: Vec<f64> = per_seed.iter().map(|p| p.0).collect();
    let within = per_seed.iter().map(|p| p.1).sum::<f64>() / n_seeds as f64;
    let (_, between) = mean_and_variance(&means);
    let total = within + between;
    let beta_est = (depth > 0)
        .then(|| 1.0 - per_seed.iter().filter_map(|p| p.2).sum::<f64>() / n_seeds as f64);
    Ok(VarianceReport {
        within,
        between,
        ratio: if total > 0.0 { between / total } else { 0.0 },
        beta_est,
        n_seeds,
        n_data,
        low_budget: n_seeds < 10 || n_data < 30,
    })
}

/// Trace of the unbiased sample covariance of the rows of `h`.
fn covariance_trace(h: &Mat) -> f64 {
    (0..h.cols())
        .map(|j| mean_and_variance(&h.column(j)).1)
        .sum()
}
