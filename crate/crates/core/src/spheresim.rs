//! Controlled gap experiments: six pairs on the 3-sphere, projected-gradient
//! training of free embedding tables, and Procrustes gap amendment.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cone::{build_mlp, Activation, MlpSpec};
use crate::gaploss::{clip_loss, clip_loss_grad_mats, gap_vector, LandscapeCurve, LandscapePoint, PairedBatch};
use crate::numcore::{mean_and_variance, normalize, svd, Mat, Rng};
use crate::{EmbeddingSet, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_pairs: usize,
    /// Azimuth spacing between neighbouring pairs, radians.
    pub delta_phi: f64,
    pub mismatched: bool,
    /// Polar angle of the texts, radians; images sit on the equator.
    pub theta: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_pairs: 6,
            delta_phi: 15f64.to_radians(),
            mismatched: false,
            theta: FRAC_PI_2,
        }
    }
}

impl SimConfig {
    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 pairs, got {}", self.n_pairs)));
        }
        if !(self.delta_phi > 0.0) || !self.delta_phi.is_finite() {
            return Err(Error::InvalidConfig(format!("delta_phi must be positive, got {}", self.delta_phi)));
        }
        if !(self.theta > 0.0 && self.theta <= FRAC_PI_2) {
            return Err(Error::AngleOutOfRange(self.theta));
        }
        Ok(())
    }
}

fn sphere_point(theta: f64, phi: f64) -> Vec<f64> {
    vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Image `i` at azimuth `i·Δφ` on the equator, text `i` at the same azimuth
/// and polar angle `θ`. A mismatched config swaps the azimuths of texts 0 and 1.
pub fn build_sphere_sim(cfg: &SimConfig) -> Result<PairedBatch> {
    cfg.validate()?;
    let azimuth = |i: usize| i as f64 * cfg.delta_phi;
    let images: Vec<Vec<f64>> = (0..cfg.n_pairs).map(|i| sphere_point(FRAC_PI_2, azimuth(i))).collect();
    let texts: Vec<Vec<f64>> = (0..cfg.n_pairs)
        .map(|i| {
            let slot = match (cfg.mismatched, i) {
                (true, 0) => 1,
                (true, 1) => 0,
                _ => i,
            };
            sphere_point(cfg.theta, azimuth(slot))
        })
        .collect();
    PairedBatch::from_mats(Mat::from_rows(&images)?, Mat::from_rows(&texts)?)
}

/// 90 polar angles, 1° to 90°, in radians.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=90).map(|deg| (deg as f64).to_radians()).collect()
}

/// Loss of the simulation as the texts move in polar angle; `cfg.theta` is
/// ignored.
pub fn sim_landscape(cfg: &SimConfig, tau: f64, theta_grid: &[f64]) -> Result<LandscapeCurve> {
    let points = theta_grid
        .par_iter()
        .map(|&theta| {
            let batch = build_sphere_sim(&cfg.with_theta(theta))?;
            Ok(LandscapePoint {
                control: theta,
                remaining_gap: gap_vector(&batch)?.distance,
                loss: clip_loss(&batch, tau)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LandscapeCurve::new("theta", points)
}

/// Polar angle of the texts in the mismatched batch used for shift sweeps.
pub const MISMATCHED_BATCH_THETA_DEG: f64 = 60.0;

/// The default six-pair mismatched simulation with texts at 60°: a small
/// batch with a nonzero gap and two crossed pairs.
pub fn mismatched_batch() -> Result<PairedBatch> {
    build_sphere_sim(&SimConfig {
        mismatched: true,
        theta: MISMATCHED_BATCH_THETA_DEG.to_radians(),
        ..SimConfig::default()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalMap {
    pub w: Mat,
}

impl OrthogonalMap {
    /// `y · W`.
    pub fn apply(&self, y: &Mat) -> Result<Mat> {
        y.matmul(&self.w)
    }

    /// `‖WᵀW - I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let wtw = self.w.t_matmul(&self.w).expect("square map");
        wtw.sub(&Mat::identity(self.w.cols())).expect("square map").frobenius_norm()
    }

    pub fn determinant(&self) -> Result<f64> {
        self.w.determinant()
    }
}

/// Orthogonal `W` minimizing `‖X - Y W‖_F`: `W = U Vᵀ` where `Yᵀ X = U Σ Vᵀ`.
/// Reflections are allowed.
pub fn procrustes_align(x: &Mat, y: &Mat) -> Result<OrthogonalMap> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.rows() * x.cols(),
            found: y.rows() * y.cols(),
        });
    }
    if x.rows() < x.cols() {
        log::warn!(
            "procrustes with fewer points ({}) than dimensions ({}); the map is not unique",
            x.rows(),
            x.cols()
        );
    }
    let f = svd(&y.t_matmul(x)?)?;
    Ok(OrthogonalMap {
        w: f.u.matmul(&f.v.transpose())?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// Shared Gaussian data pushed through two independently seeded ReLU MLPs.
    RandomCones { depth: usize },
    /// As `RandomCones`, then the texts are rotated onto the images.
    Amended { depth: usize },
    /// Independent uniform unit vectors for each side.
    Direct,
}

impl InitKind {
    pub fn depth(&self) -> Option<usize> {
        match *self {
            InitKind::RandomCones { depth } | InitKind::Amended { depth } => Some(depth),
            InitKind::Direct => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_pairs: usize,
    pub dim: usize,
    pub tau: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub init: InitKind,
    pub seed: u64,
    /// Random minibatch per step; `None` uses every pair.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_pairs: 64,
            dim: 128,
            tau: 0.01,
            steps: 500,
            learning_rate: 0.5,
            init: InitKind::RandomCones { depth: 4 },
            seed: 42,
            batch_size: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 1 || self.dim < 2 {
            return Err(Error::InvalidConfig("need n_pairs >= 1 and dim >= 2".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidTemperature(self.tau));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if let Some(b) = self.batch_size {
            if b < 1 || b > self.n_pairs {
                return Err(Error::InvalidConfig(format!("batch size {b} outside 1..={}", self.n_pairs)));
            }
        }
        Ok(())
    }
}

/// Starting tables for [`train_embeddings`]. Stream layout under the config
/// seed: child 0 shared data, child 1 images, child 2 texts, child 3 batches.
pub fn initial_embeddings(cfg: &TrainConfig) -> Result<PairedBatch> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let (images, texts) = match cfg.init {
        InitKind::Direct => {
            let draw = |mut rng: Rng| {
                let rows: Vec<Vec<f64>> = (0..cfg.n_pairs).map(|_| rng.unit_vector(cfg.dim)).collect();
                Mat::from_rows(&rows)
            };
            (draw(root.child(1))?, draw(root.child(2))?)
        }
        InitKind::RandomCones { depth } | InitKind::Amended { depth } => {
            let mut data_rng = root.child(0);
            let mut data = vec![0.0; cfg.n_pairs * cfg.dim];
            data_rng.fill_normal(&mut data, 1.0);
            let data = EmbeddingSet::new(Mat::new(cfg.n_pairs, cfg.dim, data)?, "data")?;
            let spec = MlpSpec::uniform(cfg.dim, depth, Activation::Relu);
            let tower = |stream| -> Result<Mat> {
                let mlp = build_mlp(&spec, root.child(stream).next_u64())?;
                Ok(mlp.forward(&data, None)?.normalized()?.into_vectors())
            };
            let x = tower(1)?;
            let mut y = tower(2)?;
            if matches!(cfg.init, InitKind::Amended { .. }) {
                y = procrustes_align(&x, &y)?.apply(&y)?.normalize_rows()?;
            }
            (x, y)
        }
    };
    PairedBatch::from_mats(images, texts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainStep {
    pub step: usize,
    pub loss: f64,
    pub gap_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// `steps + 1` records, the first before any update.
    pub steps: Vec<TrainStep>,
    pub final_batch: PairedBatch,
}

impl TrainTrace {
    pub fn initial_gap(&self) -> f64 {
        self.steps[0].gap_distance
    }

    pub fn final_gap(&self) -> f64 {
        self.steps[self.steps.len() - 1].gap_distance
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "step,loss,gap_distance")?;
        for s in &self.steps {
            writeln!(w, "{},{:.16e},{:.16e}", s.step, s.loss, s.gap_distance)?;
        }
        Ok(())
    }
}

/// Projected gradient descent on the embedding tables: step along the
/// analytic loss gradient, then put every row back on the sphere. Loss and
/// gap are always measured on the full set.
pub fn train_embeddings(cfg: &TrainConfig) -> Result<TrainTrace> {
    let init = initial_embeddings(cfg)?;
    let (images, texts) = init.into_parts();
    let (mut x, mut y) = (images.into_vectors(), texts.into_vectors());
    let batch_rng = Rng::new(cfg.seed).child(3);
    let mut steps = Vec::with_capacity(cfg.steps + 1);
    let record = |step: usize, x: &Mat, y: &Mat| -> Result<(TrainStep, PairedBatch)> {
        let batch = PairedBatch::from_mats(x.clone(), y.clone())?;
        let loss = clip_loss(&batch, cfg.tau)?;
        if !loss.is_finite() {
            return Err(Error::DivergenceDetected { step });
        }
        let gap_distance = gap_vector(&batch)?.distance;
        Ok((TrainStep { step, loss, gap_distance }, batch))
    };
    let (first, mut batch) = record(0, &x, &y)?;
    steps.push(first);
    for step in 1..=cfg.steps {
        // a frozen run must stay bit-identical, so skip even the renormalization
        if cfg.learning_rate > 0.0 {
            let rows = match cfg.batch_size {
                Some(b) if b < cfg.n_pairs => sample_without_replacement(cfg.n_pairs, b, &mut batch_rng.child(step as u64)),
                _ => (0..cfg.n_pairs).collect(),
            };
            let (bx, by) = (select_rows(&x, &rows), select_rows(&y, &rows));
            let (gx, gy) = clip_loss_grad_mats(&bx, &by, cfg.tau)?;
            for (k, &r) in rows.iter().enumerate() {
                descend(x.row_mut(r), gx.row(k), cfg.learning_rate, step)?;
                descend(y.row_mut(r), gy.row(k), cfg.learning_rate, step)?;
            }
        }
        let (s, b) = record(step, &x, &y)?;
        steps.push(s);
        batch = b;
    }
    Ok(TrainTrace {
        steps,
        final_batch: batch,
    })
}

fn descend(row: &mut [f64], grad: &[f64], lr: f64, step: usize) -> Result<()> {
    row.iter_mut().zip(grad).for_each(|(v, g)| *v -= lr * g);
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::DivergenceDetected { step });
    }
    let unit = normalize(row)?;
    row.copy_from_slice(&unit);
    Ok(())
}

fn select_rows(m: &Mat, rows: &[usize]) -> Mat {
    let picked: Vec<&[f64]> = rows.iter().map(|&r| m.row(r)).collect();
    Mat::from_rows(&picked).expect("rows share a width")
}

/// `k` distinct indices below `n`, in draw order (partial Fisher-Yates).
fn sample_without_replacement(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Sample mean with a two-sided 95 % Student-t half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width_95: f64,
}

impl MeanCi {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::InvalidConfig("need at least two samples for an interval".into()));
        }
        let (mean, var) = mean_and_variance(xs);
        let t = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .inverse_cdf(0.975);
        Ok(Self {
            mean,
            half_width_95: t * (var / xs.len() as f64).sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapChange {
    pub before: MeanCi,
    pub after: MeanCi,
    pub before_samples: Vec<f64>,
    pub after_samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitVsOptReport {
    pub random_init: GapChange,
    pub amended_init: GapChange,
}

/// Trains from random-cone and from Procrustes-amended starts over
/// `n_repeats` seeds (child streams of `cfg.seed`); the depth comes from
/// `cfg.init`.
pub fn init_vs_opt_experiment(cfg: &TrainConfig, n_repeats: usize) -> Result<InitVsOptReport> {
    if n_repeats < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 repeats, got {n_repeats}")));
    }
    let depth = cfg
        .init
        .depth()
        .ok_or_else(|| Error::InvalidConfig("init-vs-opt needs a cone initialization depth".into()))?;
    let root = Rng::new(cfg.seed);
    let runs = (0..n_repeats as u64)
        .into_par_iter()
        .flat_map_iter(|r| {
            let seed = root.child(r).next_u64();
            [InitKind::RandomCones { depth }, InitKind::Amended { depth }]
                .into_iter()
                .map(move |init| (seed, init))
        })
        .map(|(seed, init)| {
            let trace = train_embeddings(&TrainConfig {
                init,
                seed,
                ..cfg.clone()
            })?;
            Ok((trace.initial_gap(), trace.final_gap()))
        })
        .collect::<Result<Vec<_>>>()?;
    let summarize = |offset: usize| -> Result<GapChange> {
        let before: Vec<f64> = runs.iter().skip(offset).step_by(2).map(|r| r.0).collect();
        let after: Vec<f64> = runs.iter().skip(offset).step_by(2).map(|r| r.1).collect();
        Ok(GapChange {
            before: MeanCi::from_samples(&before)?,
            after: MeanCi::from_samples(&after)?,
            before_samples: before,
            after_samples: after,
        })
    };
    Ok(InitVsOptReport {
        random_init: summarize(0)?,
        amended_init: summarize(1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::cosine;

    #[test]
    fn matched_at_equator_has_no_gap() {
        let b = build_sphere_sim(&SimConfig::default()).unwrap();
        assert_eq!(b.images(), &b.texts().clone().with_modality("image"));
        assert_eq!(gap_vector(&b).unwrap().distance, 0.0);
    }

    #[test]
    fn adjacent_images_are_fifteen_degrees_apart() {
        let b = build_sphere_sim(&SimConfig::default()).unwrap();
        let c = cosine(b.images().row(0), b.images().row(1)).unwrap();
        assert!((c - 0.965_925_826_289_068_3).abs() < 1e-12);
    }

    #[test]
    fn mismatch_swaps_only_first_two_texts() {
        let theta = 0.7;
        let m = build_sphere_sim(&SimConfig { mismatched: true, theta, ..SimConfig::default() }).unwrap();
        let p = build_sphere_sim(&SimConfig { theta, ..SimConfig::default() }).unwrap();
        assert_eq!(m.images(), p.images());
        assert_eq!(m.texts().row(0), p.texts().row(1));
        assert_eq!(m.texts().row(1), p.texts().row(0));
        for i in 2..6 {
            assert_eq!(m.texts().row(i), p.texts().row(i));
        }
        // at the equator text 0 lands on image 1
        let eq = build_sphere_sim(&SimConfig { mismatched: true, ..SimConfig::default() }).unwrap();
        assert_eq!(eq.texts().row(0), eq.images().row(1));
    }

    #[test]
    fn invalid_sim_configs() {
        assert!(build_sphere_sim(&SimConfig { n_pairs: 1, ..SimConfig::default() }).is_err());
        assert!(build_sphere_sim(&SimConfig::default().with_theta(0.0)).is_err());
        assert!(build_sphere_sim(&SimConfig::default().with_theta(2.0)).is_err());
    }

    #[test]
    fn landscape_matches_direct_loss() {
        let cfg = SimConfig { mismatched: true, ..SimConfig::default() };
        let grid = default_theta_grid();
        assert_eq!(grid.len(), 90);
        let curve = sim_landscape(&cfg, 0.1, &grid).unwrap();
        for (p, &t) in curve.points.iter().zip(&grid) {
            let direct = clip_loss(&build_sphere_sim(&cfg.with_theta(t)).unwrap(), 0.1).unwrap();
            assert_eq!(p.loss, direct);
        }
    }

    fn random_rotation(d: usize, rng: &mut Rng) -> Mat {
        // Gram-Schmidt on a Gaussian matrix
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            for u in &q {
                let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            q.push(normalize(&v).unwrap());
        }
        Mat::from_rows(&q).unwrap()
    }

    #[test]
    fn procrustes_identity_and_recovery() {
        let mut rng = Rng::new(5);
        let x = crate::numcore::gaussian_matrix(100, 8, 1.0, &mut rng).unwrap();
        let w = procrustes_align(&x, &x).unwrap();
        assert!(w.w.sub(&Mat::identity(8)).unwrap().frobenius_norm() < 1e-8);

        let r = random_rotation(8, &mut rng);
        let y = x.matmul(&r.transpose()).unwrap();
        let map = procrustes_align(&x, &y).unwrap();
        let resid = x.sub(&map.apply(&y).unwrap()).unwrap().frobenius_norm();
        assert!(resid < 1e-6, "{resid}");
        assert!(map.orthogonality_error() < 1e-8);
        assert!((map.determinant().unwrap().abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn procrustes_beats_identity_and_random_orthogonal() {
        let mut rng = Rng::new(6);
        for _ in 0..10 {
            let x = crate::numcore::gaussian_matrix(20, 5, 1.0, &mut rng).unwrap();
            let y = crate::numcore::gaussian_matrix(20, 5, 1.0, &mut rng).unwrap();
            let map = procrustes_align(&x, &y).unwrap();
            let best = x.sub(&map.apply(&y).unwrap()).unwrap().frobenius_norm();
            assert!(best <= x.sub(&y).unwrap().frobenius_norm() + 1e-12);
            let q = random_rotation(5, &mut rng);
            assert!(best <= x.sub(&y.matmul(&q).unwrap()).unwrap().frobenius_norm() + 1e-12);
        }
    }

    #[test]
    fn procrustes_shape_mismatch() {
        assert!(procrustes_align(&Mat::zeros(3, 2), &Mat::zeros(3, 3)).is_err());
    }

    fn small_cfg(init: InitKind) -> TrainConfig {
        TrainConfig {
            n_pairs: 12,
            dim: 16,
            tau: 0.1,
            steps: 20,
            init,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_unit_norm() {
        for init in [InitKind::RandomCones { depth: 2 }, InitKind::Amended { depth: 2 }, InitKind::Direct] {
            let cfg = small_cfg(init);
            let a = train_embeddings(&cfg).unwrap();
            assert_eq!(a, train_embeddings(&cfg).unwrap());
            assert_eq!(a.steps.len(), 21);
            for set in [a.final_batch.images(), a.final_batch.texts()] {
                for r in set.vectors().row_iter() {
                    assert!((crate::numcore::norm(r) - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn frozen_training_keeps_gap() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..small_cfg(InitKind::RandomCones { depth: 2 })
        };
        let t = train_embeddings(&cfg).unwrap();
        assert!(t.steps.iter().all(|s| s.gap_distance == t.steps[0].gap_distance));
    }

    #[test]
    fn training_lowers_loss() {
        let t = train_embeddings(&small_cfg(InitKind::Direct)).unwrap();
        assert!(t.steps.last().unwrap().loss < t.steps[0].loss);
    }

    #[test]
    fn minibatch_training_runs() {
        let cfg = TrainConfig {
            batch_size: Some(4),
            ..small_cfg(InitKind::Direct)
        };
        let t = train_embeddings(&cfg).unwrap();
        assert_eq!(t, train_embeddings(&cfg).unwrap());
        assert!(t.steps.iter().all(|s| s.loss.is_finite()));
        let bad = TrainConfig {
            batch_size: Some(13),
            ..small_cfg(InitKind::Direct)
        };
        assert!(train_embeddings(&bad).is_err());
    }

    #[test]
    fn amended_start_has_smaller_gap() {
        let r = initial_embeddings(&small_cfg(InitKind::RandomCones { depth: 3 })).unwrap();
        let a = initial_embeddings(&small_cfg(InitKind::Amended { depth: 3 })).unwrap();
        assert_eq!(r.images(), a.images());
        assert!(gap_vector(&a).unwrap().distance < gap_vector(&r).unwrap().distance);
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut rng = Rng::new(1);
        let mut s = sample_without_replacement(50, 20, &mut rng);
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 20);
        assert!(s.iter().all(|&i| i < 50));
    }

    #[test]
    fn mean_ci_uses_student_t() {
        let ci = MeanCi::from_samples(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ci.mean, 2.0);
        // t_{0.975, 2} = 4.302653
        assert!((ci.half_width_95 - 4.302_652_729_911 / 3f64.sqrt()).abs() < 1e-6);
        assert!(MeanCi::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn init_vs_opt_small() {
        let cfg = small_cfg(InitKind::RandomCones { depth: 2 });
        let r = init_vs_opt_experiment(&cfg, 2).unwrap();
        assert_eq!(r.random_init.before_samples.len(), 2);
        assert!(r.amended_init.before.mean < r.random_init.before.mean);
        assert!(init_vs_opt_experiment(&small_cfg(InitKind::Direct), 2).is_err());
        assert!(init_vs_opt_experiment(&cfg, 1).is_err());
    }
}
