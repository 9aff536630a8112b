//! One argument struct and one runner per subcommand.
//!
//! Argument structs double as the manifest's parameter map, so every field
//! that influences the numbers must live here.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use modgap::cone::{layer_curve, multi_seed_cones, Activation, InputKind, InputSource, MlpSpec};
use modgap::gaploss::{
    clip_loss, gap_vector, landscape_sweep_batched, temperature_gap_profile, LandscapeCurve, PairedBatch,
};
use modgap::io::{project_2d, read_embeddings, write_embeddings, EmbeddingFormat};
use modgap::numcore::{
    cap_fraction_for_cos, half_angle_for_cos, log2_cap_fraction_for_cos, pairwise_cosine_stats_with,
    PairSampling, DEFAULT_PAIR_BUDGET,
};
use modgap::spheresim::{
    init_vs_opt_experiment, mismatched_batch, procrustes_align, sim_landscape, train_embeddings, InitKind,
    SimConfig, TrainConfig,
};
use modgap::theory::{
    lemma1_random_pairs, rates_non_decreasing, rectified_gaussian_moments, theorem1_experiment,
    variance_decomposition, Theorem1Config, Z_99,
};
use modgap::{EmbeddingSet, Error, Rng};

use crate::svg::PlotSpec;

pub type CmdResult<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case")]
pub enum Command {
    /// Pairwise cosine statistics of an embedding file
    ConeStats(ConeStatsArgs),
    /// Layer-by-layer cone statistics of a random MLP
    MlpCurve(MlpCurveArgs),
    /// Cones of several independently seeded MLPs on the same inputs
    MultiCones(MultiConesArgs),
    /// Fraction of the sphere covered by a cone with a given cosine floor
    CapFraction(CapFractionArgs),
    /// Probability that one random ReLU layer increases a pair's cosine
    Theorem1(Theorem1Args),
    /// Monte-Carlo check of the inner-product bounds for random layers
    Lemma1(Lemma1Args),
    /// Within/between initialization variance of one output coordinate
    VarianceDecomp(VarianceDecompArgs),
    /// Mean and variance of a rectified Gaussian
    RectifiedMoments(RectifiedMomentsArgs),
    /// Modality gap vector of a paired batch
    Gap(PairedFilesArgs),
    /// Symmetric contrastive loss of a paired batch
    ClipLoss(ClipLossArgs),
    /// Loss landscape as the modalities are shifted along the gap
    ShiftSweep(ShiftSweepArgs),
    /// Loss-optimal remaining gap per temperature
    TempProfile(TempProfileArgs),
    /// Six-pair 3D sphere simulation swept over the text polar angle
    SphereSim(SphereSimArgs),
    /// Projected-gradient training of free embedding tables
    Train(TrainArgs),
    /// Random-cone versus Procrustes-amended initialization
    InitVsOpt(InitVsOptArgs),
    /// Orthogonal map aligning one embedding set onto another
    Procrustes(ProcrustesArgs),
    /// 2D projection of embedding sets onto their top principal plane
    Project2d(Project2dArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ConeStats(_) => "cone-stats",
            Command::MlpCurve(_) => "mlp-curve",
            Command::MultiCones(_) => "multi-cones",
            Command::CapFraction(_) => "cap-fraction",
            Command::Theorem1(_) => "theorem1",
            Command::Lemma1(_) => "lemma1",
            Command::VarianceDecomp(_) => "variance-decomp",
            Command::RectifiedMoments(_) => "rectified-moments",
            Command::Gap(_) => "gap",
            Command::ClipLoss(_) => "clip-loss",
            Command::ShiftSweep(_) => "shift-sweep",
            Command::TempProfile(_) => "temp-profile",
            Command::SphereSim(_) => "sphere-sim",
            Command::Train(_) => "train",
            Command::InitVsOpt(_) => "init-vs-opt",
            Command::Procrustes(_) => "procrustes",
            Command::Project2d(_) => "project-2d",
        }
    }

    /// Whether the primary output is a CSV table (otherwise the JSON report).
    pub fn is_tabular(&self) -> bool {
        matches!(
            self,
            Command::MlpCurve(_)
                | Command::Theorem1(_)
                | Command::Lemma1(_)
                | Command::ShiftSweep(_)
                | Command::TempProfile(_)
                | Command::SphereSim(_)
                | Command::Train(_)
                | Command::Project2d(_)
        )
    }

    pub fn run(&self, seed: u64) -> CmdResult<Outcome> {
        match self {
            Command::ConeStats(a) => cone_stats(a, seed),
            Command::MlpCurve(a) => mlp_curve(a, seed),
            Command::MultiCones(a) => multi_cones(a, seed),
            Command::CapFraction(a) => cap_fraction(a),
            Command::Theorem1(a) => theorem1(a, seed),
            Command::Lemma1(a) => lemma1(a, seed),
            Command::VarianceDecomp(a) => variance_decomp(a, seed),
            Command::RectifiedMoments(a) => rectified(a),
            Command::Gap(a) => gap(a),
            Command::ClipLoss(a) => clip(a),
            Command::ShiftSweep(a) => shift_sweep(a),
            Command::TempProfile(a) => temp_profile(a),
            Command::SphereSim(a) => sphere_sim(a),
            Command::Train(a) => train(a, seed),
            Command::InitVsOpt(a) => init_vs_opt(a, seed),
            Command::Procrustes(a) => procrustes(a),
            Command::Project2d(a) => project(a),
        }
    }
}

/// What a subcommand produced, before anything touches the filesystem.
pub struct Outcome {
    pub results: Value,
    /// CSV text of the primary table, for tabular commands.
    pub table: Option<String>,
    pub plot: Option<PlotSpec>,
    /// Terminal lines, 4 to 6 significant digits.
    pub summary: Vec<String>,
    /// Files the command wrote itself (embedding dumps and the like).
    pub extra_outputs: Vec<PathBuf>,
}

impl Outcome {
    fn report(results: Value, summary: Vec<String>) -> Self {
        Self {
            results,
            table: None,
            plot: None,
            summary,
            extra_outputs: Vec::new(),
        }
    }

    fn tabular(results: Value, table: String, plot: PlotSpec, summary: Vec<String>) -> Self {
        Self {
            results,
            table: Some(table),
            plot: Some(plot),
            summary,
            extra_outputs: Vec::new(),
        }
    }
}

/// Full-precision, round-trippable decimal for files.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Short form for the terminal.
pub fn sig(x: f64) -> String {
    if x == 0.0 || (1e-3..1e5).contains(&x.abs()) {
        format!("{x:.5}")
    } else {
        format!("{x:.4e}")
    }
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn curve_csv(curve: &LandscapeCurve) -> CmdResult<String> {
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// Independent seeds for data and network drawn from one user seed.
fn split_seed(seed: u64) -> (u64, u64) {
    let root = Rng::new(seed);
    (root.child(0).next_u64(), root.child(1).next_u64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputArg {
    /// i.i.d. standard normal vectors
    Gaussian,
    /// Mean token embeddings of random integer sequences
    Sequence,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeStatsArgs {
    /// Embedding file (.csv, .jsonl or .bin)
    #[arg(long)]
    pub input: PathBuf,
    /// Pair count above which pairs are sampled instead of enumerated
    #[arg(long, default_value_t = DEFAULT_PAIR_BUDGET)]
    pub budget: u64,
}

fn cone_stats(a: &ConeStatsArgs, seed: u64) -> CmdResult<Outcome> {
    let set = read_embeddings(&a.input)?;
    let stats = pairwise_cosine_stats_with(set.vectors(), PairSampling { budget: a.budget, seed })?;
    let summary = vec![
        format!("n = {}, d = {}, modality = {}", set.len(), set.dim(), set.modality()),
        format!(
            "mean cos {}  min {}  max {}{}",
            sig(stats.mean_cos),
            sig(stats.min_cos),
            sig(stats.max_cos),
            if stats.sampled { "  (sampled)" } else { "" }
        ),
    ];
    Ok(Outcome::report(
        json!({"n": set.len(), "dim": set.dim(), "modality": set.modality(), "stats": stats}),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpCurveArgs {
    /// none (linear), relu, sigmoid or tanh
    #[arg(long, default_value = "relu")]
    pub activation: Activation,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    /// Number of input points
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = InputArg::Gaussian)]
    pub input_kind: InputArg,
    /// Vocabulary size for sequence inputs
    #[arg(long, default_value_t = 1000)]
    pub vocab: usize,
    /// Sequence length for sequence inputs
    #[arg(long, default_value_t = 16)]
    pub length: usize,
    /// Read inputs from an embedding file instead of generating them
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PAIR_BUDGET)]
    pub budget: u64,
}

fn input_source(
    input: &Option<PathBuf>,
    kind: InputArg,
    dim: usize,
    vocab: usize,
    length: usize,
    n: usize,
    seed: u64,
) -> InputSource {
    let kind = match (input, kind) {
        (Some(p), _) => InputKind::File(p.clone()),
        (None, InputArg::Gaussian) => InputKind::GaussianNoise { dim },
        (None, InputArg::Sequence) => InputKind::IntegerSequenceNoise {
            vocab,
            length,
            embed_dim: dim,
        },
    };
    InputSource { kind, count: n, seed }
}

fn mlp_curve(a: &MlpCurveArgs, seed: u64) -> CmdResult<Outcome> {
    let (data_seed, net_seed) = split_seed(seed);
    let spec = MlpSpec::uniform(a.dim, a.depth, a.activation);
    let source = input_source(&a.input, a.input_kind, a.dim, a.vocab, a.length, a.n, data_seed);
    let curve = if a.budget == DEFAULT_PAIR_BUDGET {
        layer_curve(&spec, net_seed, &source)?
    } else {
        let inputs = source.generate()?;
        let layers = modgap::cone::build_mlp(&spec, net_seed)?.forward_all(&inputs)?;
        let layers = layers
            .iter()
            .map(|m| pairwise_cosine_stats_with(m, PairSampling { budget: a.budget, seed }))
            .collect::<modgap::Result<Vec<_>>>()?;
        modgap::cone::LayerCurve { layers }
    };
    let table = csv_table(
        &["layer", "mean_cos", "min_cos", "max_cos", "pair_count", "sampled"],
        curve.layers.iter().enumerate().map(|(l, s)| {
            vec![
                l.to_string(),
                num(s.mean_cos),
                num(s.min_cos),
                num(s.max_cos),
                s.pair_count.to_string(),
                s.sampled.to_string(),
            ]
        }),
    );
    let summary = curve
        .layers
        .iter()
        .enumerate()
        .map(|(l, s)| format!("layer {l}: mean cos {}", sig(s.mean_cos)))
        .collect();
    Ok(Outcome::tabular(
        json!({"spec": spec, "network_seed": net_seed, "data_seed": data_seed, "layers": curve.layers}),
        table,
        PlotSpec::line(&format!("{} MLP, depth {}", a.activation, a.depth), "layer", &["mean_cos"]),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiConesArgs {
    /// Network seeds; when empty, `--n-seeds` seeds are derived from --seed
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    pub n_seeds: usize,
    #[arg(long, default_value = "relu")]
    pub activation: Activation,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Directory to write one BIN embedding file per seed
    #[arg(long)]
    pub write_embeddings: Option<PathBuf>,
}

fn multi_cones(a: &MultiConesArgs, seed: u64) -> CmdResult<Outcome> {
    let (data_seed, _) = split_seed(seed);
    let seeds: Vec<u64> = if a.seeds.is_empty() {
        let root = Rng::new(seed).child(2);
        (0..a.n_seeds as u64).map(|i| root.child(i).next_u64()).collect()
    } else {
        a.seeds.clone()
    };
    let spec = MlpSpec::uniform(a.dim, a.depth, a.activation);
    let source = InputSource::gaussian(a.dim, a.n, data_seed);
    let cones = multi_seed_cones(&spec, &seeds, &source)?;
    let mut extra = Vec::new();
    if let Some(dir) = &a.write_embeddings {
        std::fs::create_dir_all(dir)?;
        for set in &cones.embeddings {
            let path = dir.join(format!("{}.bin", set.modality()));
            write_embeddings(set, &path, EmbeddingFormat::Bin)?;
            extra.push(path);
        }
    }
    let r = &cones.report;
    let summary = vec![
        format!("{} cones, separated: {}", seeds.len(), r.is_separated()),
        format!(
            "min centroid distance {}  max within-cone spread {}",
            r.min_between().map_or("n/a".into(), sig),
            sig(r.max_within())
        ),
    ];
    let mut out = Outcome::report(
        json!({"spec": spec, "report": r, "separated": r.is_separated(),
               "min_between": r.min_between(), "max_within": r.max_within()}),
        summary,
    );
    out.extra_outputs = extra;
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapFractionArgs {
    #[arg(long)]
    pub dim: usize,
    /// Smallest pairwise cosine inside the cone
    #[arg(long, allow_hyphen_values = true)]
    pub cos: f64,
}

fn cap_fraction(a: &CapFractionArgs) -> CmdResult<Outcome> {
    let fraction = cap_fraction_for_cos(a.dim, a.cos)?;
    let log2 = log2_cap_fraction_for_cos(a.dim, a.cos)?;
    let half_angle = half_angle_for_cos(a.cos)?;
    let shown = if fraction >= 1e-4 || fraction == 0.0 {
        format!("{fraction:.4}")
    } else {
        format!("{fraction:.4e}")
    };
    Ok(Outcome::report(
        json!({"dim": a.dim, "cos": a.cos, "half_angle": half_angle, "fraction": fraction, "log2_fraction": log2}),
        vec![shown, format!("log2 fraction {}", sig(log2))],
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Args {
    #[arg(long, default_value_t = 512)]
    pub d_in: usize,
    /// One or more output widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "512")]
    pub d_out: Vec<usize>,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub cos: f64,
    /// Norm ratio ‖u‖ / ‖v‖
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

fn theorem1(a: &Theorem1Args, seed: u64) -> CmdResult<Outcome> {
    let reports = a
        .d_out
        .iter()
        .map(|&d_out| {
            let cfg = Theorem1Config::new(a.d_in, d_out, a.cos, a.ratio, a.trials, seed)?;
            theorem1_experiment(&cfg)
        })
        .collect::<modgap::Result<Vec<_>>>()?;
    let trial_reports: Vec<_> = reports.iter().map(|r| r.trials).collect();
    let monotone = rates_non_decreasing(&trial_reports);
    let table = csv_table(
        &[
            "d_out", "successes", "trials", "rate", "wilson_halfwidth_95", "mean_delta", "sd_delta", "t_stat",
            "degenerate",
        ],
        reports.iter().map(|r| {
            vec![
                r.config.d_out().to_string(),
                r.trials.successes.to_string(),
                r.trials.trials.to_string(),
                num(r.trials.rate),
                num(r.trials.wilson_halfwidth_95),
                num(r.mean_delta),
                num(r.sd_delta),
                num(r.t_stat),
                r.degenerate.to_string(),
            ]
        }),
    );
    let mut summary: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "d_out {}: rate {} ± {}  mean Δcos {}",
                r.config.d_out(),
                sig(r.trials.rate),
                sig(r.trials.wilson_halfwidth_95),
                sig(r.mean_delta)
            )
        })
        .collect();
    summary.push(format!("rates non-decreasing in d_out: {monotone}"));
    Ok(Outcome::tabular(
        json!({"reports": reports, "rates_non_decreasing": monotone}),
        table,
        PlotSpec::line("cosine increase rate", "d_out", &["rate"]),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Args {
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
    #[arg(long, default_value_t = 16)]
    pub d_in: usize,
    #[arg(long, default_value_t = 256)]
    pub d_out: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Normal quantile for the confidence half-widths (2.5758 = 99 %)
    #[arg(long, default_value_t = Z_99)]
    pub z: f64,
}

fn lemma1(a: &Lemma1Args, seed: u64) -> CmdResult<Outcome> {
    let rows = lemma1_random_pairs(a.pairs, a.d_in, a.d_out, a.samples, a.z, seed)?;
    let all_hold = rows.iter().all(|r| r.check.holds);
    let all_match = rows.iter().all(|r| r.check.mid_matches_closed_form);
    let table = csv_table(
        &[
            "pair", "cos", "lhs", "mid_est", "mid_ci", "upper_est", "upper_ci", "diff_ci", "holds",
            "mid_matches_closed_form",
        ],
        rows.iter().enumerate().map(|(i, r)| {
            let c = &r.check;
            vec![
                i.to_string(),
                num(r.cos),
                num(c.lhs),
                num(c.mid_est),
                num(c.mid_ci),
                num(c.upper_est),
                num(c.upper_ci),
                num(c.diff_ci),
                c.holds.to_string(),
                c.mid_matches_closed_form.to_string(),
            ]
        }),
    );
    let summary = vec![
        format!("{} pairs: bounds hold for all: {all_hold}", rows.len()),
        format!("middle term matches uᵀv + 1 for all: {all_match}"),
    ];
    Ok(Outcome::tabular(
        json!({"pairs": rows, "all_hold": all_hold, "all_mid_match": all_match}),
        table,
        PlotSpec::line("inner-product bounds", "pair", &["lhs", "mid_est", "upper_est"]),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceDecompArgs {
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value = "relu")]
    pub activation: Activation,
    /// Number of network initializations
    #[arg(long, default_value_t = 50)]
    pub seeds: usize,
    /// Number of sphere-uniform inputs shared by every network
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub coordinate: usize,
}

fn variance_decomp(a: &VarianceDecompArgs, seed: u64) -> CmdResult<Outcome> {
    let spec = MlpSpec::uniform(a.dim, a.depth, a.activation);
    let r = variance_decomposition(&spec, a.coordinate, a.seeds, a.n, &Rng::new(seed))?;
    let mut summary = vec![
        format!("within {}  between {}  ratio {}", sig(r.within), sig(r.between), sig(r.ratio)),
        format!("beta estimate {}", r.beta_est.map_or("n/a".into(), sig)),
    ];
    if r.low_budget {
        summary.push("warning: small budget, estimates are noisy".into());
    }
    Ok(Outcome::report(json!({"spec": spec, "report": r}), summary))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectifiedMomentsArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long)]
    pub sigma: f64,
}

fn rectified(a: &RectifiedMomentsArgs) -> CmdResult<Outcome> {
    let m = rectified_gaussian_moments(a.mu, a.sigma)?;
    Ok(Outcome::report(
        json!({"mu": a.mu, "sigma": a.sigma, "mean": m.mean, "variance": m.variance}),
        vec![format!("mean {}  variance {}", sig(m.mean), sig(m.variance))],
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PairedFilesArgs {
    /// Image embeddings, row i paired with text row i
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub texts: PathBuf,
}

/// Reads both sides and puts every row on the unit sphere.
fn read_pair(images: &Path, texts: &Path) -> CmdResult<PairedBatch> {
    let x = read_embeddings(images)?.normalized()?;
    let y = read_embeddings(texts)?.normalized()?;
    Ok(PairedBatch::new(x, y)?)
}

fn optional_pair(images: &Option<PathBuf>, texts: &Option<PathBuf>) -> CmdResult<PairedBatch> {
    match (images, texts) {
        (Some(i), Some(t)) => read_pair(i, t),
        (None, None) => Ok(mismatched_batch()?),
        _ => Err(Box::new(Error::InvalidConfig("--images and --texts must be given together".into()))),
    }
}

fn gap(a: &PairedFilesArgs) -> CmdResult<Outcome> {
    let batch = read_pair(&a.images, &a.texts)?;
    let g = gap_vector(&batch)?;
    Ok(Outcome::report(
        json!({"n": batch.len(), "dim": batch.dim(), "gap": g}),
        vec![format!("gap distance {}", sig(g.distance))],
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClipLossArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub files: PairedFilesArgs,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
}

fn clip(a: &ClipLossArgs) -> CmdResult<Outcome> {
    let batch = read_pair(&a.files.images, &a.files.texts)?;
    let loss = clip_loss(&batch, a.tau)?;
    Ok(Outcome::report(
        json!({"n": batch.len(), "tau": a.tau, "loss": loss}),
        vec![format!("loss {}", sig(loss))],
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

impl GridArgs {
    fn grid(&self) -> CmdResult<Vec<f64>> {
        if self.points < 2 || !(self.lambda_max > self.lambda_min) {
            return Err(Box::new(Error::InvalidConfig(
                "lambda grid needs at least 2 points and lambda_max > lambda_min".into(),
            )));
        }
        let step = (self.lambda_max - self.lambda_min) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.lambda_min + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ShiftSweepArgs {
    /// Image embeddings; defaults to the synthetic mismatched sphere batch
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub texts: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Split the pairs into consecutive batches of this size and average the loss
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn split_batches(batch: &PairedBatch, size: Option<usize>) -> CmdResult<Vec<PairedBatch>> {
    let Some(size) = size.filter(|&s| s < batch.len()) else {
        return Ok(vec![batch.clone()]);
    };
    if size == 0 {
        return Err(Box::new(Error::InvalidConfig("batch size must be positive".into())));
    }
    let rows = |set: &EmbeddingSet, lo: usize, hi: usize| -> Vec<Vec<f64>> {
        (lo..hi).map(|i| set.row(i).to_vec()).collect()
    };
    (0..batch.len())
        .step_by(size)
        .map(|lo| {
            let hi = (lo + size).min(batch.len());
            let x = modgap::Mat::from_rows(&rows(batch.images(), lo, hi))?;
            let y = modgap::Mat::from_rows(&rows(batch.texts(), lo, hi))?;
            Ok(PairedBatch::from_mats(x, y)?)
        })
        .collect()
}

fn shift_sweep(a: &ShiftSweepArgs) -> CmdResult<Outcome> {
    let batch = optional_pair(&a.images, &a.texts)?;
    let batches = split_batches(&batch, a.batch_size)?;
    let curve = landscape_sweep_batched(&batches, a.tau, &a.grid.grid()?)?;
    let best = curve.global_min();
    let summary = vec![
        format!(
            "global minimum at lambda {}  remaining gap {}  loss {}",
            sig(best.control),
            sig(best.remaining_gap),
            sig(best.loss)
        ),
        format!("{} interior local minima", curve.local_min_indices.len()),
    ];
    Ok(Outcome::tabular(
        json!({"tau": a.tau, "batches": batches.len(), "curve": curve}),
        curve_csv(&curve)?,
        PlotSpec::line(&format!("loss landscape, tau = {}", a.tau), "lambda", &["loss"]),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TempProfileArgs {
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub texts: Option<PathBuf>,
    /// Ascending temperatures, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1")]
    pub taus: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

fn temp_profile(a: &TempProfileArgs) -> CmdResult<Outcome> {
    let batch = optional_pair(&a.images, &a.texts)?;
    let profile = temperature_gap_profile(&batch, &a.taus, &a.grid.grid()?)?;
    let non_increasing = profile.windows(2).all(|w| w[1].gap_at_argmin <= w[0].gap_at_argmin);
    let table = csv_table(
        &["tau", "argmin_lambda", "gap_at_argmin"],
        profile
            .iter()
            .map(|p| vec![num(p.tau), num(p.argmin_lambda), num(p.gap_at_argmin)]),
    );
    let mut summary: Vec<String> = profile
        .iter()
        .map(|p| format!("tau {}: best lambda {}  gap {}", sig(p.tau), sig(p.argmin_lambda), sig(p.gap_at_argmin)))
        .collect();
    summary.push(format!("gap non-increasing in tau: {non_increasing}"));
    Ok(Outcome::tabular(
        json!({"profile": profile, "gap_non_increasing": non_increasing}),
        table,
        PlotSpec::line("loss-optimal gap by temperature", "tau", &["gap_at_argmin"]),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSimArgs {
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    /// Swap the azimuths of texts 0 and 1
    #[arg(long)]
    pub mismatched: bool,
    #[arg(long, default_value_t = 6)]
    pub n_pairs: usize,
    #[arg(long, default_value_t = 15.0)]
    pub delta_phi_deg: f64,
    /// Polar angles 90/points, 2·90/points, ..., 90 degrees
    #[arg(long, default_value_t = 90)]
    pub points: usize,
}

fn sphere_sim(a: &SphereSimArgs) -> CmdResult<Outcome> {
    let cfg = SimConfig {
        n_pairs: a.n_pairs,
        delta_phi: a.delta_phi_deg.to_radians(),
        mismatched: a.mismatched,
        ..SimConfig::default()
    };
    if a.points == 0 {
        return Err(Box::new(Error::InvalidConfig("need at least one grid point".into())));
    }
    let grid: Vec<f64> = (1..=a.points)
        .map(|k| (90.0 * k as f64 / a.points as f64).to_radians())
        .collect();
    let curve = sim_landscape(&cfg, a.tau, &grid)?;
    let best = curve.global_min();
    let at_equator = curve.points[curve.points.len() - 1].loss;
    let summary = vec![
        format!(
            "argmin theta {} deg  loss {}",
            sig(best.control.to_degrees()),
            sig(best.loss)
        ),
        format!("loss(90 deg) - min loss {}", sig(at_equator - best.loss)),
    ];
    Ok(Outcome::tabular(
        json!({"config": cfg, "tau": a.tau, "curve": curve,
               "argmin_theta_deg": best.control.to_degrees(), "excess_at_equator": at_equator - best.loss}),
        curve_csv(&curve)?,
        PlotSpec::line(&format!("sphere simulation, tau = {}", a.tau), "theta", &["loss"]),
        summary,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    RandomCones,
    Amended,
    Direct,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 64)]
    pub n_pairs: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = InitArg::RandomCones)]
    pub init: InitArg,
    /// Depth of the random ReLU towers used by cone initializations
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        let init = match self.init {
            InitArg::RandomCones => InitKind::RandomCones { depth: self.depth },
            InitArg::Amended => InitKind::Amended { depth: self.depth },
            InitArg::Direct => InitKind::Direct,
        };
        TrainConfig {
            n_pairs: self.n_pairs,
            dim: self.dim,
            tau: self.tau,
            steps: self.steps,
            learning_rate: self.lr,
            init,
            seed,
            batch_size: self.batch_size,
        }
    }
}

fn train(a: &TrainArgs, seed: u64) -> CmdResult<Outcome> {
    let cfg = a.config(seed);
    let trace = train_embeddings(&cfg)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    let last = trace.steps[trace.steps.len() - 1];
    let summary = vec![
        format!("gap {} -> {}", sig(trace.initial_gap()), sig(trace.final_gap())),
        format!("loss {} -> {}", sig(trace.steps[0].loss), sig(last.loss)),
    ];
    Ok(Outcome::tabular(
        json!({"config": cfg, "initial_gap": trace.initial_gap(), "final_gap": trace.final_gap(),
               "initial_loss": trace.steps[0].loss, "final_loss": last.loss}),
        String::from_utf8(buf)?,
        PlotSpec::line(&format!("training, tau = {}", a.tau), "step", &["gap_distance", "loss"]),
        summary,
    ))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InitVsOptArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
}

fn init_vs_opt(a: &InitVsOptArgs, seed: u64) -> CmdResult<Outcome> {
    let r = init_vs_opt_experiment(&a.train.config(seed), a.repeats)?;
    let line = |name: &str, g: &modgap::spheresim::GapChange| {
        format!(
            "{name}: gap {} ± {} -> {} ± {}",
            sig(g.before.mean),
            sig(g.before.half_width_95),
            sig(g.after.mean),
            sig(g.after.half_width_95)
        )
    };
    let summary = vec![line("random init", &r.random_init), line("amended init", &r.amended_init)];
    Ok(Outcome::report(json!(r), summary))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcrustesArgs {
    /// Target embeddings X
    #[arg(long)]
    pub x: PathBuf,
    /// Embeddings Y to rotate onto X
    #[arg(long)]
    pub y: PathBuf,
    /// Write Y·W here (format from the extension)
    #[arg(long)]
    pub aligned_out: Option<PathBuf>,
}

fn procrustes(a: &ProcrustesArgs) -> CmdResult<Outcome> {
    let x = read_embeddings(&a.x)?;
    let y = read_embeddings(&a.y)?;
    let map = procrustes_align(x.vectors(), y.vectors())?;
    let aligned = map.apply(y.vectors())?;
    let before = x.vectors().sub(y.vectors())?.frobenius_norm();
    let after = x.vectors().sub(&aligned)?.frobenius_norm();
    let mut extra = Vec::new();
    if let Some(path) = &a.aligned_out {
        let set = EmbeddingSet::new(aligned, y.modality())?;
        write_embeddings(&set, path, EmbeddingFormat::from_path(path)?)?;
        extra.push(path.clone());
    }
    let det = map.determinant()?;
    let summary = vec![
        format!("residual {} -> {}", sig(before), sig(after)),
        format!("‖WᵀW - I‖ {}  det {}", sig(map.orthogonality_error()), sig(det)),
    ];
    let mut out = Outcome::report(
        json!({"residual_identity": before, "residual_aligned": after,
               "orthogonality_error": map.orthogonality_error(), "determinant": det, "w": map.w}),
        summary,
    );
    out.extra_outputs = extra;
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project2dArgs {
    /// Embedding files, all with the same dimension
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
}

fn project(a: &Project2dArgs) -> CmdResult<Outcome> {
    let sets = a
        .inputs
        .iter()
        .map(read_embeddings)
        .collect::<modgap::Result<Vec<_>>>()?;
    let coords = project_2d(&sets)?;
    let mut rows = Vec::new();
    let mut centroids = Vec::new();
    for (s, (set, c)) in sets.iter().zip(&coords).enumerate() {
        let label: String = set.modality().chars().filter(|ch| *ch != ',' && *ch != '\n').collect();
        for i in 0..c.rows() {
            rows.push(vec![
                format!("set{s}"),
                label.clone(),
                i.to_string(),
                num(c[(i, 0)]),
                num(c[(i, 1)]),
            ]);
        }
        centroids.push(c.column_means());
    }
    let summary = centroids
        .iter()
        .enumerate()
        .map(|(s, c)| format!("set{s} centroid ({}, {})", sig(c[0]), sig(c[1])))
        .collect();
    Ok(Outcome::tabular(
        json!({"sets": sets.iter().map(|s| json!({"modality": s.modality(), "n": s.len()})).collect::<Vec<_>>(),
               "centroids_2d": centroids}),
        csv_table(&["set", "modality", "index", "x", "y"], rows),
        PlotSpec::scatter("2D projection", "x", "y", "set"),
        summary,
    ))
}
