//! The cone effect of randomly initialized MLPs.
//!
//! Random affine layers followed by a non-linearity pull a cloud of inputs
//! into an ever narrower cone. This module builds such networks, tracks the
//! pairwise cosine statistics layer by layer, and measures how far apart the
//! cones of independently seeded networks land.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numcore::{gaussian_matrix, norm, pairwise_cosine_stats, ConeStats, Mat, Rng};
use crate::{io, EmbeddingSet, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::None => "none",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        };
        f.write_str(s)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "linear" | "identity" => Ok(Activation::None),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidSpec(format!("unknown activation '{other}'"))),
        }
    }
}

/// Shape and initialization of a random MLP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    /// Output width of each layer, first to last.
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub weight_variance: f64,
    pub bias_variance: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self::uniform(512, 6, Activation::Relu)
    }
}

impl MlpSpec {
    /// `depth` square layers of width `dim`, weights and biases `N(0, 1/dim)`.
    pub fn uniform(dim: usize, depth: usize, activation: Activation) -> Self {
        Self {
            input_dim: dim,
            layer_dims: vec![dim; depth],
            activation,
            weight_variance: 1.0 / dim as f64,
            bias_variance: 1.0 / dim as f64,
        }
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims.last().copied().unwrap_or(self.input_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.layer_dims.contains(&0) {
            return Err(Error::InvalidSpec("all dimensions must be at least 1".into()));
        }
        for (name, v) in [("weight", self.weight_variance), ("bias", self.bias_variance)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} variance must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A materialized random MLP. Immutable once built.
#[derive(Clone, Debug)]
pub struct Mlp {
    spec: MlpSpec,
    /// `out × in` per layer.
    weights: Vec<Mat>,
    biases: Vec<Vec<f64>>,
    seed: u64,
}

/// Samples every layer of `spec` from `seed`; layer `l` draws its weights
/// then its bias from child stream `l`.
pub fn build_mlp(spec: &MlpSpec, seed: u64) -> Result<Mlp> {
    spec.validate()?;
    let root = Rng::new(seed);
    let mut weights = Vec::with_capacity(spec.depth());
    let mut biases = Vec::with_capacity(spec.depth());
    let mut fan_in = spec.input_dim;
    for (l, &fan_out) in spec.layer_dims.iter().enumerate() {
        let mut rng = root.child(l as u64);
        weights.push(gaussian_matrix(fan_out, fan_in, spec.weight_variance, &mut rng)?);
        let mut b = vec![0.0; fan_out];
        rng.fill_normal(&mut b, spec.bias_variance.sqrt());
        biases.push(b);
        fan_in = fan_out;
    }
    Ok(Mlp {
        spec: spec.clone(),
        weights,
        biases,
        seed,
    })
}

impl Mlp {
    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Output after `up_to_layer` layers (all layers when `None`).
    pub fn forward(&self, inputs: &EmbeddingSet, up_to_layer: Option<usize>) -> Result<EmbeddingSet> {
        let depth = up_to_layer.unwrap_or(self.depth()).min(self.depth());
        let mut h = self.check_input(inputs)?.clone();
        for l in 0..depth {
            h = self.layer(l, &h)?;
        }
        EmbeddingSet::new(h, inputs.modality())
    }

    /// Representations after every layer; index 0 is the raw input.
    pub fn forward_all(&self, inputs: &EmbeddingSet) -> Result<Vec<Mat>> {
        let mut out = vec![self.check_input(inputs)?.clone()];
        for l in 0..self.depth() {
            let next = self.layer(l, out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    fn check_input<'a>(&self, inputs: &'a EmbeddingSet) -> Result<&'a Mat> {
        if inputs.dim() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                found: inputs.dim(),
            });
        }
        Ok(inputs.vectors())
    }

    fn layer(&self, l: usize, h: &Mat) -> Result<Mat> {
        let act = self.spec.activation;
        let mut z = h.affine_rows(&self.weights[l], &self.biases[l])?;
        if act != Activation::None {
            z.as_mut_slice().iter_mut().for_each(|x| *x = act.apply(*x));
        }
        Ok(z)
    }
}

/// Where cone-experiment inputs come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InputKind {
    /// Standard normal vectors.
    GaussianNoise { dim: usize },
    /// Mean-pooled rows of a random `N(0, 1/embed_dim)` token table, one
    /// random integer sequence per input.
    IntegerSequenceNoise {
        vocab: usize,
        length: usize,
        embed_dim: usize,
    },
    /// Vectors read from an embedding file (first `count` rows).
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSource {
    pub kind: InputKind,
    pub count: usize,
    /// Seeds the synthetic kinds; the same seed reproduces the same data.
    pub seed: u64,
}

impl InputSource {
    pub fn gaussian(dim: usize, count: usize, seed: u64) -> Self {
        Self {
            kind: InputKind::GaussianNoise { dim },
            count,
            seed,
        }
    }

    pub fn generate(&self) -> Result<EmbeddingSet> {
        if self.count < 2 {
            return Err(Error::TooFewVectors {
                needed: 2,
                found: self.count,
            });
        }
        let root = Rng::new(self.seed);
        match &self.kind {
            InputKind::GaussianNoise { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidConfig("input dim must be at least 1".into()));
                }
                let m = gaussian_matrix(self.count, *dim, 1.0, &mut root.child(0))?;
                EmbeddingSet::new(m, "gaussian-noise")
            }
            InputKind::IntegerSequenceNoise {
                vocab,
                length,
                embed_dim,
            } => {
                if *length == 0 {
                    return Err(Error::InvalidConfig("sequence length must be at least 1".into()));
                }
                let table = TokenTable::new(*vocab, *embed_dim, root.child(0).next_u64())?;
                let mut seq_rng = root.child(1);
                let mut m = Mat::zeros(self.count, *embed_dim);
                let mut tokens = vec![0usize; *length];
                for i in 0..self.count {
                    for t in tokens.iter_mut() {
                        *t = seq_rng.below(*vocab as u64) as usize;
                    }
                    m.row_mut(i).copy_from_slice(&table.embed_sequence(&tokens));
                }
                EmbeddingSet::new(m, "integer-sequence-noise")
            }
            InputKind::File(path) => {
                let set = io::read_embeddings(path)?;
                if set.len() < 2 {
                    return Err(Error::TooFewVectors {
                        needed: 2,
                        found: set.len(),
                    });
                }
                set.truncated(self.count)
            }
        }
    }
}

/// Random token-embedding lookup table.
#[derive(Clone, Debug)]
pub struct TokenTable {
    table: Mat,
}

impl TokenTable {
    pub fn new(vocab: usize, embed_dim: usize, seed: u64) -> Result<Self> {
        if vocab == 0 || embed_dim == 0 {
            return Err(Error::InvalidConfig("vocab and embed_dim must be at least 1".into()));
        }
        let table = gaussian_matrix(vocab, embed_dim, 1.0 / embed_dim as f64, &mut Rng::new(seed))?;
        Ok(Self { table })
    }

    /// Mean of the token rows. Panics on an out-of-vocabulary token.
    pub fn embed_sequence(&self, tokens: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.table.cols()];
        for &t in tokens {
            for (o, &x) in out.iter_mut().zip(self.table.row(t)) {
                *o += x;
            }
        }
        let n = tokens.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Cosine statistics after each layer; entry 0 is the raw input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub layers: Vec<ConeStats>,
}

impl LayerCurve {
    pub fn mean_cos(&self) -> Vec<f64> {
        self.layers.iter().map(|s| s.mean_cos).collect()
    }
}

pub fn layer_curve(spec: &MlpSpec, seed: u64, source: &InputSource) -> Result<LayerCurve> {
    let inputs = source.generate()?;
    layer_curve_on(&build_mlp(spec, seed)?, &inputs)
}

pub fn layer_curve_on(mlp: &Mlp, inputs: &EmbeddingSet) -> Result<LayerCurve> {
    let layers = mlp
        .forward_all(inputs)?
        .iter()
        .map(pairwise_cosine_stats)
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerCurve { layers })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidDistance {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// How far apart the cones of differently seeded networks sit, compared with
/// how spread out each cone is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub seeds: Vec<u64>,
    /// Centroid of each seed's normalized outputs.
    pub centroids: Vec<Vec<f64>>,
    /// Mean distance of each seed's normalized outputs to its own centroid.
    pub spreads: Vec<f64>,
    /// Centroid distance for every unordered seed pair `a < b`.
    pub pairs: Vec<CentroidDistance>,
}

impl SeparationReport {
    pub fn min_between(&self) -> Option<f64> {
        self.pairs.iter().map(|p| p.distance).min_by(f64::total_cmp)
    }

    pub fn max_within(&self) -> f64 {
        self.spreads.iter().copied().fold(0.0, f64::max)
    }

    /// Every pair of cones is further apart than the widest cone is wide.
    pub fn is_separated(&self) -> bool {
        self.min_between().is_some_and(|m| m > self.max_within())
    }
}

#[derive(Clone, Debug)]
pub struct MultiCones {
    /// Normalized network outputs, one set per seed, in seed-list order.
    pub embeddings: Vec<EmbeddingSet>,
    pub report: SeparationReport,
}

/// Pushes the same inputs through one network per seed.
pub fn multi_seed_cones(spec: &MlpSpec, seeds: &[u64], source: &InputSource) -> Result<MultiCones> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    let inputs = source.generate()?;
    let embeddings = seeds
        .par_iter()
        .map(|&seed| {
            let out = build_mlp(spec, seed)?.forward(&inputs, None)?;
            Ok(out.normalized()?.with_modality(format!("seed-{seed}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let centroids: Vec<Vec<f64>> = embeddings.iter().map(EmbeddingSet::centroid).collect();
    let spreads = embeddings
        .iter()
        .zip(&centroids)
        .map(|(set, c)| {
            set.vectors().row_iter().map(|r| distance(r, c)).sum::<f64>() / set.len() as f64
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..seeds.len() {
        for b in a + 1..seeds.len() {
            pairs.push(CentroidDistance {
                a,
                b,
                distance: distance(&centroids[a], &centroids[b]),
            });
        }
    }
    Ok(MultiCones {
        embeddings,
        report: SeparationReport {
            seeds: seeds.to_vec(),
            centroids,
            spreads,
            pairs,
        },
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d)
}

/// Cosine statistics of the vectors stored in an embedding file.
pub fn ingest_and_analyze(path: impl AsRef<std::path::Path>) -> Result<ConeStats> {
    let set = io::read_embeddings(path)?;
    pairwise_cosine_stats(set.vectors())
}
