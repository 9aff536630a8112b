//! Deterministic numerical foundation shared by every experiment.

mod linalg;
mod rng;
mod special;
mod stats;
mod svd;

pub use linalg::{cosine, dot, euclid_sq_unit, gaussian_matrix, norm, normalize, Mat};
pub use rng::Rng;
pub use special::{
    cap_fraction, cap_fraction_for_cos, half_angle_for_cos, ln_reg_inc_beta, log2_cap_fraction,
    log2_cap_fraction_for_cos, normal_cdf, normal_pdf, reg_inc_beta,
};
pub use stats::{
    mean_and_variance, pairwise_cosine_stats, pairwise_cosine_stats_with, ConeStats, PairSampling,
    DEFAULT_PAIR_BUDGET,
};
pub use svd::{svd, Svd};
