//! Regularized incomplete beta, hypersphere cap fractions and the standard
//! normal pdf / cdf.

use std::f64::consts::{FRAC_PI_2, LN_2};

use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// `ln I_x(a, b)`, accurate even when `I_x(a, b)` underflows `f64`.
pub fn ln_reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "incomplete beta needs a, b > 0");
    assert!((0.0..=1.0).contains(&x), "incomplete beta needs x in [0, 1]");
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 1.0 {
        return 0.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front(x, a, b) + beta_cf(x, a, b).ln() - a.ln()
    } else {
        // I_x(a, b) = 1 - I_{1-x}(b, a); the tail term is small here
        let tail = (ln_front(1.0 - x, b, a) + beta_cf(1.0 - x, b, a).ln() - b.ln()).exp();
        (-tail).ln_1p()
    }
}

pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    ln_reg_inc_beta(x, a, b).exp()
}

/// `ln( x^a (1-x)^b / B(a, b) )`.
fn ln_front(x: f64, a: f64, b: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    a * x.ln() + b * (-x).ln_1p() - ln_beta
}

/// Continued fraction for the incomplete beta, modified Lentz evaluation.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn check_cap_args(dim: usize, half_angle: f64) -> Result<()> {
    if dim < 2 {
        return Err(Error::DimTooSmall(dim));
    }
    if !(0.0..=FRAC_PI_2).contains(&half_angle) {
        return Err(Error::AngleOutOfRange(half_angle));
    }
    Ok(())
}

/// Natural log of the cap fraction, `ln(½ I_{sin²α}((dim-1)/2, ½))`.
fn ln_cap_fraction(dim: usize, half_angle: f64) -> Result<f64> {
    check_cap_args(dim, half_angle)?;
    if half_angle == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let x = half_angle.sin().powi(2).min(1.0);
    Ok(ln_reg_inc_beta(x, (dim as f64 - 1.0) / 2.0, 0.5) - LN_2)
}

/// Fraction of the unit sphere in `R^dim` lying within angular radius
/// `half_angle` of a fixed pole.
pub fn cap_fraction(dim: usize, half_angle: f64) -> Result<f64> {
    Ok(ln_cap_fraction(dim, half_angle)?.exp())
}

/// Base-2 log of [`cap_fraction`], finite far below `f64`'s underflow.
pub fn log2_cap_fraction(dim: usize, half_angle: f64) -> Result<f64> {
    Ok(ln_cap_fraction(dim, half_angle)? / LN_2)
}

/// Half-angle of the cone whose widest pair has cosine `cos_floor`.
pub fn half_angle_for_cos(cos_floor: f64) -> Result<f64> {
    if !(cos_floor > -1.0 && cos_floor <= 1.0) {
        return Err(Error::InvalidCos(cos_floor));
    }
    Ok(cos_floor.acos() / 2.0)
}

pub fn cap_fraction_for_cos(dim: usize, cos_floor: f64) -> Result<f64> {
    cap_fraction(dim, half_angle_for_cos(cos_floor)?)
}

pub fn log2_cap_fraction_for_cos(dim: usize, cos_floor: f64) -> Result<f64> {
    log2_cap_fraction(dim, half_angle_for_cos(cos_floor)?)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;
    use std::f64::consts::PI;

    /// Fraction of uniform directions within `half_angle` of the pole.
    fn monte_carlo_cap(dim: usize, half_angle: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = Rng::new(seed);
        let cos_limit = half_angle.cos();
        let hits = (0..samples)
            .filter(|_| rng.unit_vector(dim)[0] >= cos_limit)
            .count();
        hits as f64 / samples as f64
    }

    #[test]
    fn hemisphere_and_closed_forms() {
        assert!((cap_fraction(3, FRAC_PI_2).unwrap() - 0.5).abs() < 1e-12);
        // circle: arc fraction is α/π; sphere: (1 - cos α)/2
        for a in [0.1, 0.5, 1.2] {
            assert!((cap_fraction(2, a).unwrap() - a / PI).abs() < 1e-12);
            assert!((cap_fraction(3, a).unwrap() - (1.0 - a.cos()) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_fraction_for_cos_056() {
        let f = cap_fraction_for_cos(2, 0.56).unwrap();
        assert!((f - 0.1553).abs() < 5e-4, "{f}");
    }

    #[test]
    fn sphere_fraction_for_cos_056_is_formula_value() {
        // (1 - cos(arccos(0.56)/2)) / 2, about 5.84 %
        let expect = (1.0 - (0.56f64.acos() / 2.0).cos()) / 2.0;
        let f = cap_fraction_for_cos(3, 0.56).unwrap();
        assert!((f - expect).abs() < 1e-12);
        assert!((f - 0.0584).abs() < 5e-4);
        let mc = monte_carlo_cap(3, 0.56f64.acos() / 2.0, 200_000, 4);
        assert!((f - mc).abs() < 0.002, "{f} vs {mc}");
    }

    #[test]
    fn dim5_matches_monte_carlo() {
        let f = cap_fraction(5, 0.4).unwrap();
        let mc = monte_carlo_cap(5, 0.4, 1_000_000, 5);
        assert!((f - mc).abs() < 0.002, "{f} vs {mc}");
    }

    #[test]
    fn dim512_below_two_to_minus_512() {
        let l = log2_cap_fraction_for_cos(512, 0.56).unwrap();
        assert!(l < -512.0, "{l}");
        assert!(l.is_finite());
    }

    #[test]
    fn zero_width_cone() {
        assert_eq!(cap_fraction_for_cos(7, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(cap_fraction(1, 0.3), Err(Error::DimTooSmall(1))));
        assert!(matches!(cap_fraction(3, 2.0), Err(Error::AngleOutOfRange(_))));
        assert!(matches!(cap_fraction(3, -0.1), Err(Error::AngleOutOfRange(_))));
        assert!(matches!(cap_fraction_for_cos(3, -1.0), Err(Error::InvalidCos(_))));
    }

    #[test]
    fn incomplete_beta_agrees_with_statrs() {
        for &(x, a, b) in &[(0.3, 2.0, 3.0), (0.9, 0.5, 0.5), (0.05, 10.0, 0.5), (0.7, 255.5, 0.5)] {
            let ours = reg_inc_beta(x, a, b);
            let theirs = statrs::function::beta::beta_reg(a, b, x);
            assert!((ours - theirs).abs() < 1e-12, "{x} {a} {b}: {ours} vs {theirs}");
        }
    }

    #[test]
    fn cap_fraction_monotone_on_grid() {
        for dim in 2..12 {
            let mut prev = 0.0;
            for k in 1..=40 {
                let a = FRAC_PI_2 * k as f64 / 40.0;
                let f = cap_fraction(dim, a).unwrap();
                assert!(f > prev, "dim {dim} angle {a}");
                prev = f;
                if k < 40 {
                    assert!(cap_fraction(dim + 1, a).unwrap() < f);
                }
            }
        }
    }

    #[test]
    fn normal_functions() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.9750021048517795).abs() < 1e-12, "{}", normal_cdf(1.96));
        assert!((normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
    }
}
