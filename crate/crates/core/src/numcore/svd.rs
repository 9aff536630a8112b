//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working matrix are rotated pairwise until every pair is
//! numerically orthogonal; the column norms are then the singular values and
//! the accumulated rotations form `V`.

use super::linalg::{dot, norm};
use super::Mat;
use crate::{Error, Result};

/// Off-diagonal tolerance relative to the column norms.
const ORTH_TOL: f64 = 1e-15;

/// `a = u · diag(sigma) · vᵀ` with `k = min(rows, cols)` singular values in
/// descending order; `u` is `rows × k`, `v` is `cols × k`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose())
            .expect("svd factors have consistent shapes")
    }
}

/// Thin singular value decomposition.
///
/// Gives up with [`Error::ConvergenceFailure`] after `100 · max(rows, cols)`
/// sweeps.
pub fn svd(a: &Mat) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    let (m, n) = (a.rows(), a.cols());
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // columns below this squared norm are rounding noise of a null direction;
    // rotating them against each other would never settle
    let total: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let null_floor = total * (m as f64) * f64::EPSILON * f64::EPSILON;
    let max_sweeps = 100 * m.max(n);
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= max_sweeps {
            return Err(Error::ConvergenceFailure { sweeps });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                if alpha <= null_floor || beta <= null_floor {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= ORTH_TOL * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        converged = !rotated;
    }

    let mut order: Vec<(usize, f64)> = cols.iter().map(|c| norm(c)).enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let sigma_max = order.first().map_or(0.0, |o| o.1);
    let null_tol = sigma_max * (m as f64) * f64::EPSILON;

    let mut ucols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut v = Mat::zeros(n, n);
    for (k, &(j, s)) in order.iter().enumerate() {
        sigma.push(s);
        for (i, &x) in vcols[j].iter().enumerate() {
            v[(i, k)] = x;
        }
        if s > null_tol && s > 0.0 {
            ucols.push(Some(cols[j].iter().map(|x| x / s).collect()));
        } else {
            ucols.push(None);
        }
    }
    let ucols = complete_orthonormal(ucols, m);
    let mut u = Mat::zeros(m, n);
    for (k, col) in ucols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            u[(i, k)] = x;
        }
    }
    Ok(Svd { u, sigma, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
/// Each slot takes the standard basis vector with the largest component
/// outside the current span, orthogonalized by two Gram–Schmidt passes.
fn complete_orthonormal(mut cols: Vec<Option<Vec<f64>>>, m: usize) -> Vec<Vec<f64>> {
    for k in 0..cols.len() {
        if cols[k].is_some() {
            continue;
        }
        let residual = |i: usize, cols: &[Option<Vec<f64>>]| {
            let mut w = vec![0.0; m];
            w[i] = 1.0;
            for _ in 0..2 {
                for c in cols.iter().flatten() {
                    let proj = dot(&w, c);
                    w.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                }
            }
            w
        };
        let (w, n) = (0..m)
            .map(|i| {
                let w = residual(i, &cols);
                let n = norm(&w);
                (w, n)
            })
            .fold((Vec::new(), -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        assert!(n > 0.0, "no direction left while completing U");
        cols[k] = Some(w.into_iter().map(|x| x / n).collect());
    }
    cols.into_iter().map(|c| c.expect("completed")).collect()
}
