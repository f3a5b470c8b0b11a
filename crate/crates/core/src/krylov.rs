//! Right-preconditioned GMRES (full, non-restarted) with a choice of
//! Euclidean or matrix-weighted inner product, plus a check of the
//! field-of-values convergence-rate bound.

use crate::assembly::CsrMatrix;
use crate::error::{Error, Result};

/// Inner product used for orthogonalization and residual norms.
pub enum InnerProduct<'a> {
    Euclidean,
    /// `<u, v> = u^T W v` for a symmetric positive definite `W`.
    Weighted(&'a CsrMatrix),
}

pub struct GmresOptions<'a> {
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub inner: InnerProduct<'a>,
}

impl Default for GmresOptions<'_> {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-6,
            max_iter: 1000,
            inner: InnerProduct::Euclidean,
        }
    }
}

pub struct GmresReport {
    pub iterations: usize,
    pub converged: bool,
    /// Residual norms in the chosen inner product, one entry per iteration
    /// plus the initial residual; non-increasing by construction.
    pub residual_history: Vec<f64>,
    /// `||f - B x||` recomputed from the returned solution.
    pub final_true_residual: f64,
    pub solution: Vec<f64>,
}

/// Solve `B x = f` with the right-preconditioned system `B M^{-1} y = f`,
/// `x = M^{-1} y`. Orthogonalization is modified Gram-Schmidt with one
/// reorthogonalization pass.
pub fn gmres<B, M>(op_b: B, op_m: M, rhs: &[f64], opts: &GmresOptions) -> Result<GmresReport>
where
    B: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let dot_weighted = |u: &[f64], wv: &[f64]| -> f64 {
        u.iter().zip(wv).map(|(a, b)| a * b).sum()
    };
    // `weight(v)` returns the vector paired with `v` in the inner product,
    // cached per basis vector so MGS stays one weighted matvec per step.
    let weight = |v: &[f64]| -> Result<Vec<f64>> {
        match &opts.inner {
            InnerProduct::Euclidean => Ok(v.to_vec()),
            InnerProduct::Weighted(w) => {
                let wv = w.matvec(v);
                let probe = dot_weighted(v, &wv);
                let scale: f64 = v.iter().map(|x| x * x).sum();
                if probe < -1e-12 * scale.max(1e-300) {
                    return Err(Error::InnerProduct);
                }
                Ok(wv)
            }
        }
    };

    let r0 = rhs.to_vec();
    let wr0 = weight(&r0)?;
    let beta = dot_weighted(&r0, &wr0).max(0.0).sqrt();
    let mut history = vec![beta];
    if beta < 1e-300 {
        return Ok(GmresReport {
            iterations: 0,
            converged: true,
            residual_history: history,
            final_true_residual: 0.0,
            solution: vec![0.0; n],
        });
    }
    let target = opts.tol * beta;

    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|x| x / beta).collect()];
    let mut weighted: Vec<Vec<f64>> = vec![wr0.iter().map(|x| x / beta).collect()];
    let mut h_cols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut converged = false;
    let mut lucky = false;

    for k in 0..opts.max_iter {
        let mut w = op_b(&op_m(&basis[k]));
        let ww = weight(&w)?;
        let w_scale = dot_weighted(&w, &ww).max(0.0).sqrt();
        let mut h = vec![0.0; k + 2];
        for pass in 0..2 {
            for (j, wv) in weighted.iter().enumerate() {
                let proj = dot_weighted(&w, wv);
                if pass == 0 {
                    h[j] = proj;
                } else {
                    h[j] += proj;
                }
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= proj * vi;
                }
            }
        }
        let ww = weight(&w)?;
        let norm = dot_weighted(&w, &ww).max(0.0).sqrt();
        h[k + 1] = norm;
        let breakdown = norm <= 1e-14 * w_scale.max(1e-300);
        if !breakdown {
            basis.push(w.iter().map(|x| x / norm).collect());
            weighted.push(ww.iter().map(|x| x / norm).collect());
        }
        // Apply accumulated Givens rotations, then the new one.
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
        let (c, s) = if denom < 1e-300 {
            (1.0, 0.0)
        } else {
            (h[k] / denom, h[k + 1] / denom)
        };
        h[k] = denom;
        h[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        let g_new = -s * g[k];
        g[k] *= c;
        g.push(g_new);
        h_cols.push(h);
        let res = g[k + 1].abs();
        history.push(res.min(history[k]));
        if res <= target {
            converged = true;
            break;
        }
        if breakdown {
            if res <= target * (1.0 + 1e-8) {
                converged = true;
                lucky = true;
                break;
            }
            return Err(Error::Breakdown(k + 1));
        }
    }
    let _ = lucky;

    let m = h_cols.len();
    // Back substitution for the least-squares coefficients.
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for (j, yj) in y.iter().enumerate().skip(i + 1) {
            s -= h_cols[j][i] * yj;
        }
        y[i] = s / h_cols[i][i];
    }
    let mut x_pre = vec![0.0; n];
    for (j, yj) in y.iter().enumerate() {
        for (xi, vi) in x_pre.iter_mut().zip(&basis[j]) {
            *xi += yj * vi;
        }
    }
    let solution = op_m(&x_pre);
    let residual: Vec<f64> = rhs
        .iter()
        .zip(op_b(&solution))
        .map(|(f, bx)| f - bx)
        .collect();
    let wr = weight(&residual)?;
    let final_true_residual = dot_weighted(&residual, &wr).max(0.0).sqrt();
    Ok(GmresReport {
        iterations: m,
        converged,
        residual_history: history,
        final_true_residual,
        solution,
    })
}

/// Check the rate bound `||r^m|| <= (1 - c1^2/c2^2)^{m/2} ||r^0||` against
/// the recorded residual history (requires the history to have been taken
/// in the matching inner product).
pub fn elman_rate_check(report: &GmresReport, c1: f64, c2: f64) -> bool {
    if c1 <= 0.0 || c2 <= 0.0 {
        return false;
    }
    let factor = 1.0 - (c1 / c2) * (c1 / c2);
    if !(0.0..=1.0).contains(&factor) {
        return false;
    }
    let r0 = report.residual_history[0];
    report
        .residual_history
        .iter()
        .enumerate()
        .all(|(m, &r)| r <= factor.powf(0.5 * m as f64) * r0 * (1.0 + 1e-10) + 1e-10 * r0)
}
