//! Shift-invert Lanczos for the symmetric pencil `A x = lambda M x` with
//! `M` positive semidefinite (and possibly very singular).
//!
//! The iteration runs on `K = (A + sigma M)^{-1} M` in the M-seminorm.
//! Ritz values `theta` map back via `lambda = 1/theta - sigma`; the null
//! space of `M` only shows up as `theta = 0` and is never reported.
//! Converged wanted pairs are locked and the iteration restarts against
//! their M-orthogonal complement until a restart discovers nothing new, so
//! multiple eigenvalues are found with their full multiplicity.

use nalgebra::DMatrix;

use crate::assembly::CsrMatrix;
use crate::error::{Error, Result};
use crate::linalg::banded::BandedLu;

/// Tuning knobs for the eigensolver.
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Residual tolerance in the shift-inverted spectrum.
    pub tol: f64,
    /// Inner iteration cap per restart.
    pub max_iter: usize,
    /// Cap on deflation restarts.
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-11,
            max_iter: 400,
            max_restarts: 40,
        }
    }
}

/// Eigenvalues of the pencil below a cutoff, with vectors.
#[derive(Debug, Clone)]
pub struct SpectralSlice {
    /// Finite eigenvalues `lambda < lambda_cut`, ascending, with
    /// M-normalized eigenvectors.
    pub pairs: Vec<(f64, Vec<f64>)>,
    /// Smallest finite eigenvalue `>= lambda_cut`; infinite when the whole
    /// finite spectrum lies below the cutoff.
    pub lambda_next: f64,
}

struct ShiftInvertOp<'a> {
    lu: BandedLu,
    m: &'a CsrMatrix,
}

impl ShiftInvertOp<'_> {
    /// `K v = (A + sigma M)^{-1} M v`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut w = self.m.matvec(v);
        self.lu.solve_in_place(&mut w);
        w
    }
}

/// All finite eigenvalues of `(A, M)` below `lambda_cut`, plus the first
/// one above it. `sigma` regularizes the factorization; if `A + sigma M`
/// is singular the shift is halved and retried.
pub fn shift_invert_smallest(
    a: &CsrMatrix,
    m: &CsrMatrix,
    sigma: f64,
    lambda_cut: f64,
    opts: &LanczosOptions,
) -> Result<SpectralSlice> {
    let n = a.n_rows;
    if a.n_cols != n || m.n_rows != n || m.n_cols != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil shapes {}x{} and {}x{}",
            a.n_rows, a.n_cols, m.n_rows, m.n_cols
        )));
    }
    if sigma == 0.0 {
        return Err(Error::Parameter("shift must be nonzero".into()));
    }
    let (op, sigma) = factor_with_retry(a, m, sigma)?;

    // Locked converged pairs: (lambda, vector, M*vector).
    let mut locked: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut above_cut: Vec<f64> = Vec::new();
    let mut exhausted = false;
    let mut ran_out = true;

    let mut seed = 0x5eed5eed5eedu64;
    for _restart in 0..opts.max_restarts {
        let outcome = lanczos_pass(
            &op, sigma, lambda_cut, opts, &mut locked, &mut above_cut, &mut seed,
        );
        match outcome {
            PassOutcome::Exhausted => {
                exhausted = true;
                ran_out = false;
                break;
            }
            PassOutcome::NewPairs(0) => {
                // A barren restart confirms the slice is complete, as long
                // as the first eigenvalue above the cutoff has been seen.
                if !above_cut.is_empty() {
                    ran_out = false;
                    break;
                }
            }
            PassOutcome::NewPairs(_) => {}
        }
    }
    if ran_out && !exhausted {
        return Err(Error::Eigensolver(format!(
            "restart budget exhausted with {} pairs locked and no settled \
             eigenvalue above the cutoff",
            locked.len()
        )));
    }

    let mut pairs: Vec<(f64, Vec<f64>)> =
        locked.into_iter().map(|(l, v, _)| (l, v)).collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let lambda_next = above_cut.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SpectralSlice { pairs, lambda_next })
}

fn factor_with_retry<'a>(
    a: &CsrMatrix,
    m: &'a CsrMatrix,
    mut sigma: f64,
) -> Result<(ShiftInvertOp<'a>, f64)> {
    let mut last_err = None;
    for _ in 0..6 {
        let shifted = a.add_scaled(sigma, m);
        match BandedLu::factor(&shifted) {
            Ok(lu) => return Ok((ShiftInvertOp { lu, m }, sigma)),
            Err(e) => {
                last_err = Some(e);
                sigma *= 0.5;
            }
        }
    }
    Err(Error::Eigensolver(format!(
        "shifted matrix stayed singular down to sigma = {sigma}: {}",
        last_err.unwrap()
    )))
}

enum PassOutcome {
    /// The deflated Krylov space ran out: the finite spectrum is complete.
    Exhausted,
    /// Number of newly locked wanted pairs.
    NewPairs(usize),
}

/// One Lanczos run in the M-orthogonal complement of the locked pairs.
///
/// Runs until either the basis saturates (true invariant subspace), the
/// iteration cap is hit, or every wanted Ritz value has converged *and* a
/// converged Ritz value at or above the cutoff pins down `lambda_next`.
fn lanczos_pass(
    op: &ShiftInvertOp,
    sigma: f64,
    lambda_cut: f64,
    opts: &LanczosOptions,
    locked: &mut Vec<(f64, Vec<f64>, Vec<f64>)>,
    above_cut: &mut Vec<f64>,
    seed: &mut u64,
) -> PassOutcome {
    let n = op.m.n_rows;
    let mut next_unit = || {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    // Start vector: random, purified through K (killing null(M)), then
    // M-orthogonalized against the locked invariant subspace.
    let r: Vec<f64> = (0..n).map(|_| next_unit()).collect();
    let mut v = op.apply(&r);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut mbasis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let orth = |w: &mut Vec<f64>,
                basis: &[Vec<f64>],
                mbasis: &[Vec<f64>],
                locked: &[(f64, Vec<f64>, Vec<f64>)]| {
        for _ in 0..2 {
            for (_, lv, lmv) in locked {
                let c = dot(w, lmv);
                axpy(w, -c, lv);
            }
            for (bv, bmv) in basis.iter().zip(mbasis) {
                let c = dot(w, bmv);
                axpy(w, -c, bv);
            }
        }
    };

    orth(&mut v, &basis, &mbasis, locked);
    let mut mv = op.m.matvec(&v);
    let nrm = dot(&v, &mv).max(0.0).sqrt();
    let breakdown = 1e-10;
    if nrm < breakdown {
        return PassOutcome::Exhausted;
    }
    scale(&mut v, 1.0 / nrm);
    scale(&mut mv, 1.0 / nrm);
    basis.push(v);
    mbasis.push(mv);

    loop {
        let j = basis.len() - 1;
        let mut w = op.apply(&basis[j]);
        let alpha = dot(&w, &mbasis[j]);
        axpy(&mut w, -alpha, &basis[j]);
        if j > 0 {
            axpy(&mut w, -betas[j - 1], &basis[j - 1]);
        }
        orth(&mut w, &basis, &mbasis, locked);
        alphas.push(alpha);
        let mut mw = op.m.matvec(&w);
        let beta = dot(&w, &mw).max(0.0).sqrt();
        let theta_scale = alphas
            .iter()
            .map(|a| a.abs())
            .chain(betas.iter().map(|b| b.abs()))
            .fold(1e-300, f64::max);

        let saturated = beta < breakdown * theta_scale.max(1.0);
        let capped = alphas.len() >= opts.max_iter;
        let check_now = saturated || capped || alphas.len() % 10 == 0;
        if check_now {
            let ritz = classify_ritz(sigma, lambda_cut, opts, &alphas, &betas, beta, theta_scale);
            let settled = ritz.pending_wanted == 0
                && (ritz.min_above_converged.is_finite() || saturated);
            if settled || saturated || capped {
                let new_locked =
                    lock_pairs(op, &ritz, lambda_cut, &basis, locked, above_cut);
                if saturated && new_locked == 0 && ritz.min_above_converged.is_infinite() {
                    return PassOutcome::Exhausted;
                }
                return PassOutcome::NewPairs(new_locked);
            }
        }
        betas.push(beta);
        scale(&mut w, 1.0 / beta);
        scale(&mut mw, 1.0 / beta);
        basis.push(w);
        mbasis.push(mw);
    }
}

struct RitzClassification {
    /// Column `i` of the tridiagonal eigenvector matrix, with its mapped
    /// eigenvalue, for every converged finite Ritz value.
    converged: Vec<(usize, f64)>,
    /// Eigenvector matrix of the tridiagonal.
    s: DMatrix<f64>,
    /// Wanted (below-cutoff) Ritz values not yet converged.
    pending_wanted: usize,
    /// Smallest converged eigenvalue at or above the cutoff.
    min_above_converged: f64,
}

fn classify_ritz(
    sigma: f64,
    lambda_cut: f64,
    opts: &LanczosOptions,
    alphas: &[f64],
    betas: &[f64],
    beta_last: f64,
    theta_scale: f64,
) -> RitzClassification {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let theta_floor = 1e-9 * theta_scale;
    let res_tol = opts.tol.max(1e-15) * theta_scale;
    let mut converged = Vec::new();
    let mut pending_wanted = 0usize;
    let mut min_above_converged = f64::INFINITY;
    for i in 0..k {
        let theta = eig.eigenvalues[i];
        if theta.abs() <= theta_floor {
            continue; // null(M) remnant / infinite end of the pencil
        }
        let lambda = 1.0 / theta - sigma;
        let resid = beta_last * eig.eigenvectors[(k - 1, i)].abs();
        if resid <= res_tol {
            converged.push((i, lambda));
            if lambda >= lambda_cut {
                min_above_converged = min_above_converged.min(lambda);
            }
        } else if lambda < lambda_cut {
            pending_wanted += 1;
        }
    }
    RitzClassification {
        converged,
        s: eig.eigenvectors,
        pending_wanted,
        min_above_converged,
    }
}

/// Assemble, purify and lock the converged wanted Ritz vectors; record the
/// converged eigenvalue above the cutoff if one exists.
fn lock_pairs(
    op: &ShiftInvertOp,
    ritz: &RitzClassification,
    lambda_cut: f64,
    basis: &[Vec<f64>],
    locked: &mut Vec<(f64, Vec<f64>, Vec<f64>)>,
    above_cut: &mut Vec<f64>,
) -> usize {
    let n = basis[0].len();
    let mut new_locked = 0usize;
    for &(col, lambda) in &ritz.converged {
        if lambda >= lambda_cut {
            continue;
        }
        let mut x = vec![0.0; n];
        for (bv, &s) in basis.iter().zip(ritz.s.column(col).iter()) {
            axpy(&mut x, s, bv);
        }
        // Purify through K: any null(M) leakage is annihilated while the
        // eigendirection is preserved (K x = theta x there).
        let kx = op.apply(&x);
        let mkx = op.m.matvec(&kx);
        let nrm = dot(&kx, &mkx).max(0.0).sqrt();
        if nrm < 1e-12 {
            continue;
        }
        let x: Vec<f64> = kx.iter().map(|&v| v / nrm).collect();
        let mx: Vec<f64> = mkx.iter().map(|&v| v / nrm).collect();
        locked.push((lambda, x, mx));
        new_locked += 1;
    }
    if ritz.min_above_converged.is_finite() {
        above_cut.push(ritz.min_above_converged);
    }
    new_locked
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [f64], s: f64) {
    for vi in v.iter_mut() {
        *vi *= s;
    }
}
