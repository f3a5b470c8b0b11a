//! Spectral coarse spaces built from local generalized eigenproblems, in
//! two flavours: one driven by the SPD form (pencil `(A_j, X_j A_j X_j)`)
//! and one driven by the full symmetric indefinite form (pencil
//! `(B_j, X_j A_j X_j)`, convection-free problems only).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::CsrMatrix;
use crate::decomp::DomainDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{shift_invert_smallest, LanczosOptions};

/// Default regularizing shift for the local eigensolves.
pub const DEFAULT_SHIFT: f64 = -0.1;

/// Which bilinear form drives the local eigenproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseVariant {
    /// SPD local form on the left of the pencil.
    Geneo,
    /// Full symmetric indefinite local form on the left of the pencil.
    HGeneo,
}

/// Kept eigenmodes of one subdomain, in local coordinates.
#[derive(Debug, Clone)]
pub struct SubdomainModes {
    pub subdomain: usize,
    /// Kept eigenvalues, ascending.
    pub lambdas: Vec<f64>,
    /// Matching eigenvectors over the subdomain's full dof set,
    /// M_j-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    /// Smallest finite unkept eigenvalue; infinite if all were kept.
    pub lambda_next: f64,
}

/// A coarse space spanned by zero-extensions of the weighted local modes.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    pub variant: CoarseVariant,
    /// Global free-dof dimension.
    pub n: usize,
    /// Per-subdomain kept modes, subdomain-major.
    pub per_subdomain: Vec<SubdomainModes>,
    /// Reciprocal of the smallest next-unkept eigenvalue over all
    /// subdomains; zero when every finite eigenvalue was kept everywhere.
    pub theta: f64,
}

impl CoarseSpace {
    /// Total number of coarse columns.
    pub fn size(&self) -> usize {
        self.per_subdomain.iter().map(|s| s.lambdas.len()).sum()
    }

    /// Kept count per subdomain.
    pub fn m_j(&self) -> Vec<usize> {
        self.per_subdomain.iter().map(|s| s.lambdas.len()).collect()
    }

    /// Materialize the coarse columns as global sparse vectors
    /// (dof index, value), subdomain-major, eigenvalue-ascending.
    /// Each column is the zero-extension of the POU-weighted mode, so its
    /// support stays inside the subdomain's internal dofs.
    pub fn columns<'a>(
        &'a self,
        decomp: &'a DomainDecomposition,
    ) -> impl Iterator<Item = Vec<(usize, f64)>> + 'a {
        self.per_subdomain.iter().flat_map(move |modes| {
            let sd = &decomp.subdomains[modes.subdomain];
            modes.vectors.iter().map(move |p| {
                let weighted = sd.apply_pou(p);
                sd.all_dofs
                    .iter()
                    .zip(&weighted)
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(&g, &v)| (g, v))
                    .collect()
            })
        })
    }

    /// `Z y`: expand coarse coefficients to a global vector.
    pub fn apply(&self, decomp: &DomainDecomposition, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, &c) in self.columns(decomp).zip(y) {
            for (g, v) in col {
                out[g] += c * v;
            }
        }
        out
    }

    /// `Z^T r`: coarse residual.
    pub fn apply_transpose(&self, decomp: &DomainDecomposition, r: &[f64]) -> Vec<f64> {
        self.columns(decomp)
            .map(|col| col.into_iter().map(|(g, v)| v * r[g]).sum())
            .collect()
    }

    /// Dense Galerkin matrix `Z^T S Z` for any sparse `S`.
    pub fn galerkin(&self, decomp: &DomainDecomposition, s: &CsrMatrix) -> DMatrix<f64> {
        let cols: Vec<Vec<(usize, f64)>> = self.columns(decomp).collect();
        let m = cols.len();
        let mut g = DMatrix::zeros(m, m);
        // S z_k once per column, then sparse dots.
        for (k, col_k) in cols.iter().enumerate() {
            let mut zk = vec![0.0; self.n];
            for &(i, v) in col_k {
                zk[i] = v;
            }
            let szk = s.matvec(&zk);
            for (l, col_l) in cols.iter().enumerate() {
                g[(l, k)] = col_l.iter().map(|&(i, v)| v * szk[i]).sum();
            }
        }
        g
    }

    /// Per-subdomain summary CSV: kept count, eigenvalue range, next
    /// eigenvalue; followed by the total.
    pub fn write_summary_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "subdomain,m_j,lambda_min,lambda_max,lambda_next")?;
        for s in &self.per_subdomain {
            let (lo, hi) = match (s.lambdas.first(), s.lambdas.last()) {
                (Some(&lo), Some(&hi)) => (lo, hi),
                _ => (f64::NAN, f64::NAN),
            };
            writeln!(
                w,
                "{},{},{},{},{}",
                s.subdomain,
                s.lambdas.len(),
                lo,
                hi,
                s.lambda_next
            )?;
        }
        writeln!(w, "total,{},,,", self.size())?;
        Ok(())
    }
}

/// `M_j = X_j A_j X_j`: the local SPD form scaled by the POU weights
/// (weight on internal dofs, zero elsewhere).
pub fn weighted_pencil_rhs(a_j: &CsrMatrix, weights: &[f64]) -> CsrMatrix {
    let mut m = a_j.clone();
    for r in 0..m.n_rows {
        for k in m.row_ptr[r]..m.row_ptr[r + 1] {
            let c = m.col_idx[k];
            m.values[k] *= weights[r] * weights[c];
        }
    }
    m
}

/// Build the SPD-driven coarse space: per subdomain solve the pencil
/// `(A_j, X_j A_j X_j)` and keep every finite eigenvalue below
/// `lambda_max` (including zero).
pub fn build_geneo(
    decomp: &DomainDecomposition,
    local_a: &[CsrMatrix],
    lambda_max: f64,
    opts: &LanczosOptions,
) -> Result<CoarseSpace> {
    build_impl(decomp, local_a, local_a, lambda_max, opts, CoarseVariant::Geneo)
}

/// Build the indefinite-form coarse space: pencil `(B_j, X_j A_j X_j)`,
/// keeping all finite eigenvalues below `lambda_max` — negatives included.
/// Only valid when the convection term vanishes, so each `B_j` must be
/// symmetric.
pub fn build_hgeneo(
    decomp: &DomainDecomposition,
    local_b: &[CsrMatrix],
    local_a: &[CsrMatrix],
    lambda_max: f64,
    opts: &LanczosOptions,
) -> Result<CoarseSpace> {
    for b_j in local_b {
        let defect = b_j.asymmetry();
        if defect > 1e-10 * b_j.max_abs().max(1e-300) {
            return Err(Error::VariantUnsupported(defect));
        }
    }
    build_impl(decomp, local_b, local_a, lambda_max, opts, CoarseVariant::HGeneo)
}

fn build_impl(
    decomp: &DomainDecomposition,
    local_left: &[CsrMatrix],
    local_a: &[CsrMatrix],
    lambda_max: f64,
    opts: &LanczosOptions,
    variant: CoarseVariant,
) -> Result<CoarseSpace> {
    if local_left.len() != decomp.subdomains.len() || local_a.len() != decomp.subdomains.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} local matrices for {} subdomains",
            local_left.len(),
            decomp.subdomains.len()
        )));
    }
    let per_subdomain: Vec<SubdomainModes> = decomp
        .subdomains
        .par_iter()
        .map(|sd| {
            let j = sd.id;
            let m_j = weighted_pencil_rhs(&local_a[j], &sd.weights);
            let slice = shift_invert_smallest(&local_left[j], &m_j, DEFAULT_SHIFT, lambda_max, opts)
                .map_err(|e| Error::SubdomainEigensolver {
                    subdomain: j,
                    message: e.to_string(),
                })?;
            let (lambdas, vectors) = slice.pairs.into_iter().unzip();
            Ok(SubdomainModes {
                subdomain: j,
                lambdas,
                vectors,
                lambda_next: slice.lambda_next,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_next = per_subdomain
        .iter()
        .map(|s| s.lambda_next)
        .fold(f64::INFINITY, f64::min);
    let theta = if min_next.is_finite() {
        min_next.recip()
    } else {
        0.0
    };
    let n = decomp.mu.len();
    Ok(CoarseSpace {
        variant,
        n,
        per_subdomain,
        theta,
    })
}

/// `min over z in span(Z) of (v-z)^T A (v-z)` via A-orthogonal projection.
/// A rank-deficient Galerkin matrix falls back to a rank-revealing
/// pseudo-solve.
pub fn coarse_projection_error(
    v: &[f64],
    coarse: &CoarseSpace,
    decomp: &DomainDecomposition,
    a: &CsrMatrix,
) -> Result<f64> {
    let av = a.matvec(v);
    let vav = dot(v, &av);
    if coarse.size() == 0 {
        return Ok(vav);
    }
    let g = coarse.galerkin(decomp, a);
    let rhs = DVector::from_vec(coarse.apply_transpose(decomp, &av));
    let y = match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            // Rank-revealing pseudo-solve through the symmetric
            // eigendecomposition.
            let eig = g.symmetric_eigen();
            let scale = eig
                .eigenvalues
                .iter()
                .map(|e| e.abs())
                .fold(0.0f64, f64::max);
            let mut y = DVector::zeros(rhs.len());
            for i in 0..eig.eigenvalues.len() {
                let e = eig.eigenvalues[i];
                if e.abs() > 1e-12 * scale.max(1e-300) {
                    let q = eig.eigenvectors.column(i);
                    y += q * (q.dot(&rhs) / e);
                }
            }
            y
        }
    };
    let z = coarse.apply(decomp, y.as_slice());
    let d: Vec<f64> = v.iter().zip(&z).map(|(a, b)| a - b).collect();
    let ad = a.matvec(&d);
    Ok(dot(&d, &ad).max(0.0))
}

/// Local spectral projection onto the kept modes: since the modes are
/// M_j-orthonormal, `P v = sum_l (v^T M_j p_l) p_l`.
pub fn local_projection(v: &[f64], modes: &SubdomainModes, m_j: &CsrMatrix) -> Vec<f64> {
    let mv = m_j.matvec(v);
    let mut out = vec![0.0; v.len()];
    for p in &modes.vectors {
        let c = dot(&mv, p);
        for (o, &pi) in out.iter_mut().zip(p) {
            *o += c * pi;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
