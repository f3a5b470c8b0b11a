//! Dense generalized symmetric eigensolver, used as the oracle the sparse
//! solver is validated against. Handles singular positive-semidefinite
//! right-hand matrices by deflating their null space; pencil directions in
//! the null space count as infinite eigenvalues.

use nalgebra::{DMatrix, DVector};

use crate::assembly::CsrMatrix;
use crate::error::{Error, Result};

/// Finite spectrum of a symmetric pencil `(A, M)` with `M` PSD.
#[derive(Debug, Clone)]
pub struct DenseEig {
    /// Finite eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors (columns match `eigenvalues`), M-orthonormal.
    pub eigenvectors: DMatrix<f64>,
    /// Pencil dimension minus rank of `M`.
    pub n_infinite: usize,
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// All finite eigenpairs of the symmetric pencil `(A, M)`.
///
/// `M` is eigendecomposed first; directions with eigenvalue below
/// `1e-12 * lambda_max(M)` form its null space `Q_n`. Finite eigenvectors
/// may still have components there, so the reduction keeps them through
/// the Schur complement: with `x = Q_r x_r + Q_n x_n` the null-space block
/// gives `x_n = -A_nn^{-1} A_nr x_r`, and the range block becomes the
/// standard symmetric problem
/// `Lr^{-1/2} (A_rr - A_rn A_nn^{-1} A_nr) Lr^{-1/2}`.
pub fn dense_generalized_eig(a: &CsrMatrix, m: &CsrMatrix) -> Result<DenseEig> {
    let n = a.n_rows;
    if a.n_cols != n || m.n_rows != n || m.n_cols != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil shapes {}x{} and {}x{}",
            a.n_rows, a.n_cols, m.n_rows, m.n_cols
        )));
    }
    let ad = a.to_dense();
    let md = m.to_dense();
    let scale_a = ad.amax().max(1e-300);
    let scale_m = md.amax().max(1e-300);
    if symmetry_defect(&ad) > 1e-12 * scale_a {
        return Err(Error::Asymmetry(symmetry_defect(&ad) / scale_a));
    }
    if symmetry_defect(&md) > 1e-12 * scale_m {
        return Err(Error::Asymmetry(symmetry_defect(&md) / scale_m));
    }
    // Exact symmetrization before the eigensolve.
    let ad = (&ad + ad.transpose()) * 0.5;
    let md = (&md + md.transpose()) * 0.5;

    let m_eig = md.symmetric_eigen();
    let lambda_max = m_eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        // M = 0: every direction is an infinite eigenvalue.
        return Ok(DenseEig {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(n, 0),
            n_infinite: n,
        });
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| m_eig.eigenvalues[i] > 1e-12 * lambda_max)
        .collect();
    let null: Vec<usize> = (0..n)
        .filter(|&i| m_eig.eigenvalues[i] <= 1e-12 * lambda_max)
        .collect();
    let rank = keep.len();
    let n_null = null.len();
    let mut q_r = DMatrix::zeros(n, rank);
    for (c, &i) in keep.iter().enumerate() {
        q_r.set_column(c, &m_eig.eigenvectors.column(i));
    }
    let mut q_n = DMatrix::zeros(n, n_null);
    for (c, &i) in null.iter().enumerate() {
        q_n.set_column(c, &m_eig.eigenvectors.column(i));
    }
    let a_rr = q_r.transpose() * &ad * &q_r;
    // Schur-complement out the null-space block.
    let (s_schur, coupling) = if n_null > 0 {
        let a_nn = q_n.transpose() * &ad * &q_n;
        let a_nr = q_n.transpose() * &ad * &q_r;
        // A_nn^{-1} A_nr via a pivoted LU solve; reject near-singular
        // blocks by the spread of the U diagonal.
        let lu = a_nn.clone().lu();
        let u_diag: Vec<f64> = (0..n_null).map(|i| lu.u()[(i, i)].abs()).collect();
        let u_max = u_diag.iter().cloned().fold(0.0f64, f64::max);
        let singular = u_diag.iter().any(|&d| d <= 1e-12 * u_max.max(1e-300));
        let coupling = (!singular).then(|| lu.solve(&a_nr)).flatten();
        let Some(coupling) = coupling else {
            // x_n = -coupling * x_r would be undefined.
            return Err(Error::Eigensolver(
                "pencil is singular or defective: A restricted to null(M) \
                 is not invertible"
                    .into(),
            ));
        };
        let s = &a_rr - a_nr.transpose() * &coupling;
        (s, Some(coupling))
    } else {
        (a_rr, None)
    };
    // Scale by Lambda_r^{-1/2} to reach a standard symmetric problem.
    let mut lr_inv_sqrt = DMatrix::zeros(rank, rank);
    for (c, &i) in keep.iter().enumerate() {
        lr_inv_sqrt[(c, c)] = m_eig.eigenvalues[i].sqrt().recip();
    }
    let s_std = {
        let tmp = &lr_inv_sqrt * s_schur * &lr_inv_sqrt;
        (&tmp + tmp.transpose()) * 0.5
    };
    let s_eig = s_std.symmetric_eigen();
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&i, &j| {
        s_eig.eigenvalues[i]
            .partial_cmp(&s_eig.eigenvalues[j])
            .unwrap()
    });
    let mut eigenvalues = Vec::with_capacity(rank);
    let mut eigenvectors = DMatrix::zeros(n, rank);
    for (c, &i) in order.iter().enumerate() {
        eigenvalues.push(s_eig.eigenvalues[i]);
        // x_r in the M-eigenbasis, then back to nodal coordinates.
        let y: DVector<f64> = &lr_inv_sqrt * s_eig.eigenvectors.column(i);
        let mut x: DVector<f64> = &q_r * &y;
        if let Some(coupling) = &coupling {
            let x_n: DVector<f64> = coupling * &y;
            x -= &q_n * x_n;
        }
        eigenvectors.set_column(c, &x);
    }
    Ok(DenseEig {
        eigenvalues,
        eigenvectors,
        n_infinite: n_null,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CsrMatrix;

    fn from_dense(d: &DMatrix<f64>) -> CsrMatrix {
        let mut trips = Vec::new();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    trips.push((i, j, d[(i, j)]));
                }
            }
        }
        CsrMatrix::from_triplets(d.nrows(), d.ncols(), &mut trips)
    }

    #[test]
    fn diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0, 1.0]));
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.0]));
        let eig = dense_generalized_eig(&from_dense(&a), &from_dense(&m)).unwrap();
        assert_eq!(eig.n_infinite, 1);
        assert_eq!(eig.eigenvalues.len(), 2);
        assert!((eig.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_and_m_orthonormality() {
        // Structured symmetric pencil with PSD singular M.
        let n = 20;
        let mut a = DMatrix::zeros(n, n);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 + (i as f64 * 0.3).sin();
            if i + 1 < n {
                a[(i, i + 1)] = -0.7;
                a[(i + 1, i)] = -0.7;
            }
            // M singular: zero rows at multiples of 5.
            if i % 5 != 0 {
                m[(i, i)] = 1.0 + 0.1 * i as f64;
            }
        }
        let eig = dense_generalized_eig(&from_dense(&a), &from_dense(&m)).unwrap();
        assert_eq!(eig.n_infinite, 4);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let x = eig.eigenvectors.column(k);
            let r = &a * x - &m * x * lambda;
            assert!(r.amax() < 1e-10, "eigenpair {k}");
            let nrm = (x.transpose() * &m * x)[(0, 0)];
            assert!((nrm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        let m = DMatrix::identity(2, 2);
        assert!(matches!(
            dense_generalized_eig(&from_dense(&a), &from_dense(&m)),
            Err(Error::Asymmetry(_))
        ));
    }

    #[test]
    fn zero_m_all_infinite() {
        let a = DMatrix::identity(3, 3);
        let m: DMatrix<f64> = DMatrix::zeros(3, 3);
        let m_csr = CsrMatrix::from_triplets(3, 3, &mut vec![]);
        let _ = m;
        let eig = dense_generalized_eig(&from_dense(&a), &m_csr).unwrap();
        assert_eq!(eig.n_infinite, 3);
        assert!(eig.eigenvalues.is_empty());
    }
}
