//! One- and two-level additive Schwarz preconditioners and the restricted
//! (POU-weighted) variant with balancing deflation. Local solves live on
//! each subdomain's internal dofs; the coarse solve uses the spectral
//! coarse space.

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;

use crate::assembly::CsrMatrix;
use crate::decomp::DomainDecomposition;
use crate::error::{Error, Result};
use crate::geneo::CoarseSpace;
use crate::linalg::BandedLu;

/// Preconditioner flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// One-level additive Schwarz.
    As1,
    /// Two-level additive Schwarz with a coarse solve.
    As2,
    /// POU-weighted restricted Schwarz combined with balancing deflation.
    RasDeflation,
}

struct LocalBlock {
    /// Global indices of the internal dofs (the block's rows/columns).
    dofs: Vec<usize>,
    /// POU weights aligned with `dofs` (used by the restricted variant).
    weights: Vec<f64>,
    lu: BandedLu,
}

struct CoarseSolve {
    /// Coarse columns as global sparse vectors.
    cols: Vec<Vec<(usize, f64)>>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CoarseSolve {
    fn project(&self, r: &[f64]) -> DVector<f64> {
        let rhs: Vec<f64> = self
            .cols
            .iter()
            .map(|col| col.iter().map(|&(g, v)| v * r[g]).sum())
            .collect();
        self.lu
            .solve(&DVector::from_vec(rhs))
            .expect("coarse matrix factorization was verified at build time")
    }

    /// `Z B0^{-1} Z^T r`.
    fn apply(&self, r: &[f64], n: usize) -> Vec<f64> {
        let y = self.project(r);
        let mut out = vec![0.0; n];
        for (col, &c) in self.cols.iter().zip(y.iter()) {
            for &(g, v) in col {
                out[g] += c * v;
            }
        }
        out
    }
}

/// An additive Schwarz preconditioner, immutable after build.
pub struct Preconditioner {
    pub variant: Variant,
    n: usize,
    blocks: Vec<LocalBlock>,
    coarse: Option<CoarseSolve>,
    /// The global matrix, kept for the deflation and operator probes.
    b: CsrMatrix,
}

impl Preconditioner {
    /// Factor all local blocks (principal submatrices of `B` on each
    /// subdomain's internal dofs) and, when the variant uses it, the
    /// coarse matrix `Z^T B Z`.
    pub fn build(
        b: &CsrMatrix,
        decomp: &DomainDecomposition,
        coarse: Option<&CoarseSpace>,
        variant: Variant,
    ) -> Result<Self> {
        let n = b.n_rows;
        if variant != Variant::As1 && coarse.is_none() {
            return Err(Error::Config(
                "two-level variants need a coarse space".into(),
            ));
        }
        let blocks: Vec<LocalBlock> = decomp
            .subdomains
            .par_iter()
            .map(|sd| {
                let dofs = sd.internal_dofs_global();
                let weights: Vec<f64> = sd
                    .all_dofs
                    .iter()
                    .zip(&sd.internal)
                    .zip(&sd.weights)
                    .filter(|((_, &int), _)| int)
                    .map(|((_, _), &w)| w)
                    .collect();
                let b_i = b.principal_submatrix(&dofs);
                let lu = BandedLu::factor(&b_i).map_err(|e| Error::PrecondBuild {
                    block: format!("subdomain {}", sd.id),
                    message: e.to_string(),
                })?;
                Ok(LocalBlock { dofs, weights, lu })
            })
            .collect::<Result<Vec<_>>>()?;
        let coarse = match coarse {
            Some(cs) if cs.size() > 0 => {
                let cols: Vec<Vec<(usize, f64)>> = cs.columns(decomp).collect();
                let b0 = cs.galerkin(decomp, b);
                let lu = lu_checked(b0).map_err(|e| Error::PrecondBuild {
                    block: "coarse".into(),
                    message: e,
                })?;
                Some(CoarseSolve { cols, lu })
            }
            _ => None,
        };
        Ok(Preconditioner {
            variant,
            n,
            blocks,
            coarse,
            b: b.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coarse space size actually carried by this preconditioner.
    pub fn coarse_size(&self) -> usize {
        self.coarse.as_ref().map_or(0, |c| c.cols.len())
    }

    /// Apply `M^{-1}` to a residual.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n);
        match self.variant {
            Variant::As1 | Variant::As2 => {
                let mut z = self.local_sum(r, false);
                if self.variant == Variant::As2 {
                    if let Some(coarse) = &self.coarse {
                        let zc = coarse.apply(r, self.n);
                        for (zi, ci) in z.iter_mut().zip(&zc) {
                            *zi += ci;
                        }
                    }
                }
                z
            }
            Variant::RasDeflation => {
                // Balancing form: coarse correction first, restricted
                // Schwarz on the deflated residual.
                let mut z = match &self.coarse {
                    Some(coarse) => coarse.apply(r, self.n),
                    None => vec![0.0; self.n],
                };
                let bz = self.b.matvec(&z);
                let deflated: Vec<f64> = r.iter().zip(&bz).map(|(ri, bi)| ri - bi).collect();
                let local = self.local_sum(&deflated, true);
                for (zi, li) in z.iter_mut().zip(&local) {
                    *zi += li;
                }
                z
            }
        }
    }

    /// `sum_i R_i^T (D_i) B_i^{-1} R_i r`, with the POU diagonal only for
    /// the restricted variant.
    fn local_sum(&self, r: &[f64], weighted: bool) -> Vec<f64> {
        let locals: Vec<Vec<f64>> = self
            .blocks
            .par_iter()
            .map(|blk| {
                let mut x: Vec<f64> = blk.dofs.iter().map(|&g| r[g]).collect();
                blk.lu.solve_in_place(&mut x);
                if weighted {
                    for (xi, &w) in x.iter_mut().zip(&blk.weights) {
                        *xi *= w;
                    }
                }
                x
            })
            .collect();
        // Deterministic ordered reduction.
        let mut z = vec![0.0; self.n];
        for (blk, x) in self.blocks.iter().zip(&locals) {
            for (&g, &v) in blk.dofs.iter().zip(x) {
                z[g] += v;
            }
        }
        z
    }

    /// The preconditioned operator action `M^{-1} B u` (the matrix
    /// realization of the additive Schwarz operator in the energy inner
    /// product).
    pub fn operator_t_action(&self, u: &[f64]) -> Vec<f64> {
        self.apply(&self.b.matvec(u))
    }

    /// Access to the matrix the preconditioner was built for.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.b
    }
}

fn lu_checked(m: DMatrix<f64>) -> std::result::Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>, String> {
    let scale = m.amax();
    let lu = m.lu();
    let d = lu.u().diagonal();
    for i in 0..d.len() {
        if d[i].abs() <= 1e-14 * scale.max(1e-300) {
            return Err(format!("singular at pivot {i}"));
        }
    }
    Ok(lu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_a, assemble_b, assemble_local_neumann};
    use crate::coeffs::{ProblemCoefficients, ScalarField, VectorField};
    use crate::decomp::{extend_overlap, partition_square, OverlapMode};
    use crate::geneo::{build_geneo, CoarseVariant};
    use crate::grid::{build_uniform_mesh, Mesh, Rectangle};
    use crate::linalg::LanczosOptions;

    fn poisson() -> ProblemCoefficients {
        ProblemCoefficients {
            a: ScalarField::Constant(1.0),
            b: VectorField::Zero,
            c_plus: ScalarField::Constant(0.0),
            c_minus: ScalarField::Constant(0.0),
        }
    }

    fn setup(
        nx: usize,
        n_sub: usize,
        coeffs: &ProblemCoefficients,
    ) -> (Mesh, DomainDecomposition, CsrMatrix, CoarseSpace) {
        let mesh = build_uniform_mesh(Rectangle::unit_square(), nx, nx).unwrap();
        let p = partition_square(&mesh, n_sub).unwrap();
        let decomp = extend_overlap(&mesh, p, OverlapMode::Minimal { layers: 1 }).unwrap();
        let b = assemble_b(&mesh, coeffs);
        let local_a: Vec<CsrMatrix> = decomp
            .subdomains
            .iter()
            .map(|sd| assemble_local_neumann(&mesh, coeffs, sd).unwrap().0)
            .collect();
        let cs = build_geneo(&decomp, &local_a, 0.5, &LanczosOptions::default()).unwrap();
        (mesh, decomp, b, cs)
    }

    #[test]
    fn single_subdomain_is_exact_inverse() {
        let coeffs = poisson();
        let (mesh, decomp, b, _) = setup(8, 1, &coeffs);
        let m = Preconditioner::build(&b, &decomp, None, Variant::As1).unwrap();
        let n = mesh.n_free_dofs();
        let r: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let z = m.apply(&r);
        let bz = b.matvec(&z);
        let worst = bz
            .iter()
            .zip(&r)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn as2_with_empty_coarse_equals_as1() {
        let coeffs = poisson();
        let (mesh, decomp, b, cs) = setup(8, 1, &coeffs);
        assert_eq!(cs.size(), 0);
        let m1 = Preconditioner::build(&b, &decomp, None, Variant::As1).unwrap();
        let m2 = Preconditioner::build(&b, &decomp, Some(&cs), Variant::As2).unwrap();
        let n = mesh.n_free_dofs();
        let r: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        assert_eq!(m1.apply(&r), m2.apply(&r));
    }

    #[test]
    fn zero_residual_maps_to_zero() {
        let coeffs = poisson();
        let (_mesh, decomp, b, cs) = setup(12, 4, &coeffs);
        for variant in [Variant::As1, Variant::As2, Variant::RasDeflation] {
            let m = Preconditioner::build(&b, &decomp, Some(&cs), variant).unwrap();
            let z = m.apply(&vec![0.0; b.n_rows]);
            assert!(z.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn apply_is_linear() {
        let coeffs = poisson();
        let (_mesh, decomp, b, cs) = setup(12, 4, &coeffs);
        let n = b.n_rows;
        let r: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).sin()).collect();
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.07).cos()).collect();
        let alpha = 2.75;
        for variant in [Variant::As1, Variant::As2, Variant::RasDeflation] {
            let m = Preconditioner::build(&b, &decomp, Some(&cs), variant).unwrap();
            let combined: Vec<f64> = r.iter().zip(&s).map(|(x, y)| alpha * x + y).collect();
            let z1 = m.apply(&combined);
            let zr = m.apply(&r);
            let zs = m.apply(&s);
            let scale = z1.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..n {
                assert!((z1[i] - (alpha * zr[i] + zs[i])).abs() < 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn as2_matches_dense_oracle() {
        let coeffs = poisson();
        let (mesh, decomp, b, cs) = setup(10, 4, &coeffs);
        assert_eq!(cs.variant, CoarseVariant::Geneo);
        let m = Preconditioner::build(&b, &decomp, Some(&cs), Variant::As2).unwrap();
        let n = mesh.n_free_dofs();
        // Dense reference: sum of R_i^T B_i^{-1} R_i plus Z B0^{-1} Z^T.
        let bd = b.to_dense();
        let mut md = DMatrix::<f64>::zeros(n, n);
        for sd in &decomp.subdomains {
            let dofs = sd.internal_dofs_global();
            let k = dofs.len();
            let mut bi = DMatrix::zeros(k, k);
            for (p, &gp) in dofs.iter().enumerate() {
                for (q, &gq) in dofs.iter().enumerate() {
                    bi[(p, q)] = bd[(gp, gq)];
                }
            }
            let bi_inv = bi.try_inverse().unwrap();
            for (p, &gp) in dofs.iter().enumerate() {
                for (q, &gq) in dofs.iter().enumerate() {
                    md[(gp, gq)] += bi_inv[(p, q)];
                }
            }
        }
        if cs.size() > 0 {
            let cols: Vec<Vec<(usize, f64)>> = cs.columns(&decomp).collect();
            let mut z = DMatrix::zeros(n, cols.len());
            for (c, col) in cols.iter().enumerate() {
                for &(g, v) in col {
                    z[(g, c)] = v;
                }
            }
            let b0 = z.transpose() * &bd * &z;
            let b0_inv = b0.try_inverse().unwrap();
            md += &z * b0_inv * z.transpose();
        }
        let r: Vec<f64> = (0..n).map(|i| ((i % 13) as f64) - 6.0).collect();
        let z = m.apply(&r);
        let z_ref = &md * DVector::from_column_slice(&r);
        for i in 0..n {
            assert!((z[i] - z_ref[i]).abs() < 1e-10 * z_ref.amax().max(1.0));
        }
    }

    #[test]
    fn ras_pou_rows_sum_to_identity_for_identity_matrix() {
        // With B = I, the weighted local solves reduce to the POU itself.
        let coeffs = poisson();
        let (mesh, decomp, _b, _cs) = setup(8, 4, &coeffs);
        let n = mesh.n_free_dofs();
        let eye = {
            let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
            CsrMatrix::from_triplets(n, n, &mut t)
        };
        // Empty coarse space so only the weighted local part acts.
        let m = Preconditioner {
            variant: Variant::RasDeflation,
            n,
            blocks: decomp
                .subdomains
                .iter()
                .map(|sd| {
                    let dofs = sd.internal_dofs_global();
                    let weights: Vec<f64> = sd
                        .all_dofs
                        .iter()
                        .zip(&sd.internal)
                        .zip(&sd.weights)
                        .filter(|((_, &int), _)| int)
                        .map(|((_, _), &w)| w)
                        .collect();
                    let b_i = eye.principal_submatrix(&dofs);
                    LocalBlock {
                        dofs,
                        weights,
                        lu: BandedLu::factor(&b_i).unwrap(),
                    }
                })
                .collect(),
            coarse: None,
            b: eye,
        };
        let r: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let z = m.apply(&r);
        for i in 0..n {
            assert!((z[i] - r[i]).abs() < 1e-13 * r[i].abs());
        }
    }

    #[test]
    fn spd_operator_is_a_selfadjoint() {
        let coeffs = poisson();
        let (mesh, decomp, b, cs) = setup(12, 4, &coeffs);
        let a = assemble_a(&mesh, &coeffs);
        let m = Preconditioner::build(&b, &decomp, Some(&cs), Variant::As2).unwrap();
        let n = mesh.n_free_dofs();
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.21).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).cos()).collect();
        let tu = m.operator_t_action(&u);
        let tv = m.operator_t_action(&v);
        let lhs = a.bilinear(&tu, &v);
        let rhs = a.bilinear(&u, &tv);
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn t_action_matches_per_subdomain_solves() {
        // Dual path: T u assembled from per-subdomain solves
        // B_i (T_i u) = R_i B u plus the coarse term, versus apply(B u).
        let coeffs = ProblemCoefficients {
            a: ScalarField::Constant(1.0),
            b: VectorField::UnidirectionalZeroDiv { b: 5.0 },
            c_plus: ScalarField::Constant(0.0),
            c_minus: ScalarField::Constant(-10.0),
        };
        let mesh = build_uniform_mesh(Rectangle::unit_square(), 12, 12).unwrap();
        let p = partition_square(&mesh, 4).unwrap();
        let decomp = extend_overlap(&mesh, p, OverlapMode::Minimal { layers: 1 }).unwrap();
        let b = assemble_b(&mesh, &coeffs);
        let local_a: Vec<CsrMatrix> = decomp
            .subdomains
            .iter()
            .map(|sd| assemble_local_neumann(&mesh, &coeffs, sd).unwrap().0)
            .collect();
        let cs = build_geneo(&decomp, &local_a, 0.5, &LanczosOptions::default()).unwrap();
        let m = Preconditioner::build(&b, &decomp, Some(&cs), Variant::As2).unwrap();
        let n = mesh.n_free_dofs();
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.17).sin()).collect();
        let fast = m.operator_t_action(&u);
        // Independent assembly.
        let bu = b.matvec(&u);
        let mut slow = vec![0.0; n];
        for sd in &decomp.subdomains {
            let dofs = sd.internal_dofs_global();
            let b_i = b.principal_submatrix(&dofs);
            let lu = BandedLu::factor(&b_i).unwrap();
            let mut x: Vec<f64> = dofs.iter().map(|&g| bu[g]).collect();
            lu.solve_in_place(&mut x);
            for (&g, &v) in dofs.iter().zip(&x) {
                slow[g] += v;
            }
        }
        if cs.size() > 0 {
            let b0 = cs.galerkin(&decomp, &b);
            let rhs = DVector::from_vec(cs.apply_transpose(&decomp, &bu));
            let y = b0.lu().solve(&rhs).unwrap();
            let zc = cs.apply(&decomp, y.as_slice());
            for (s, c) in slow.iter_mut().zip(&zc) {
                *s += c;
            }
        }
        let scale = fast.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..n {
            assert!((fast[i] - slow[i]).abs() < 1e-10 * scale.max(1.0));
        }
    }
}
