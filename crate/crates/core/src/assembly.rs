//! P1 finite-element assembly: the nonsymmetric system matrix `B`, the SPD
//! energy matrix `A`, mass matrices, local Neumann matrices on subdomains,
//! and the point-source load vector.
//!
//! Coefficients are sampled at element barycenters and treated as
//! elementwise constants, which the exact P1 formulas below integrate
//! exactly.

use crate::coeffs::ProblemCoefficients;
use crate::decomp::Subdomain;
use crate::error::{Error, Result};
use crate::grid::{centre_node, Mesh};

/// Compressed-row sparse matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &mut Vec<(usize, usize, f64)>,
    ) -> CsrMatrix {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
            row_ptr[r + 1] = col_idx.len();
        }
        // Carry offsets across empty rows.
        for r in 0..n_rows {
            row_ptr[r + 1] = row_ptr[r + 1].max(row_ptr[r]);
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    /// y = A^T x.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            let xr = x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n_rows {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            s += x[r] * row;
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - A^T| over all entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Entrywise A + alpha * B over the union pattern.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.col_idx[k], self.values[k]));
            }
            for k in other.row_ptr[r]..other.row_ptr[r + 1] {
                triplets.push((r, other.col_idx[k], alpha * other.values[k]));
            }
        }
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, &mut triplets)
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, indices: &[usize]) -> CsrMatrix {
        let mut inv = std::collections::HashMap::with_capacity(indices.len());
        for (local, &g) in indices.iter().enumerate() {
            inv.insert(g, local);
        }
        let mut triplets = Vec::new();
        for (li, &g) in indices.iter().enumerate() {
            for k in self.row_ptr[g]..self.row_ptr[g + 1] {
                if let Some(&lj) = inv.get(&self.col_idx[k]) {
                    triplets.push((li, lj, self.values[k]));
                }
            }
        }
        CsrMatrix::from_triplets(indices.len(), indices.len(), &mut triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// Matrix Market coordinate text export (17 significant digits).
    pub fn write_matrix_market<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(w, "{} {} {:.16e}", r + 1, self.col_idx[k] + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}

/// Load vector over free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector {
    pub values: Vec<f64>,
}

/// Gradients of the three P1 basis functions on a triangle, and its area.
fn p1_gradients(coords: &[(f64, f64); 3]) -> ([f64; 3], [f64; 3], f64) {
    let (x0, y0) = coords[0];
    let (x1, y1) = coords[1];
    let (x2, y2) = coords[2];
    let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let area = 0.5 * det;
    let gx = [(y1 - y2) / det, (y2 - y0) / det, (y0 - y1) / det];
    let gy = [(x2 - x1) / det, (x0 - x2) / det, (x1 - x0) / det];
    (gx, gy, area)
}

/// 3x3 element matrix of the full nonsymmetric form
/// `a_e grad.grad + conv_e + (c_e) mass` with elementwise-constant data.
/// Entry (i, j) tests basis j against basis i.
fn element_matrix(
    coords: &[(f64, f64); 3],
    a_e: f64,
    b_e: (f64, f64),
    c_e: f64,
) -> [[f64; 3]; 3] {
    let (gx, gy, area) = p1_gradients(coords);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let stiff = a_e * area * (gx[i] * gx[j] + gy[i] * gy[j]);
            // (b_e . grad phi_j) is constant; integral of phi_i is area/3.
            let conv = (b_e.0 * gx[j] + b_e.1 * gy[j]) * area / 3.0;
            let mass = c_e * area / 12.0 * if i == j { 2.0 } else { 1.0 };
            m[i][j] = stiff + conv + mass;
        }
    }
    m
}

fn assemble_over_free_dofs<F>(mesh: &Mesh, mut element_data: F) -> CsrMatrix
where
    F: FnMut(usize) -> (f64, (f64, f64), f64),
{
    let n = mesh.n_free_dofs();
    let mut triplets = Vec::with_capacity(9 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        let coords = [
            mesh.node_coords(nodes[0]),
            mesh.node_coords(nodes[1]),
            mesh.node_coords(nodes[2]),
        ];
        let (a_e, b_e, c_e) = element_data(e);
        let m = element_matrix(&coords, a_e, b_e, c_e);
        for i in 0..3 {
            let Some(gi) = mesh.free_dofs[nodes[i]] else {
                continue;
            };
            for j in 0..3 {
                let Some(gj) = mesh.free_dofs[nodes[j]] else {
                    continue;
                };
                triplets.push((gi, gj, m[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &mut triplets)
}

/// Assemble the full nonsymmetric system matrix
/// `B_ij = b(phi_j, phi_i)` with `b(u,v) = (A grad u, grad v) + (b.grad u, v) + (c u, v)`
/// and `c = c+ + c-`, over free dofs.
pub fn assemble_b(mesh: &Mesh, coeffs: &ProblemCoefficients) -> CsrMatrix {
    assemble_over_free_dofs(mesh, |e| {
        let (x, y) = mesh.element_barycenter(e);
        (
            coeffs.a.eval(x, y),
            coeffs.b.eval(x, y),
            coeffs.c_plus.eval(x, y) + coeffs.c_minus.eval(x, y),
        )
    })
}

/// Assemble the SPD energy matrix `A_ij = a(phi_j, phi_i)` with
/// `a(u,v) = (A grad u, grad v) + (c+ u, v)`.
pub fn assemble_a(mesh: &Mesh, coeffs: &ProblemCoefficients) -> CsrMatrix {
    assemble_over_free_dofs(mesh, |e| {
        let (x, y) = mesh.element_barycenter(e);
        (coeffs.a.eval(x, y), (0.0, 0.0), coeffs.c_plus.eval(x, y))
    })
}

/// Plain mass matrix (unit coefficient) over free dofs.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_over_free_dofs(mesh, |_| (0.0, (0.0, 0.0), 1.0))
}

/// Convection part `N_ij = (b . grad phi_j, phi_i)` alone.
pub fn assemble_convection(mesh: &Mesh, coeffs: &ProblemCoefficients) -> CsrMatrix {
    assemble_over_free_dofs(mesh, |e| {
        let (x, y) = mesh.element_barycenter(e);
        (0.0, coeffs.b.eval(x, y), 0.0)
    })
}

/// Mass matrix weighted by an elementwise-sampled coefficient.
pub fn assemble_weighted_mass<F: Fn(f64, f64) -> f64>(mesh: &Mesh, c: F) -> CsrMatrix {
    assemble_over_free_dofs(mesh, |e| {
        let (x, y) = mesh.element_barycenter(e);
        (0.0, (0.0, 0.0), c(x, y))
    })
}

/// Assemble the local Neumann pair `(A_j, B_j)` over a subdomain's full dof
/// set, using only the subdomain's elements (natural boundary condition on
/// the internal boundary; global Dirichlet dofs remain excluded).
pub fn assemble_local_neumann(
    mesh: &Mesh,
    coeffs: &ProblemCoefficients,
    subdomain: &Subdomain,
) -> Result<(CsrMatrix, CsrMatrix)> {
    if subdomain.elements.is_empty() {
        return Err(Error::EmptySubdomain(subdomain.id));
    }
    let n = subdomain.all_dofs.len();
    let mut trip_a = Vec::with_capacity(9 * subdomain.elements.len());
    let mut trip_b = Vec::with_capacity(9 * subdomain.elements.len());
    for &e in &subdomain.elements {
        let nodes = mesh.element_nodes(e);
        let coords = [
            mesh.node_coords(nodes[0]),
            mesh.node_coords(nodes[1]),
            mesh.node_coords(nodes[2]),
        ];
        let (x, y) = mesh.element_barycenter(e);
        let a_e = coeffs.a.eval(x, y);
        let cp = coeffs.c_plus.eval(x, y);
        let cm = coeffs.c_minus.eval(x, y);
        let ma = element_matrix(&coords, a_e, (0.0, 0.0), cp);
        let mb = element_matrix(&coords, a_e, coeffs.b.eval(x, y), cp + cm);
        for i in 0..3 {
            let Some(gi) = mesh.free_dofs[nodes[i]] else {
                continue;
            };
            let Some(&li) = subdomain.global_to_local.get(&gi) else {
                continue;
            };
            for j in 0..3 {
                let Some(gj) = mesh.free_dofs[nodes[j]] else {
                    continue;
                };
                let Some(&lj) = subdomain.global_to_local.get(&gj) else {
                    continue;
                };
                trip_a.push((li, lj, ma[i][j]));
                trip_b.push((li, lj, mb[i][j]));
            }
        }
    }
    Ok((
        CsrMatrix::from_triplets(n, n, &mut trip_a),
        CsrMatrix::from_triplets(n, n, &mut trip_b),
    ))
}

/// Unit nodal load at the free dof nearest the domain centre.
pub fn point_source_rhs(mesh: &Mesh) -> Result<LoadVector> {
    let centre = centre_node(mesh)?;
    let mut values = vec![0.0; mesh.n_free_dofs()];
    values[centre] = 1.0;
    Ok(LoadVector { values })
}
