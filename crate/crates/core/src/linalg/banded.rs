//! LU factorization of banded matrices with partial pivoting, in the
//! classic band storage layout (lower bandwidth `kl`, upper bandwidth `ku`,
//! `kl` extra superdiagonals of fill from pivoting).

use crate::assembly::CsrMatrix;
use crate::error::{Error, Result};

/// LU factors of a banded matrix, with row pivoting.
///
/// Entry `(i, j)` with `-(ku + kl) <= i - j <= kl` lives at
/// `band[j * ld + (i - j + ku + kl)]` where `ld = 2 * kl + ku + 1`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    band: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factor a sparse matrix, inferring the bandwidths from its pattern.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "banded LU needs a square matrix, got {}x{}",
                a.n_rows, a.n_cols
            )));
        }
        let n = a.n_rows;
        let mut kl = 0usize;
        let mut ku = 0usize;
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let ld = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * ld];
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                band[c * ld + (r + ku + kl - c)] = a.values[k];
            }
        }
        let pivot_floor = 1e-14 * a.max_abs();
        Self::factor_band(n, kl, ku, band, pivot_floor)
    }

    fn factor_band(
        n: usize,
        kl: usize,
        ku: usize,
        mut band: Vec<f64>,
        pivot_floor: f64,
    ) -> Result<Self> {
        let ld = 2 * kl + ku + 1;
        let width = ku + kl; // upper width after fill
        let at = |j: usize, i: usize| j * ld + (i + ku + kl - j);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            // Pivot among rows j..=j+kl, column j.
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = band[at(j, j)].abs();
            for i in (j + 1)..=i_max {
                let v = band[at(j, i)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor {
                return Err(Error::Singular(j));
            }
            ipiv[j] = p;
            if p != j {
                // Swap rows j and p across columns j..=j+width.
                let c_max = (j + width).min(n - 1);
                for c in j..=c_max {
                    band.swap(at(c, j), at(c, p));
                }
            }
            let pivot = band[at(j, j)];
            let c_max = (j + width).min(n - 1);
            for i in (j + 1)..=i_max {
                let l = band[at(j, i)] / pivot;
                band[at(j, i)] = l;
                if l != 0.0 {
                    for c in (j + 1)..=c_max {
                        band[at(c, i)] -= l * band[at(c, j)];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            band,
            ipiv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let ld = 2 * self.kl + self.ku + 1;
        let width = self.ku + self.kl;
        let at = |j: usize, i: usize| j * ld + (i + self.ku + self.kl - j);
        // Apply P and L.
        for j in 0..self.n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let i_max = (j + self.kl).min(self.n - 1);
            let bj = b[j];
            for i in (j + 1)..=i_max {
                b[i] -= self.band[at(j, i)] * bj;
            }
        }
        // Back-substitute U.
        for j in (0..self.n).rev() {
            let c_max = (j + width).min(self.n - 1);
            let mut s = b[j];
            for c in (j + 1)..=c_max {
                s -= self.band[at(c, j)] * b[c];
            }
            b[j] = s / self.band[at(j, j)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve `A^T x = b` in place, reusing the factors of `A`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let ld = 2 * self.kl + self.ku + 1;
        let width = self.ku + self.kl;
        let at = |j: usize, i: usize| j * ld + (i + self.ku + self.kl - j);
        // Forward-substitute U^T.
        for j in 0..self.n {
            let mut s = b[j];
            let c_min = j.saturating_sub(width);
            for c in c_min..j {
                s -= self.band[at(j, c)] * b[c];
            }
            b[j] = s / self.band[at(j, j)];
        }
        // Apply L^T and the pivots in reverse.
        for j in (0..self.n).rev() {
            let i_max = (j + self.kl).min(self.n - 1);
            let mut s = b[j];
            for i in (j + 1)..=i_max {
                s -= self.band[at(j, i)] * b[i];
            }
            b[j] = s;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        x
    }
}
