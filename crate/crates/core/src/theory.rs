//! Explicit convergence-theory constants, a discrete adjoint-stability
//! surrogate, and randomized field-of-values probes for the preconditioned
//! operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::CsrMatrix;
use crate::coeffs::ProblemCoefficients;
use crate::decomp::DomainDecomposition;
use crate::error::Result;
use crate::grid::Mesh;
use crate::linalg::BandedLu;
use crate::precond::Preconditioner;

/// All constants entering the convergence bounds. `c0_coeff`, `c1_coeff`,
/// `c2_coeff` are the problem-data constants; `c1_bound` and `c2_bound`
/// are the field-of-values lower/upper constants of the main theorem.
#[derive(Debug, Clone)]
pub struct TheoryConstants {
    pub c0_coeff: f64,
    pub c1_coeff: f64,
    pub c2_coeff: f64,
    pub k0: usize,
    pub theta: f64,
    /// Domain-size parameter: largest subdomain diameter.
    pub h_max: f64,
    /// `beta0 = 2 sqrt(1 + k0^2 * theta)`.
    pub beta0: f64,
    pub cstab_star: f64,
    pub s: f64,
    pub t: f64,
    pub c1_bound: f64,
    pub c2_bound: f64,
    pub s_below_one: bool,
    pub t_below_one: bool,
    /// `1 - c1^2/c2^2`; the squared per-step residual contraction factor.
    pub elman_factor: f64,
}

impl TheoryConstants {
    pub fn conditions_met(&self) -> bool {
        self.s_below_one && self.t_below_one
    }

    pub fn write_report<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "C0 = {:.6e}", self.c0_coeff)?;
        writeln!(w, "C1 = {:.6e}", self.c1_coeff)?;
        writeln!(w, "C2 = {:.6e}", self.c2_coeff)?;
        writeln!(w, "k0 = {}", self.k0)?;
        writeln!(w, "Theta = {:.6e}", self.theta)?;
        writeln!(w, "H = {:.6e}", self.h_max)?;
        writeln!(w, "beta0 = {:.6e}", self.beta0)?;
        writeln!(w, "Cstab_star = {:.6e}", self.cstab_star)?;
        writeln!(w, "s = {:.6e}", self.s)?;
        writeln!(w, "t = {:.6e}", self.t)?;
        writeln!(w, "c1 = {:.6e}", self.c1_bound)?;
        writeln!(w, "c2 = {:.6e}", self.c2_bound)?;
        writeln!(w, "s_below_one = {}", self.s_below_one)?;
        writeln!(w, "t_below_one = {}", self.t_below_one)?;
        writeln!(w, "elman_factor = {:.6e}", self.elman_factor)
    }
}

pub fn beta0(z: f64) -> f64 {
    2.0 * (1.0 + z * z).sqrt()
}

/// Assemble the constants from already-reduced scalar inputs. All sup/inf
/// values are over element barycenters.
#[allow(clippy::too_many_arguments)]
pub fn constants_from_raw(
    b_sup: f64,
    div_b_sup: f64,
    c_minus_sup: f64,
    c_minus_inf: f64,
    k0: usize,
    theta: f64,
    cstab_star: f64,
    h_max: f64,
) -> TheoryConstants {
    let c0_coeff = (0.5 * b_sup * b_sup + (-c_minus_inf).max(0.0)).sqrt();
    let c1_coeff = 1.0 + b_sup + c_minus_sup;
    let c2_coeff = 1.0 + b_sup + div_b_sup + c_minus_sup;
    let k0f = k0 as f64;
    let b0 = beta0(k0f * theta.sqrt());
    let s = 2.0 * 2.0_f64.sqrt()
        * (1.0 + cstab_star)
        * c1_coeff
        * c2_coeff
        * k0f.powf(1.5)
        * b0
        * b0
        * theta.sqrt();
    let t = 16.0 * h_max * c1_coeff * k0f * b0 * b0;
    let c1_bound = (1.0 - t.max(s)) / (b0 * b0);
    let c2_bound = 12.0 + 32.0 * k0f * k0f;
    TheoryConstants {
        c0_coeff,
        c1_coeff,
        c2_coeff,
        k0,
        theta,
        h_max,
        beta0: b0,
        cstab_star,
        s,
        t,
        c1_bound,
        c2_bound,
        s_below_one: s < 1.0,
        t_below_one: t < 1.0,
        elman_factor: 1.0 - (c1_bound / c2_bound) * (c1_bound / c2_bound),
    }
}

/// Evaluate the data norms over element barycenters and combine them with
/// the decomposition parameters.
pub fn compute_constants(
    mesh: &Mesh,
    coeffs: &ProblemCoefficients,
    decomp: &DomainDecomposition,
    theta: f64,
    cstab_star: f64,
) -> TheoryConstants {
    let mut b_sup: f64 = 0.0;
    let mut div_sup: f64 = 0.0;
    let mut c_sup: f64 = 0.0;
    let mut c_inf = f64::INFINITY;
    for e in 0..mesh.n_elements() {
        let (x, y) = mesh.element_barycenter(e);
        let (bx, by) = coeffs.b.eval(x, y);
        b_sup = b_sup.max((bx * bx + by * by).sqrt());
        div_sup = div_sup.max(coeffs.b.div(x, y).abs());
        let c = coeffs.c_minus.eval(x, y);
        c_sup = c_sup.max(c.abs());
        c_inf = c_inf.min(c);
    }
    constants_from_raw(
        b_sup,
        div_sup,
        c_sup,
        c_inf,
        decomp.k0,
        theta,
        cstab_star,
        decomp.max_subdomain_diameter(mesh),
    )
}

/// Discrete adjoint-stability surrogate: the largest value of
/// `||w||_A / ||f||_Mass` over `f != 0`, where `B^T w = Mass f`.
/// Estimated by power iteration on `f <- B^{-1} A B^{-T} Mass f`.
pub fn estimate_cstab_star(b: &CsrMatrix, a: &CsrMatrix, mass: &CsrMatrix) -> Result<f64> {
    let lu = BandedLu::factor(b)?;
    let n = b.n_rows;
    let mut f: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
    let mut sigma2_prev = 0.0;
    let mut sigma2 = 0.0;
    for _ in 0..20 {
        let mf = mass.matvec(&f);
        let norm2: f64 = f.iter().zip(&mf).map(|(x, y)| x * y).sum();
        let inv_norm = norm2.sqrt().recip();
        let mut w = mf.clone();
        lu.solve_transpose_in_place(&mut w);
        let aw = a.matvec(&w);
        sigma2 = w.iter().zip(&aw).map(|(x, y)| x * y).sum::<f64>() / norm2;
        let mut next = aw;
        lu.solve_in_place(&mut next);
        for x in next.iter_mut() {
            *x *= inv_norm * inv_norm;
        }
        f = next;
        if (sigma2 - sigma2_prev).abs() <= 1e-4 * sigma2.abs() {
            break;
        }
        sigma2_prev = sigma2;
    }
    Ok(sigma2.max(0.0).sqrt())
}

/// Over `n_samples` random vectors `u`, with `T u = M^{-1} B u`, return the
/// minimum of `a(Tu, u)/a(u, u)` and the maximum of
/// `sqrt(a(Tu, Tu)/a(u, u))`.
pub fn probe_field_of_values(
    precond: &Preconditioner,
    a: &CsrMatrix,
    n_samples: usize,
    seed: u64,
) -> (f64, f64) {
    let n = a.n_rows;
    let results: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let auu = a.bilinear(&u, &u);
            let tu = precond.operator_t_action(&u);
            let lower = a.bilinear(&tu, &u) / auu;
            let upper = (a.bilinear(&tu, &tu) / auu).sqrt();
            (lower, upper)
        })
        .collect();
    results.into_iter().fold(
        (f64::INFINITY, 0.0_f64),
        |(lo, hi), (l, u)| (lo.min(l), hi.max(u)),
    )
}
