//! Coefficient fields for the benchmark problems: diffusion `a(x)`,
//! convection `b(x)` with analytic divergence, and the reaction split
//! `c = c+ + c-`.

use crate::error::{Error, Result};

/// Scalar coefficient field, evaluated pointwise.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    /// "Inclusions and channels" heterogeneous diffusion coefficient:
    /// background 1, twenty-five graded square inclusions, and two
    /// quadrilateral channels drawn on top.
    InclusionsChannels { a_max: f64 },
    /// Pointwise non-negative part of a field.
    PosPart(Box<ScalarField>),
    /// Pointwise difference of two fields.
    Difference(Box<ScalarField>, Box<ScalarField>),
}

impl ScalarField {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::InclusionsChannels { a_max } => inclusions_channels_value(*a_max, x, y),
            ScalarField::PosPart(f) => f.eval(x, y).max(0.0),
            ScalarField::Difference(f, g) => f.eval(x, y) - g.eval(x, y),
        }
    }
}

/// Convection field with its exact analytic divergence.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Zero,
    /// Spatially constant field, divergence-free.
    Constant { bx: f64, by: f64 },
    /// `b (1+sin(2pi(2y-x))) (2,1)^T`, divergence-free.
    UnidirectionalZeroDiv { b: f64 },
    /// `b (1+sin(2pi(2x+y))) (2,1)^T`, divergence `10 pi b cos(2pi(2x+y))`.
    UnidirectionalNonzeroDiv { b: f64 },
    /// `b (2y(1-x^2), -2x(1-y^2))^T`, divergence-free.
    Circulating { b: f64 },
    /// Circulating field modulated by `sin(n pi (1-x^2)(1-y^2))`;
    /// still divergence-free for every `n`.
    CirculatingRadial { b: f64, n: u32 },
    /// `b (1+sin(m pi (2x+y))) (1+sin(2pi(2y-x))) (2,1)^T`; the `m` term
    /// oscillates along characteristics and drives the divergence.
    UnidirectionalOscillating { b: f64, m: u32 },
}

impl VectorField {
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        use std::f64::consts::PI;
        match self {
            VectorField::Zero => (0.0, 0.0),
            VectorField::Constant { bx, by } => (*bx, *by),
            VectorField::UnidirectionalZeroDiv { b } => {
                let s = b * (1.0 + (2.0 * PI * (2.0 * y - x)).sin());
                (2.0 * s, s)
            }
            VectorField::UnidirectionalNonzeroDiv { b } => {
                let s = b * (1.0 + (2.0 * PI * (2.0 * x + y)).sin());
                (2.0 * s, s)
            }
            VectorField::Circulating { b } => {
                (b * 2.0 * y * (1.0 - x * x), -b * 2.0 * x * (1.0 - y * y))
            }
            VectorField::CirculatingRadial { b, n } => {
                let s = (*n as f64 * PI * (1.0 - x * x) * (1.0 - y * y)).sin();
                (
                    b * s * 2.0 * y * (1.0 - x * x),
                    -b * s * 2.0 * x * (1.0 - y * y),
                )
            }
            VectorField::UnidirectionalOscillating { b, m } => {
                let f = 1.0 + (*m as f64 * PI * (2.0 * x + y)).sin();
                let g = 1.0 + (2.0 * PI * (2.0 * y - x)).sin();
                let s = b * f * g;
                (2.0 * s, s)
            }
        }
    }

    /// Exact analytic divergence of the field.
    pub fn div(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            VectorField::Zero
            | VectorField::Constant { .. }
            | VectorField::UnidirectionalZeroDiv { .. }
            | VectorField::Circulating { .. }
            | VectorField::CirculatingRadial { .. } => 0.0,
            VectorField::UnidirectionalNonzeroDiv { b } => {
                10.0 * PI * b * (2.0 * PI * (2.0 * x + y)).cos()
            }
            VectorField::UnidirectionalOscillating { b, m } => {
                let mf = *m as f64;
                let g = 1.0 + (2.0 * PI * (2.0 * y - x)).sin();
                5.0 * mf * PI * b * (mf * PI * (2.0 * x + y)).cos() * g
            }
        }
    }

    /// Sup norm of the field over given sample points.
    pub fn sup_norm_at(&self, points: impl Iterator<Item = (f64, f64)>) -> f64 {
        points
            .map(|(x, y)| {
                let (bx, by) = self.eval(x, y);
                (bx * bx + by * by).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// The full coefficient set of a problem, with the reaction already split.
#[derive(Debug, Clone)]
pub struct ProblemCoefficients {
    pub a: ScalarField,
    pub b: VectorField,
    pub c_plus: ScalarField,
    pub c_minus: ScalarField,
}

impl ProblemCoefficients {
    /// `c~ = c- - div b`.
    pub fn c_tilde(&self, x: f64, y: f64) -> f64 {
        self.c_minus.eval(x, y) - self.b.div(x, y)
    }
}

/// How to split the reaction coefficient `c` into `c+ + c-`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    /// `c+` is the pointwise non-negative part of `c`.
    NonnegPart,
    /// `c+ = 0`, everything goes into `c-`.
    AllMinus,
    /// Backward-Euler splitting around a median time-step:
    /// `c+ = 1/dt0`, `c- = 1/dt - 1/dt0` (assumes `c = 1/dt`).
    Timestep { dt: f64, dt0: f64 },
}

/// Split `c` into `(c+, c-)` with `c+ >= 0` and `c+ + c- = c` pointwise.
pub fn split_reaction(c: ScalarField, mode: SplitMode) -> Result<(ScalarField, ScalarField)> {
    match mode {
        SplitMode::NonnegPart => {
            let c_plus = ScalarField::PosPart(Box::new(c.clone()));
            let c_minus = ScalarField::Difference(Box::new(c), Box::new(c_plus.clone()));
            Ok((c_plus, c_minus))
        }
        SplitMode::AllMinus => Ok((ScalarField::Constant(0.0), c)),
        SplitMode::Timestep { dt, dt0 } => {
            if dt <= 0.0 || dt0 <= 0.0 {
                return Err(Error::Parameter(format!(
                    "time-steps must be positive: dt = {dt}, dt0 = {dt0}"
                )));
            }
            Ok((
                ScalarField::Constant(1.0 / dt0),
                ScalarField::Constant(1.0 / dt - 1.0 / dt0),
            ))
        }
    }
}

/// The "inclusions and channels" diffusion coefficient.
///
/// Twenty-five axis-aligned squares `[x/9,(x+1)/9] x [y/9,(y+1)/9]` for
/// `x, y` in `{0,2,4,6,8}` with value `1 + (a_max-1)(y+1)/10`, plus two
/// quadrilateral channels (values `a_max` and `a_max/2`) drawn on top.
pub fn inclusions_channels(a_max: f64) -> Result<ScalarField> {
    if a_max <= 1.0 {
        return Err(Error::Contrast(a_max));
    }
    Ok(ScalarField::InclusionsChannels { a_max })
}

const CHANNEL_1: [(f64, f64); 4] = [(0.16, 0.63), (0.16, 0.68), (0.72, 0.47), (0.72, 0.42)];
const CHANNEL_2: [(f64, f64); 4] = [(0.22, 0.03), (0.22, 0.11), (0.94, 0.23), (0.94, 0.15)];

fn inclusions_channels_value(a_max: f64, x: f64, y: f64) -> f64 {
    // Channel 2 overrides channel 1 overrides inclusions.
    if point_in_convex_quad(&CHANNEL_2, x, y) {
        return 0.5 * a_max;
    }
    if point_in_convex_quad(&CHANNEL_1, x, y) {
        return a_max;
    }
    let in_inclusion_band = |t: f64| -> Option<usize> {
        // t in [k/9, (k+1)/9] for k in {0,2,4,6,8}; boundary counted inside.
        let k = (t * 9.0).floor() as i64;
        for cand in [k - 1, k] {
            if (0..=8).contains(&cand) && cand % 2 == 0 {
                let lo = cand as f64 / 9.0;
                let hi = (cand + 1) as f64 / 9.0;
                if t >= lo && t <= hi {
                    return Some(cand as usize);
                }
            }
        }
        None
    };
    if let (Some(_), Some(ky)) = (in_inclusion_band(x), in_inclusion_band(y)) {
        return 1.0 + (a_max - 1.0) * (ky as f64 + 1.0) / 10.0;
    }
    1.0
}

/// Point-in-quadrilateral test with the boundary counted inside. Accepts
/// either vertex orientation.
fn point_in_convex_quad(quad: &[(f64, f64); 4], x: f64, y: f64) -> bool {
    let mut pos = true;
    let mut neg = true;
    for i in 0..4 {
        let (x0, y0) = quad[i];
        let (x1, y1) = quad[(i + 1) % 4];
        let cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
        if cross > 0.0 {
            neg = false;
        }
        if cross < 0.0 {
            pos = false;
        }
    }
    pos || neg
}
