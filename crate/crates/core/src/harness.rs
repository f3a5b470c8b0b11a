//! End-to-end experiment runner: problem configuration, pipeline
//! execution, parameter sweeps with CSV output, and the time-stepping
//! demonstration that reuses one coarse space across many time-steps.

use std::time::Instant;

use crate::assembly::{
    assemble_a, assemble_b, assemble_local_neumann, assemble_mass, point_source_rhs, CsrMatrix,
};
use crate::coeffs::{
    inclusions_channels, split_reaction, ProblemCoefficients, ScalarField, SplitMode, VectorField,
};
use crate::decomp::{extend_overlap, partition_square, DomainDecomposition, OverlapMode};
use crate::error::{Error, Result};
use crate::geneo::{build_geneo, build_hgeneo, CoarseSpace};
use crate::grid::{build_uniform_mesh, Mesh, Rectangle};
use crate::krylov::{gmres, GmresOptions, InnerProduct};
use crate::linalg::LanczosOptions;
use crate::precond::{Preconditioner, Variant};
use crate::theory::{compute_constants, estimate_cstab_star, TheoryConstants};

/// Named convection field shapes; parameters come from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectionField {
    UnidirectionalZeroDiv,
    UnidirectionalNonzeroDiv,
    Circulating,
    CirculatingRadial,
    UnidirectionalOscillating,
}

impl ConvectionField {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero_div" | "zerodiv" | "unidirectional_zero_div" => {
                Ok(ConvectionField::UnidirectionalZeroDiv)
            }
            "nonzero_div" | "nonzerodiv" | "unidirectional_nonzero_div" => {
                Ok(ConvectionField::UnidirectionalNonzeroDiv)
            }
            "circulating" => Ok(ConvectionField::Circulating),
            "circulating_radial" | "radial" => Ok(ConvectionField::CirculatingRadial),
            "oscillating" | "unidirectional_oscillating" => {
                Ok(ConvectionField::UnidirectionalOscillating)
            }
            other => Err(Error::Parameter(format!("unknown convection field {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConvectionField::UnidirectionalZeroDiv => "zero_div",
            ConvectionField::UnidirectionalNonzeroDiv => "nonzero_div",
            ConvectionField::Circulating => "circulating",
            ConvectionField::CirculatingRadial => "circulating_radial",
            ConvectionField::UnidirectionalOscillating => "oscillating",
        }
    }

    fn build(&self, b: f64, n: u32, m: u32) -> VectorField {
        match self {
            ConvectionField::UnidirectionalZeroDiv => VectorField::UnidirectionalZeroDiv { b },
            ConvectionField::UnidirectionalNonzeroDiv => {
                VectorField::UnidirectionalNonzeroDiv { b }
            }
            ConvectionField::Circulating => VectorField::Circulating { b },
            ConvectionField::CirculatingRadial => VectorField::CirculatingRadial { b, n },
            ConvectionField::UnidirectionalOscillating => {
                VectorField::UnidirectionalOscillating { b, m }
            }
        }
    }

    /// The circulating fields are defined on `(-1,1) x (0,1)`.
    fn rect(&self) -> Rectangle {
        match self {
            ConvectionField::Circulating | ConvectionField::CirculatingRadial => {
                Rectangle::new(-1.0, 1.0, 0.0, 1.0)
            }
            _ => Rectangle::unit_square(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    /// `-div(A grad u) - kappa u = f` with `c+ = 0`, `c- = -kappa`.
    Indefinite { kappa: f64 },
    /// `-div(A grad u) + b . grad u = f` with zero reaction.
    Convection {
        field: ConvectionField,
        b: f64,
        n: u32,
        m: u32,
    },
    /// Backward-Euler step of the parabolic problem:
    /// `c+ = 1/dt0`, `c- = 1/dt - 1/dt0`.
    Timestep {
        dt: f64,
        dt0: f64,
        field: ConvectionField,
        b: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Homogeneous,
    Inclusions { a_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseKind {
    Delta,
    HGeneo,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub diffusion: Diffusion,
    /// Mesh width as `1/h_denom` (cells per unit length).
    pub h_denom: usize,
    pub n_subdomains: usize,
    pub overlap: OverlapMode,
    pub lambda_max: f64,
    pub variant: Variant,
    pub coarse: CoarseKind,
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
    /// Also compute the theory constants (extra SPD work).
    pub with_theory: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Indefinite { kappa: 0.0 },
            diffusion: Diffusion::Homogeneous,
            h_denom: 40,
            n_subdomains: 4,
            overlap: OverlapMode::Minimal { layers: 1 },
            lambda_max: 0.5,
            variant: Variant::As2,
            coarse: CoarseKind::Delta,
            tol: 1e-6,
            maxit: 1000,
            seed: 0,
            with_theory: false,
        }
    }
}

impl ExperimentConfig {
    /// Domain rectangle and cell counts implied by the problem and `h`.
    pub fn geometry(&self) -> (Rectangle, usize, usize) {
        let rect = match self.problem {
            ProblemKind::Convection { field, .. } => field.rect(),
            _ => Rectangle::unit_square(),
        };
        let nx = (rect.width() * self.h_denom as f64).round() as usize;
        let ny = (rect.height() * self.h_denom as f64).round() as usize;
        (rect, nx, ny)
    }

    /// Problem data sampled at element barycenters during assembly.
    pub fn coefficients(&self) -> Result<ProblemCoefficients> {
        let a = match self.diffusion {
            Diffusion::Homogeneous => ScalarField::Constant(1.0),
            Diffusion::Inclusions { a_max } => inclusions_channels(a_max)?,
        };
        let (b, c_plus, c_minus) = match self.problem {
            ProblemKind::Indefinite { kappa } => {
                let (cp, cm) =
                    split_reaction(ScalarField::Constant(-kappa), SplitMode::NonnegPart)?;
                (VectorField::Zero, cp, cm)
            }
            ProblemKind::Convection { field, b, n, m } => (
                field.build(b, n, m),
                ScalarField::Constant(0.0),
                ScalarField::Constant(0.0),
            ),
            ProblemKind::Timestep { dt, dt0, field, b } => {
                let (cp, cm) = split_reaction(
                    ScalarField::Constant(1.0 / dt),
                    SplitMode::Timestep { dt, dt0 },
                )?;
                (field.build(b, 0, 0), cp, cm)
            }
        };
        Ok(ProblemCoefficients {
            a,
            b,
            c_plus,
            c_minus,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub n_dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub maxit: usize,
    pub coarse_size: usize,
    pub avg_modes_per_subdomain: f64,
    pub k0: usize,
    pub theta: f64,
    pub time_assembly: f64,
    pub time_eigensolve: f64,
    pub time_factorization: f64,
    pub time_gmres: f64,
    pub theory: Option<TheoryConstants>,
}

impl ExperimentReport {
    /// Iteration count, rendered as e.g. "1000+" when unconverged.
    pub fn iterations_label(&self) -> String {
        if self.converged {
            format!("{}", self.iterations)
        } else {
            format!("{}+", self.maxit)
        }
    }
}

/// Everything built before the Krylov solve; kept so callers can reuse
/// the decomposition and coarse space (time-stepping, theory probes).
pub struct Pipeline {
    pub mesh: Mesh,
    pub coeffs: ProblemCoefficients,
    pub decomp: DomainDecomposition,
    pub b: CsrMatrix,
    pub coarse: Option<CoarseSpace>,
    pub precond: Preconditioner,
    pub time_assembly: f64,
    pub time_eigensolve: f64,
    pub time_factorization: f64,
}

impl Pipeline {
    pub fn build(config: &ExperimentConfig) -> Result<Pipeline> {
        let (rect, nx, ny) = config.geometry();
        let mesh = build_uniform_mesh(rect, nx, ny).map_err(|e| e.at_stage("mesh"))?;
        let coeffs = config.coefficients().map_err(|e| e.at_stage("coefficients"))?;

        let t0 = Instant::now();
        let b = assemble_b(&mesh, &coeffs);
        let time_assembly = t0.elapsed().as_secs_f64();

        let partition = partition_square(&mesh, config.n_subdomains)
            .map_err(|e| e.at_stage("decomposition"))?;
        let decomp = extend_overlap(&mesh, partition, config.overlap)
            .map_err(|e| e.at_stage("decomposition"))?;

        let t0 = Instant::now();
        let coarse = if config.variant == Variant::As1 {
            None
        } else {
            let neumann: Vec<(CsrMatrix, CsrMatrix)> = decomp
                .subdomains
                .iter()
                .map(|sd| assemble_local_neumann(&mesh, &coeffs, sd))
                .collect::<Result<_>>()
                .map_err(|e| e.at_stage("local assembly"))?;
            let local_a: Vec<CsrMatrix> = neumann.iter().map(|(a, _)| a.clone()).collect();
            let cs = match config.coarse {
                CoarseKind::Delta => {
                    build_geneo(&decomp, &local_a, config.lambda_max, &LanczosOptions::default())
                }
                CoarseKind::HGeneo => {
                    let local_b: Vec<CsrMatrix> =
                        neumann.into_iter().map(|(_, b)| b).collect();
                    build_hgeneo(
                        &decomp,
                        &local_b,
                        &local_a,
                        config.lambda_max,
                        &LanczosOptions::default(),
                    )
                }
            }
            .map_err(|e| e.at_stage("eigensolve"))?;
            Some(cs)
        };
        let time_eigensolve = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let precond = Preconditioner::build(&b, &decomp, coarse.as_ref(), config.variant)
            .map_err(|e| e.at_stage("factorization"))?;
        let time_factorization = t0.elapsed().as_secs_f64();

        Ok(Pipeline {
            mesh,
            coeffs,
            decomp,
            b,
            coarse,
            precond,
            time_assembly,
            time_eigensolve,
            time_factorization,
        })
    }

    /// Solve the point-source problem and assemble the report.
    pub fn solve(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let rhs = point_source_rhs(&self.mesh).map_err(|e| e.at_stage("rhs"))?;
        let t0 = Instant::now();
        let opts = GmresOptions {
            tol: config.tol,
            max_iter: config.maxit,
            inner: InnerProduct::Euclidean,
        };
        let rep = gmres(
            |v| self.b.matvec(v),
            |r| self.precond.apply(r),
            &rhs.values,
            &opts,
        )
        .map_err(|e| e.at_stage("gmres"))?;
        let time_gmres = t0.elapsed().as_secs_f64();

        let coarse_size = self.coarse.as_ref().map_or(0, |c| c.size());
        let theta = self.coarse.as_ref().map_or(1.0, |c| c.theta);
        let theory = if config.with_theory {
            Some(self.theory_constants()?)
        } else {
            None
        };
        Ok(ExperimentReport {
            n_dofs: self.mesh.n_free_dofs(),
            iterations: rep.iterations,
            converged: rep.converged,
            maxit: config.maxit,
            coarse_size,
            avg_modes_per_subdomain: coarse_size as f64 / self.decomp.n as f64,
            k0: self.decomp.k0,
            theta,
            time_assembly: self.time_assembly,
            time_eigensolve: self.time_eigensolve,
            time_factorization: self.time_factorization,
            time_gmres,
            theory,
        })
    }

    /// Constants of the convergence bounds with the discrete
    /// adjoint-stability surrogate.
    pub fn theory_constants(&self) -> Result<TheoryConstants> {
        let a = assemble_a(&self.mesh, &self.coeffs);
        let mass = assemble_mass(&self.mesh);
        let cstab = estimate_cstab_star(&self.b, &a, &mass).map_err(|e| e.at_stage("theory"))?;
        let theta = self.coarse.as_ref().map_or(1.0, |c| c.theta);
        Ok(compute_constants(
            &self.mesh,
            &self.coeffs,
            &self.decomp,
            theta,
            cstab,
        ))
    }
}

/// Full pipeline for a single configuration.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Pipeline::build(config)?.solve(config)
}

const SWEEP_HEADER: &str =
    "problem,field,param,a_max,h,N,overlap,variant,coarse,iterations,coarse_size,theta,error";

fn config_columns(c: &ExperimentConfig) -> String {
    let (problem, field, param) = match c.problem {
        ProblemKind::Indefinite { kappa } => ("indefinite".to_string(), "-".to_string(), kappa),
        ProblemKind::Convection { field, b, n, m } => {
            let p = match field {
                ConvectionField::CirculatingRadial => n as f64,
                ConvectionField::UnidirectionalOscillating => m as f64,
                _ => b,
            };
            ("convection".to_string(), field.name().to_string(), p)
        }
        ProblemKind::Timestep { dt, field, .. } => {
            ("timestep".to_string(), field.name().to_string(), dt)
        }
    };
    let a_max = match c.diffusion {
        Diffusion::Homogeneous => "-".to_string(),
        Diffusion::Inclusions { a_max } => format!("{a_max}"),
    };
    let overlap = match c.overlap {
        OverlapMode::Minimal { layers } => format!("minimal{layers}"),
        OverlapMode::Generous { delta } => format!("generous{delta}"),
    };
    let variant = match c.variant {
        Variant::As1 => "AS1",
        Variant::As2 => "AS2",
        Variant::RasDeflation => "RAS",
    };
    let coarse = match c.coarse {
        CoarseKind::Delta => "delta",
        CoarseKind::HGeneo => "h",
    };
    format!(
        "{problem},{field},{param},{a_max},1/{},{},{overlap},{variant},{coarse}",
        c.h_denom, c.n_subdomains
    )
}

/// Run each configuration and write one CSV row per run; failures are
/// recorded in the row and the sweep continues.
pub fn sweep<W: std::io::Write>(configs: &[ExperimentConfig], w: &mut W) -> Result<Vec<Option<ExperimentReport>>> {
    writeln!(w, "{SWEEP_HEADER}").map_err(Error::from)?;
    let mut reports = Vec::with_capacity(configs.len());
    for config in configs {
        let cols = config_columns(config);
        match run(config) {
            Ok(rep) => {
                writeln!(
                    w,
                    "{cols},{},{},{:.4e},",
                    rep.iterations_label(),
                    rep.coarse_size,
                    rep.theta
                )
                .map_err(Error::from)?;
                reports.push(Some(rep));
            }
            Err(e) => {
                let msg = e.to_string().replace(',', ";");
                writeln!(w, "{cols},-,-,-,{msg}").map_err(Error::from)?;
                reports.push(None);
            }
        }
    }
    Ok(reports)
}

/// Build the decomposition, coarse space (with `c+ = 1/dt0`), then for
/// each time-step reassemble only the reaction part of the system matrix,
/// refactor the local and coarse solves, and run GMRES. The coarse basis
/// is computed once.
pub fn timestep_demo(
    base: &ExperimentConfig,
    dts: &[f64],
) -> Result<Vec<(f64, ExperimentReport)>> {
    let (dt0, field, b_param) = match base.problem {
        ProblemKind::Timestep { dt0, field, b, .. } => (dt0, field, b),
        _ => {
            return Err(Error::Config(
                "timestep_demo needs a timestep problem".into(),
            ))
        }
    };
    let mut out = Vec::with_capacity(dts.len());
    let mut shared: Option<(Pipeline, ExperimentConfig)> = None;
    for &dt in dts {
        let config = ExperimentConfig {
            problem: ProblemKind::Timestep {
                dt,
                dt0,
                field,
                b: b_param,
            },
            ..base.clone()
        };
        match &shared {
            None => {
                let pipe = Pipeline::build(&config)?;
                let rep = pipe.solve(&config)?;
                shared = Some((pipe, config));
                out.push((dt, rep));
            }
            Some((first, _)) => {
                // The energy form (hence the coarse basis) depends only on
                // dt0: reassemble B for this dt and refactor.
                let b = assemble_b(&first.mesh, &config.coefficients()?);
                let t0 = Instant::now();
                let precond = Preconditioner::build(
                    &b,
                    &first.decomp,
                    first.coarse.as_ref(),
                    config.variant,
                )
                .map_err(|e| e.at_stage("factorization"))?;
                let time_factorization = t0.elapsed().as_secs_f64();
                let pipe = Pipeline {
                    mesh: first.mesh.clone(),
                    coeffs: config.coefficients()?,
                    decomp: first.decomp.clone(),
                    b,
                    coarse: first.coarse.clone(),
                    precond,
                    time_assembly: 0.0,
                    time_eigensolve: 0.0,
                    time_factorization,
                };
                out.push((dt, pipe.solve(&config)?));
            }
        }
    }
    Ok(out)
}

/// Parse a flat `key = value` config (case-insensitive keys, `#` comments,
/// `[section]` lines ignored) on top of the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    // Problem assembly needs all keys first.
    let mut kind = "indefinite".to_string();
    let mut kappa = 0.0;
    let mut field = ConvectionField::UnidirectionalZeroDiv;
    let mut b_param = 1.0;
    let mut n_param = 0u32;
    let mut m_param = 0u32;
    let mut dt = 1.0;
    let mut dt0 = 1.0;
    let mut a_max: Option<f64> = None;
    let mut layers = 1usize;
    let mut delta: Option<f64> = None;
    let mut generous = false;

    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got: {line}")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number for {key}: {value}")))
        };
        match key.as_str() {
            "problem" => kind = value.to_ascii_lowercase(),
            "kappa" => kappa = num()?,
            "field" => field = ConvectionField::parse(value)?,
            "b" => b_param = num()?,
            "n" => n_param = num()? as u32,
            "m" => m_param = num()? as u32,
            "dt" => dt = num()?,
            "dt0" => dt0 = num()?,
            "a_max" | "amax" => a_max = Some(num()?),
            "h" => {
                let denom = value.strip_prefix("1/").unwrap_or(value);
                cfg.h_denom = denom
                    .parse()
                    .map_err(|_| Error::Config(format!("bad mesh width: {value}")))?;
            }
            "n_subdomains" | "subdomains" => cfg.n_subdomains = num()? as usize,
            "overlap" => generous = value.eq_ignore_ascii_case("generous"),
            "layers" => layers = num()? as usize,
            "delta" => delta = Some(num()?),
            "lambda_max" => cfg.lambda_max = num()?,
            "variant" => {
                cfg.variant = match value.to_ascii_lowercase().as_str() {
                    "as1" => Variant::As1,
                    "as2" => Variant::As2,
                    "ras" | "ras_deflation" => Variant::RasDeflation,
                    other => return Err(Error::Config(format!("unknown variant {other}"))),
                }
            }
            "geneo" | "coarse" => {
                cfg.coarse = match value.to_ascii_lowercase().as_str() {
                    "delta" | "geneo" => CoarseKind::Delta,
                    "h" | "h_geneo" | "hgeneo" => CoarseKind::HGeneo,
                    other => return Err(Error::Config(format!("unknown coarse kind {other}"))),
                }
            }
            "tol" => cfg.tol = num()?,
            "maxit" => cfg.maxit = num()? as usize,
            "seed" => cfg.seed = num()? as u64,
            "theory" => cfg.with_theory = value.eq_ignore_ascii_case("true"),
            other => return Err(Error::Config(format!("unknown key {other}"))),
        }
    }
    cfg.problem = match kind.as_str() {
        "indefinite" => ProblemKind::Indefinite { kappa },
        "convection" => ProblemKind::Convection {
            field,
            b: b_param,
            n: n_param,
            m: m_param,
        },
        "timestep" => ProblemKind::Timestep {
            dt,
            dt0,
            field,
            b: b_param,
        },
        other => return Err(Error::Config(format!("unknown problem {other}"))),
    };
    if let Some(a_max) = a_max {
        cfg.diffusion = Diffusion::Inclusions { a_max };
    }
    cfg.overlap = if generous {
        let delta =
            delta.ok_or_else(|| Error::Config("generous overlap needs delta".into()))?;
        OverlapMode::Generous { delta }
    } else {
        OverlapMode::Minimal { layers }
    };
    Ok(cfg)
}
