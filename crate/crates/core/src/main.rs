//! Benchmark CLI: configure a problem, build the preconditioner, run
//! GMRES, and report iteration counts, coarse-space sizes, and theory
//! constants.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geneo_schwarz::assembly::assemble_b;
use geneo_schwarz::decomp::OverlapMode;
use geneo_schwarz::grid::build_uniform_mesh;
use geneo_schwarz::harness::{
    parse_config, run, sweep, timestep_demo, CoarseKind, ConvectionField, Diffusion,
    ExperimentConfig, Pipeline, ProblemKind,
};
use geneo_schwarz::precond::Variant;
use geneo_schwarz::theory::probe_field_of_values;

#[derive(Parser)]
#[command(
    name = "geneo",
    about = "Two-level Schwarz + spectral coarse space benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Config file (flat key=value); CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem kind: indefinite | convection | timestep
    #[arg(long)]
    problem: Option<String>,
    /// Reaction strength for the indefinite problem.
    #[arg(long)]
    kappa: Option<f64>,
    /// Convection field: zero_div | nonzero_div | circulating |
    /// circulating_radial | oscillating
    #[arg(long)]
    field: Option<String>,
    /// Convection strength.
    #[arg(long)]
    b: Option<f64>,
    /// Radial oscillation count (circulating_radial).
    #[arg(long)]
    n: Option<u32>,
    /// Along-characteristic oscillation count (oscillating).
    #[arg(long)]
    m: Option<u32>,
    /// Time-step.
    #[arg(long)]
    dt: Option<f64>,
    /// Median time-step used to build the coarse space.
    #[arg(long)]
    dt0: Option<f64>,
    /// Contrast of the inclusions-and-channels diffusion coefficient;
    /// omit for homogeneous diffusion.
    #[arg(long)]
    a_max: Option<f64>,
    /// Mesh width denominator: h = 1/H_DENOM.
    #[arg(long, value_name = "H_DENOM")]
    h: Option<usize>,
    /// Number of subdomains (a perfect square).
    #[arg(long, value_name = "N")]
    subdomains: Option<usize>,
    /// Overlap: minimal | generous
    #[arg(long)]
    overlap: Option<String>,
    /// Element layers for minimal overlap.
    #[arg(long)]
    layers: Option<usize>,
    /// Physical overlap width for generous overlap.
    #[arg(long)]
    delta: Option<f64>,
    /// Eigenvalue threshold for the coarse space.
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Preconditioner: as1 | as2 | ras
    #[arg(long)]
    variant: Option<String>,
    /// Coarse space: delta | h_geneo
    #[arg(long)]
    geneo: Option<String>,
    /// GMRES relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// GMRES iteration cap.
    #[arg(long)]
    maxit: Option<usize>,
    /// Seed for randomized theory probes.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and print the report.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Dump the system matrix in Matrix Market format.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
        /// Also compute theory constants.
        #[arg(long)]
        theory: bool,
    },
    /// Run a grid of experiments over subdomain counts and parameters.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated subdomain counts.
        #[arg(long, value_delimiter = ',', default_value = "4,16,36")]
        n_list: Vec<usize>,
        /// Comma-separated values for the problem parameter
        /// (kappa or b, depending on the problem).
        #[arg(long, value_delimiter = ',')]
        param_list: Option<Vec<f64>>,
        /// Write the table to a file instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build the coarse space once, then solve for several time-steps.
    Timestep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated time-steps.
        #[arg(long, value_delimiter = ',', default_value = "1000,0.1,0.001")]
        dt_list: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compute the convergence-theory constants and field-of-values
    /// probes for a configuration.
    Theory {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of random probe vectors.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn build_config(args: &ConfigArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("config: {e}"))?
        }
        None => ExperimentConfig::default(),
    };
    // Current values as override fallbacks.
    let (mut kappa, mut field, mut b, mut n, mut m, mut dt, mut dt0) =
        (0.0, ConvectionField::UnidirectionalZeroDiv, 1.0, 0, 0, 1.0, 1.0);
    match cfg.problem {
        ProblemKind::Indefinite { kappa: k } => kappa = k,
        ProblemKind::Convection {
            field: f,
            b: bb,
            n: nn,
            m: mm,
        } => (field, b, n, m) = (f, bb, nn, mm),
        ProblemKind::Timestep {
            dt: d,
            dt0: d0,
            field: f,
            b: bb,
        } => (dt, dt0, field, b) = (d, d0, f, bb),
    }
    if let Some(k) = args.kappa {
        kappa = k;
    }
    if let Some(f) = &args.field {
        field = ConvectionField::parse(f).map_err(|e| e.to_string())?;
    }
    if let Some(v) = args.b {
        b = v;
    }
    if let Some(v) = args.n {
        n = v;
    }
    if let Some(v) = args.m {
        m = v;
    }
    if let Some(v) = args.dt {
        dt = v;
    }
    if let Some(v) = args.dt0 {
        dt0 = v;
    }
    let kind = match &args.problem {
        Some(p) => p.to_ascii_lowercase(),
        None => match cfg.problem {
            ProblemKind::Indefinite { .. } => "indefinite".into(),
            ProblemKind::Convection { .. } => "convection".into(),
            ProblemKind::Timestep { .. } => "timestep".into(),
        },
    };
    cfg.problem = match kind.as_str() {
        "indefinite" => ProblemKind::Indefinite { kappa },
        "convection" => ProblemKind::Convection { field, b, n, m },
        "timestep" => ProblemKind::Timestep { dt, dt0, field, b },
        other => return Err(format!("config: unknown problem {other}")),
    };
    if let Some(a_max) = args.a_max {
        cfg.diffusion = Diffusion::Inclusions { a_max };
    }
    if let Some(h) = args.h {
        cfg.h_denom = h;
    }
    if let Some(ns) = args.subdomains {
        cfg.n_subdomains = ns;
    }
    if let Some(ov) = &args.overlap {
        cfg.overlap = match ov.to_ascii_lowercase().as_str() {
            "minimal" => OverlapMode::Minimal {
                layers: args.layers.unwrap_or(1),
            },
            "generous" => OverlapMode::Generous {
                delta: args
                    .delta
                    .ok_or_else(|| "config: generous overlap needs --delta".to_string())?,
            },
            other => return Err(format!("config: unknown overlap {other}")),
        };
    } else if let Some(layers) = args.layers {
        cfg.overlap = OverlapMode::Minimal { layers };
    }
    if let Some(v) = args.lambda_max {
        cfg.lambda_max = v;
    }
    if let Some(v) = &args.variant {
        cfg.variant = match v.to_ascii_lowercase().as_str() {
            "as1" => Variant::As1,
            "as2" => Variant::As2,
            "ras" | "ras_deflation" => Variant::RasDeflation,
            other => return Err(format!("config: unknown variant {other}")),
        };
    }
    if let Some(g) = &args.geneo {
        cfg.coarse = match g.to_ascii_lowercase().as_str() {
            "delta" | "geneo" => CoarseKind::Delta,
            "h" | "h_geneo" | "hgeneo" => CoarseKind::HGeneo,
            other => return Err(format!("config: unknown coarse kind {other}")),
        };
    }
    if let Some(v) = args.tol {
        cfg.tol = v;
    }
    if let Some(v) = args.maxit {
        cfg.maxit = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| format!("io: {e}")),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            csv,
            export_matrix,
            theory,
        } => {
            let mut cfg = build_config(&config)?;
            cfg.with_theory = theory;
            if let Some(path) = &export_matrix {
                let (rect, nx, ny) = cfg.geometry();
                let mesh = build_uniform_mesh(rect, nx, ny).map_err(|e| e.to_string())?;
                let coeffs = cfg.coefficients().map_err(|e| e.to_string())?;
                let b = assemble_b(&mesh, &coeffs);
                let mut buf = Vec::new();
                b.write_matrix_market(&mut buf).map_err(|e| e.to_string())?;
                fs::write(path, buf).map_err(|e| format!("io: {e}"))?;
            }
            let rep = run(&cfg).map_err(|e| e.to_string())?;
            let mut out = String::new();
            out.push_str(&format!("dofs = {}\n", rep.n_dofs));
            out.push_str(&format!("iterations = {}\n", rep.iterations_label()));
            out.push_str(&format!("converged = {}\n", rep.converged));
            out.push_str(&format!("coarse_size = {}\n", rep.coarse_size));
            out.push_str(&format!(
                "avg_modes_per_subdomain = {:.2}\n",
                rep.avg_modes_per_subdomain
            ));
            out.push_str(&format!("k0 = {}\n", rep.k0));
            out.push_str(&format!("theta = {:.4e}\n", rep.theta));
            out.push_str(&format!(
                "time_assembly_s = {:.3}\ntime_eigensolve_s = {:.3}\ntime_factorization_s = {:.3}\ntime_gmres_s = {:.3}\n",
                rep.time_assembly, rep.time_eigensolve, rep.time_factorization, rep.time_gmres
            ));
            if let Some(t) = &rep.theory {
                let mut buf = Vec::new();
                t.write_report(&mut buf).map_err(|e| format!("io: {e}"))?;
                out.push_str(&String::from_utf8_lossy(&buf));
            }
            write_out(&csv, &out)
        }
        Command::Sweep {
            config,
            n_list,
            param_list,
            csv,
        } => {
            let base = build_config(&config)?;
            let mut configs = Vec::new();
            let params = param_list.unwrap_or_else(|| vec![f64::NAN]);
            for &p in &params {
                for &n in &n_list {
                    let mut cfg = base.clone();
                    cfg.n_subdomains = n;
                    if !p.is_nan() {
                        cfg.problem = match cfg.problem {
                            ProblemKind::Indefinite { .. } => {
                                ProblemKind::Indefinite { kappa: p }
                            }
                            ProblemKind::Convection { field, n, m, .. } => {
                                ProblemKind::Convection { field, b: p, n, m }
                            }
                            ProblemKind::Timestep { dt0, field, b, .. } => {
                                ProblemKind::Timestep { dt: p, dt0, field, b }
                            }
                        };
                    }
                    configs.push(cfg);
                }
            }
            let mut buf = Vec::new();
            sweep(&configs, &mut buf).map_err(|e| e.to_string())?;
            write_out(&csv, &String::from_utf8_lossy(&buf))
        }
        Command::Timestep {
            config,
            dt_list,
            csv,
        } => {
            let base = build_config(&config)?;
            let runs = timestep_demo(&base, &dt_list).map_err(|e| e.to_string())?;
            let mut out = String::from("dt,iterations,coarse_size,converged\n");
            for (dt, rep) in &runs {
                out.push_str(&format!(
                    "{dt},{},{},{}\n",
                    rep.iterations_label(),
                    rep.coarse_size,
                    rep.converged
                ));
            }
            write_out(&csv, &out)
        }
        Command::Theory {
            config,
            samples,
            csv,
        } => {
            let cfg = build_config(&config)?;
            let pipe = Pipeline::build(&cfg).map_err(|e| e.to_string())?;
            let constants = pipe.theory_constants().map_err(|e| e.to_string())?;
            let a = geneo_schwarz::assembly::assemble_a(&pipe.mesh, &pipe.coeffs);
            let (min_ratio, max_norm_ratio) =
                probe_field_of_values(&pipe.precond, &a, samples, cfg.seed);
            let mut buf = Vec::new();
            constants
                .write_report(&mut buf)
                .map_err(|e| format!("io: {e}"))?;
            let mut out = String::from_utf8_lossy(&buf).into_owned();
            out.push_str(&format!("probe_min_ratio = {min_ratio:.6e}\n"));
            out.push_str(&format!("probe_max_norm_ratio = {max_norm_ratio:.6e}\n"));
            out.push_str(&format!(
                "probe_upper_ok = {}\n",
                max_norm_ratio <= constants.c2_bound.sqrt()
            ));
            write_out(&csv, &out)
        }
    }
}
