use thiserror::Error;

/// Errors surfaced by any stage of the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh cells are not square: hx = {hx}, hy = {hy}")]
    AspectRatio { hx: f64, hy: f64 },

    #[error("invalid mesh dimensions: nx = {nx}, ny = {ny}")]
    Dimension { nx: usize, ny: usize },

    #[error("mesh has no free degrees of freedom")]
    EmptyInterior,

    #[error("contrast parameter must exceed 1, got {0}")]
    Contrast(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subdomain {0} has no elements")]
    EmptySubdomain(usize),

    #[error("cannot partition {nx}x{ny} grid into N = {n} square subdomains")]
    Partition { nx: usize, ny: usize, n: usize },

    #[error("dof {0} is internal to no subdomain")]
    Coverage(usize),

    #[error("matrix is numerically singular at pivot {0}")]
    Singular(usize),

    #[error("matrix asymmetry {0:.3e} exceeds tolerance")]
    Asymmetry(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("eigensolver failed on subdomain {subdomain}: {message}")]
    SubdomainEigensolver { subdomain: usize, message: String },

    #[error("preconditioner build failed on block {block}: {message}")]
    PrecondBuild { block: String, message: String },

    #[error("GMRES breakdown at iteration {0}")]
    Breakdown(usize),

    #[error("inner product is not positive definite")]
    InnerProduct,

    #[error("H-GenEO requires a symmetric local matrix (asymmetry {0:.3e})")]
    VariantUnsupported(f64),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
