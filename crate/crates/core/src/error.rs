use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported Hamiltonian: {0}")]
    UnsupportedHamiltonian(String),

    #[error("diffusion matrix is not balanced traceless: eigenvalues {0:?}")]
    NotTraceless(Vec<f64>),

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("series order {requested} exceeds supported maximum {max}")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("Fock cutoff {cutoff} too small: tail population {tail:.3e} exceeds {limit:.1e}; try n_max >= {suggested}")]
    Cutoff { cutoff: usize, tail: f64, limit: f64, suggested: usize },

    #[error("step size violates CFL limit: courant number {courant:.3} > {limit:.3}")]
    Cfl { courant: f64, limit: f64 },

    #[error("degenerate path measure: diffusion magnitude is {0}")]
    DegenerateMeasure(f64),

    #[error("path measure is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("sampler failure: {0}")]
    SamplerFailure(String),

    #[error("optimization did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    Optimization { iterations: usize, gradient_norm: f64, last: Vec<f64> },

    #[error("explicit bandwidth required: {0}")]
    BandwidthRequired(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("need at least {needed} time slices, got {got}")]
    Arity { needed: usize, got: usize },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("supports are disjoint: {0}")]
    DisjointSupport(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
