use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for kernel validation, mesh construction, operator
/// evaluation, series summation, and solves.
#[derive(Debug, Error)]
pub enum Error {
    /// The kernel failed the monotonicity check on a mesh: psi must be
    /// strictly increasing between consecutive nodes.
    #[error("kernel `{label}` is not increasing: psi({t_lo}) = {x_lo} but psi({t_hi}) = {x_hi}")]
    NonMonotoneKernel {
        label: String,
        t_lo: f64,
        t_hi: f64,
        x_lo: f64,
        x_hi: f64,
    },

    #[error("grading exponent must satisfy r >= 1 and be finite, got {0}")]
    InvalidGrading(f64),

    #[error("unknown kernel `{0}` (expected one of: linear, sqrt_shift, exp)")]
    UnknownKernel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge: {0}")]
    Convergence(String),

    #[error("grid functions live on different meshes")]
    MeshMismatch,

    #[error("weight exponent {0} outside [0, 1)")]
    WeightTooSingular(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The inner fixed point F = f(t, u, F) failed to settle; this signals a
    /// violated M* < 1 hypothesis (or an unbounded right-hand side).
    #[error("inner fixed point diverged at t = {t} after {iters} iterations (is M* < 1?)")]
    InnerDivergence { t: f64, iters: usize },

    /// The contraction condition demands a partition step too small to
    /// represent; the Lipschitz constant M is too large for this domain.
    #[error("partition step degenerated at t = {0}: contraction demands a step below resolution")]
    DegenerateStep(f64),

    #[error("Picard iteration did not converge: residual {residual:.3e} after {iters} sweeps")]
    NonConvergence { residual: f64, iters: usize },

    #[error("series cap {0} reached before the envelope tail fell below tolerance")]
    SeriesCap(usize),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 1 for configuration/usage problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::UnknownKernel(_)
            | Error::InvalidParameter(_)
            | Error::InvalidGrading(_)
            | Error::WeightTooSingular(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
