use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("hypothesis (V) violated: {0}")]
    PotentialNotCoercive(String),

    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis { hypothesis: &'static str, detail: String },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("no sign change of J along the ray up to t = {t_max:.3e}; check (F3) and the declared mu")]
    NoSignChange { t_max: f64 },

    #[error("mountain-pass geometry gate failed: {0}")]
    GateFailed(String),

    #[error("level bracket violated: c = {level:.12e} outside [{lower:.12e}, {upper:.12e}]")]
    BracketViolation { level: f64, lower: f64, upper: f64 },

    #[error("singular collapse at eps = {eps:.3e}: min u = {min_u:.3e}; {diagnostic}")]
    SingularCollapse { eps: f64, min_u: f64, diagnostic: String },

    #[error("field format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
