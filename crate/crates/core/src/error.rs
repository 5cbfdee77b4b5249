use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("propagator is not positive definite (2z - K~ = {gap:e})")]
    NotPositiveDefinite { gap: f64 },

    #[error("quadrature did not converge: {context} (value {value:e}, error estimate {error:e})")]
    Quadrature {
        context: &'static str,
        value: f64,
        error: f64,
    },

    #[error("no sign change on bracket [{lo:e}, {hi:e}] (f = {f_lo:e}, {f_hi:e})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("divergent: {0}")]
    Divergent(String),

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("tail window holds no samples; need rho >= {required_min_rho}")]
    TailWindow { required_min_rho: i64 },

    #[error("dense system of size {size} exceeds the cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("engine {0} is not supported here")]
    UnsupportedEngine(String),
}

impl Error {
    /// True for failures of a numerical solve (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::Bracket { .. } | Error::Divergent(_) | Error::Fit(_)
        )
    }
}
