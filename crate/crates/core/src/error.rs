//! Crate-wide error type.

use crate::gurson::PointState;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Local constitutive Newton failed even after subincrementation. Carries
    /// the state it was called with so the caller can report where.
    #[error("material update did not converge (|phi|={phi_residual:.3e}): state: \
             eps_p_bar={} f={} p_trial={p_trial:.4e} q_trial={q_trial:.4e}",
            state.eps_p_bar, state.f)]
    MaterialNonConvergence {
        state: Box<PointState>,
        p_trial: f64,
        q_trial: f64,
        phi_residual: f64,
    },

    #[error("element {elem}: non-positive Jacobian determinant ({det:.3e})")]
    BadJacobian { elem: usize, det: f64 },

    #[error("equilibrium iteration failed: {0}")]
    Equilibrium(String),

    #[error("transport step failed: {0}")]
    Transport(String),

    #[error("hydrogen chemistry out of domain: {0}")]
    Hydrogen(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("config error: {0}")]
    ConfigGeneral(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate a bad input file rather than a solver
    /// breakdown; the CLI maps these to a distinct exit code.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::ConfigGeneral(_) | Error::InvalidParam(_)
        )
    }
}
