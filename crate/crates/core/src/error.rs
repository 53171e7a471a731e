use thiserror::Error;

/// Everything that can go wrong inside the engines or the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wall collapsed at t = {t}: L(t) = {length}")]
    WallCollapse { t: f64, length: f64 },

    #[error("wall velocity is discontinuous at t = {t}; use the one-sided value")]
    VelocityJump { t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("theta series did not converge after {terms} terms (remainder bound {bound:e})")]
    ThetaConvergence { terms: usize, bound: f64 },

    #[error("theta lattice parameter must have Im(kappa) > 0, got kappa = {re} + {im}i")]
    KappaDomain { re: f64, im: f64 },

    #[error("quadrature did not converge: achieved relative error {achieved:e}")]
    Quadrature { achieved: f64 },

    #[error("{op} does not support the {traj} trajectory")]
    UnsupportedTrajectory { op: &'static str, traj: &'static str },

    #[error("{0} is only defined for even-parity states")]
    OddParity(&'static str),

    #[error("spectral tail bound not reached at cap N = {cap} (tail |c|^2 = {tail:e}, missing weight {missing:e})")]
    TailBound { cap: usize, tail: f64, missing: f64 },

    #[error("wavefunction node at x = {x}: |psi| = {magnitude:e}")]
    Node { x: f64, magnitude: f64 },

    #[error("localization violated: d = {d} exceeds L0/10 = {limit}")]
    Localization { d: f64, limit: f64 },

    #[error("norm drift {drift:e} exceeds {limit:e} at t = {t}")]
    NormDrift { t: f64, drift: f64, limit: f64 },

    #[error("linear solve failed: vanishing pivot at row {row}")]
    Solve { row: usize },

    #[error("time step violates dt * E_max / hbar < 0.5 (dt = {dt}, E_max = {e_max})")]
    Cfl { dt: f64, e_max: f64 },

    #[error("point {x} lies outside the sampled interval [-{half_width}, {half_width}]")]
    Extrapolation { x: f64, half_width: f64 },

    #[error("Bohmian trajectory reached a node neighbourhood at t = {t}, x = {x}")]
    TrajectoryNode { t: f64, x: f64 },

    #[error("tolerance check failed: {0}")]
    Tolerance(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 4 for IO, 3 for everything raised by the engines.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
            _ => 3,
        }
    }
}
