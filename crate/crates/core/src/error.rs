//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wrong reaction class: expected {expected}, got {got}")]
    WrongClass {
        expected: &'static str,
        got: &'static str,
    },
    #[error("subcritical speed {nu} < minimal speed {c_min}")]
    SubcriticalSpeed { nu: f64, c_min: f64 },
    #[error("no heteroclinic connection: {0}")]
    NoConnection(String),
    #[error("numerical instability at step {step} (t = {t}): {detail}")]
    NumericalInstability { step: usize, t: f64, detail: String },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("window [{lo}, {hi}] outside domain")]
    WindowOutsideDomain { lo: f64, hi: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("no admissible bump: {0}")]
    NoAdmissibleBump(String),
    #[error("bad modification: {0}")]
    BadModification(String),
    #[error("inconsistent speeds: c_m = {c_m} <= c_b = {c_b}")]
    InconsistentSpeeds { c_m: f64, c_b: f64 },
    #[error("no threshold found: {0}")]
    NoThresholdFound(String),
    #[error("undecided outcome: {0}")]
    Undecided(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::WrongClass { .. }
            | Error::SubcriticalSpeed { .. }
            | Error::WrongRegime(_)
            | Error::WindowOutsideDomain { .. }
            | Error::InconsistentSpeeds { .. }
            | Error::NoAdmissibleBump(_)
            | Error::BadModification(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
