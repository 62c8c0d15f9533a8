use std::path::PathBuf;

use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular invariant: a'(u) vanishes at u = {u}")]
    SingularInvariant { u: f64 },

    #[error("blowup suspected at t = {t}: {reason}")]
    BlowupSuspected { t: f64, reason: String },

    #[error("resolution exhausted at t = {t} (spectral tail {tail:e} relative)")]
    ResolutionExhausted { t: f64, tail: f64 },

    #[error("{what} did not converge; residual history {residuals:?}")]
    NonConvergence { what: String, residuals: Vec<f64> },

    #[error("multivalued region at x = {x}, t = {t}: characteristics cross in [{lo}, {hi}]")]
    MultivaluedRegion { x: f64, t: f64, lo: f64, hi: f64 },

    #[error("near caustic at x = {x}, t = {t}: |t a' + Phi'| = {denominator:e}")]
    NearCaustic { x: f64, t: f64, denominator: f64 },

    #[error("genericity violated: {0}")]
    Genericity(String),

    #[error("degenerate dispersion: b1(u_c) = {0}")]
    DegenerateDispersion(f64),

    #[error("point outside trust window: {0}")]
    OutOfWindow(String),

    #[error("near-critical background: |v_x| = {vx:e} at x = {x}")]
    NearCritical { x: f64, vx: f64 },

    #[error("integrability obstruction: {0}")]
    Obstruction(String),

    #[error("empty window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("non-positive value {value} at index {index} in log-log data")]
    NonPositive { index: usize, value: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("accuracy target {target:e} missed, achieved {achieved:e}")]
    Accuracy { target: f64, achieved: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
