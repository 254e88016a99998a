use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {re}+{im}i lies outside the open unit disc")]
    Domain { re: f64, im: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("boundary values do not converge near angle {angle} (radial disagreement {disagreement:e})")]
    NotBoundaryRegular { angle: f64, disagreement: f64 },

    #[error("recovered boundary density has mass {mass}, too far from 1")]
    NotNormalizable { mass: f64 },

    #[error("angular gap {gap:e} between particles {k} and {next} is below the gap floor")]
    GapUnderflow { k: usize, next: usize, gap: f64 },

    #[error("particle ordering could not be preserved at t = {t} (sub-stepping exhausted)")]
    OrderingViolated { t: f64 },

    #[error("run {run} failed at t = {t}: {source}")]
    Run {
        run: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("ODE solver failure at t = {t}: {reason}")]
    Solver { t: f64, reason: String },

    #[error("reverse flow came within {distance:e} of a driving atom at s = {s}")]
    Singularity { s: f64, distance: f64 },

    #[error("Newton continuation failed at t = {t} for z = {re}+{im}i")]
    ContinuationFailed { t: f64, re: f64, im: f64 },

    #[error("measure has vanishing first moment (|m1| = {m1_abs:e})")]
    ZeroMeanMeasure { m1_abs: f64 },

    #[error("series tail {tail:e} at the test radius exceeds tolerance")]
    InconclusiveTruncation { tail: f64 },

    #[error("x = {x} lies inside the support of the measure")]
    InsideSupport { x: f64 },

    #[error("measures do not share atom locations: {0}")]
    MismatchedSupports(String),

    #[error("internal numerical error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
