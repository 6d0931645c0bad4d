use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mass vector has no positive masses")]
    EmptyVector,
    #[error("invalid mass {0}: masses must be finite and non-negative")]
    InvalidMass(f64),
    #[error("perturbation mass {0} is not strictly positive")]
    NonPositiveTheta(f64),
    #[error("quantile weights are all zero (degenerate distribution)")]
    DegenerateDistribution,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("alpha = {0} lies outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("invalid limit parameter: {0}")]
    InvalidParams(String),
    #[error("need at least two components to propose a merge, found {0}")]
    TooFewComponents(usize),
    #[error("negative horizon {0}")]
    NegativeHorizon(f64),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("trajectory was recorded on a grid; full event data is required")]
    InsufficientData,
    #[error("trajectory horizon {horizon} is too short for grid points {deficient:?}")]
    HorizonTooShort { horizon: f64, deficient: Vec<f64> },
    #[error("time {0} was not recorded in this grid-mode trajectory")]
    NotRecorded(f64),
    #[error("state space too large: {kappa} components (limit {limit})")]
    StateSpaceTooLarge { kappa: usize, limit: usize },
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("ensemble needs at least {needed} paths, got {got}")]
    TooFewPaths { needed: usize, got: usize },
    #[error("paths are not on a common grid")]
    MismatchedGrids,
    #[error("function increases between sample points {0} and {1}")]
    IncreasingFunction(f64, f64),
    #[error("grid point {0} is at or beyond 1/sigma2 = {1}")]
    BeyondMomentWindow(f64, f64),
    #[error("worker pool: {0}")]
    WorkerPool(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
