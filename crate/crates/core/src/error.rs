use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("constraint row has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("interval list is empty")]
    EmptyIntervals,
    #[error("interval [{0}, {1}] is malformed (need a <= b, no NaN, finite or outer infinite endpoints)")]
    BadInterval(f64, f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("matrix is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("factorization B^t B misses C by {0}")]
    FactorMismatch(f64),
    #[error("external field has a non-finite coefficient or negative log weight")]
    BadField,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("component {0} has no interval of positive length")]
    PolarSet(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("mass polyhedron K is empty")]
    InfeasibleK,
    #[error("mass polyhedron K is unbounded")]
    UnboundedK,
    #[error("grid for component {0} is degenerate after truncation")]
    DegenerateGrid(usize),
    #[error("need at least {min} nodes per interval, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("component {0} is unbounded and needs a finite truncation radius")]
    MissingTruncation(usize),
    #[error("external field of component {0} does not grow at infinity")]
    Inadmissible(usize),
    #[error("{0}")]
    Dimension(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("every component carries zero mass")]
    AllInactive,
    #[error("weight vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("elliptic modulus must satisfy 0 <= k < 1, got {0}")]
    Modulus(f64),
    #[error("condenser parameter must exceed 2, got {0}")]
    CondenserParameter(f64),
    #[error("need b > a, got [{0}, {1}]")]
    Interval(f64, f64),
    #[error("grid cell [{0}, {1}] leaves the support interval")]
    GridOutside(f64, f64),
    #[error("need a2 <= 2 a1, got a1 = {0}, a2 = {1}")]
    Masses(f64, f64),
    #[error("circle level must be finite")]
    Level,
}
