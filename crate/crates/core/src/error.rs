use std::fmt;

use thiserror::Error;

/// Where in the discretization something went wrong.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// Cell average `(i, j)`.
    Cell { i: isize, j: isize },
    /// Lattice node in half-cell indices; `(2i+1, 2j+1)` is the center of cell `(i, j)`.
    Node { i: isize, j: isize },
    /// Not tied to a DoF (pointwise evaluation, configuration, ...).
    Point,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Cell { i, j } => write!(f, "cell ({i}, {j})"),
            Location::Node { i, j } => write!(f, "node ({i}/2, {j}/2)"),
            Location::Point => write!(f, "pointwise state"),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("nonpositive density {rho}")]
    NonpositiveDensity { rho: f64 },

    #[error("inadmissible state at {location}: rho = {rho:e}, p = {p:e}")]
    InadmissibleState { location: Location, rho: f64, p: f64 },

    #[error("positivity violation at {location}: {detail}")]
    PpViolation { location: Location, detail: String },

    #[error("no admissible state at {0}")]
    NoAdmissibleState(Location),

    #[error("non-finite value at {0}")]
    NonFinite(Location),

    /// The first-order fallback produced an inadmissible state; the step must be redone with a smaller dt.
    #[error("step rejected at {0}: first-order fallback left the admissible set")]
    StepRejected(Location),

    #[error("step {step}, stage {stage}, t = {time:e}: {source}")]
    Aborted {
        step: usize,
        stage: usize,
        time: f64,
        #[source]
        source: Box<SolverError>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("bad problem parameters: {0}")]
    BadParams(String),

    #[error("problem `{0}` has no exact solution")]
    NoExactSolution(String),

    #[error("pressure root did not converge after {0} bisection steps")]
    ConvergenceFailure(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SolverError {
    /// The innermost error, looking through [`SolverError::Aborted`].
    pub fn root(&self) -> &SolverError {
        match self {
            SolverError::Aborted { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures caused by leaving the admissible set.
    pub fn is_positivity_failure(&self) -> bool {
        matches!(
            self.root(),
            SolverError::NonpositiveDensity { .. }
                | SolverError::InadmissibleState { .. }
                | SolverError::PpViolation { .. }
                | SolverError::NoAdmissibleState(_)
                | SolverError::NonFinite(_)
                | SolverError::StepRejected(_)
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self.root(),
            SolverError::Config(_)
                | SolverError::UnknownProblem(_)
                | SolverError::BadParams(_)
                | SolverError::NoExactSolution(_)
        )
    }
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;
