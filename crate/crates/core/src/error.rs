use thiserror::Error;

/// Scenario rejected by [`validate_scenario`](crate::validate_scenario).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("scenario has no epochs")]
    Empty,
    #[error("epoch {epoch}: duration must be positive and finite")]
    NonPositiveDuration { epoch: usize },
    #[error("epoch {epoch}, channel {channel}: gain must be positive and finite")]
    GainNonPositive { epoch: usize, channel: usize },
    #[error("epoch {epoch}: arrivals must be nonnegative and finite")]
    NegativeArrival { epoch: usize },
    #[error("processing cost must be nonnegative and finite")]
    NegativeProcessingCost,
    #[error("epoch {epoch}: energy arrival {energy} exceeds battery capacity {capacity}")]
    ArrivalExceedsCapacity { epoch: usize, energy: f64, capacity: f64 },
    #[error("{0}")]
    KindMismatch(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
    #[error("matrix shape {got:?} does not match scenario shape {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("data arrivals cannot be delivered by the deadline (slack {slack} nats)")]
    Infeasible { slack: f64 },
    #[error("no deadline within the horizon delivers all data")]
    NeverFeasible,
    #[error("two-level reference requires gain1 > gain2 > 0")]
    GainOrderViolation,
    #[error("barrier solver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("convex instance has no strictly feasible point")]
    InfeasibleInstance,
    #[error("brute-force search space too large ({cells} cells)")]
    TooLarge { cells: usize },
    #[error("dynamic-programming state space too large ({states} states, cap {cap})")]
    StateSpaceTooLarge { states: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
