use thiserror::Error;

/// Errors surfaced by the query engine, width solvers, and trainers.
#[derive(Debug, Error)]
pub enum Error {
    /// A value carried the wrong semiring tag for the ambient semiring.
    #[error("semiring mismatch: {0}")]
    Semiring(String),

    /// Schema-level misuse: duplicate variables, arity mismatch, mixed
    /// column tags, projection onto disjoint variables.
    #[error("schema violation: {0}")]
    Schema(String),

    /// An enumeration or LP budget was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A linear program had no feasible point (or was unbounded).
    #[error("linear program {0}")]
    Infeasible(String),

    /// No evaluation plan exists, or a plan invariant was violated.
    #[error("planning error: {0}")]
    Plan(String),

    /// Bad input data: missing relation, unparsable CSV, bad JSON.
    #[error("data error: {0}")]
    Data(String),

    /// A structure falls outside the supported shapes (e.g. an inequality
    /// graph that is not a forest).
    #[error("unsupported shape: {0}")]
    Shape(String),

    /// A brute-force oracle refused to run past its size budget.
    #[error("oracle budget exceeded: {0}")]
    Budget(String),

    /// Label domain violation in a training task.
    #[error("label error: {0}")]
    Label(String),

    /// An optimizer produced a non-finite objective.
    #[error("divergence: {0}")]
    Diverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
