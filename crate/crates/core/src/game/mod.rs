//! Resource-allocation games: evaluation, best-response dynamics, Nash checks, the
//! exhaustive equilibrium oracle and matroid action sets.

mod dynamics;
mod instance;
pub mod matroid;
mod oracle;

pub use dynamics::{
    best_response, is_nash, run_best_response_dynamics, Deviation, DynamicsOptions,
    DynamicsTrace, Move, NashCheck, Response, Schedule, RNG_ALGORITHM,
};
pub use instance::{Action, ActionSet, Allocation, GameInstance, Resource};
pub use matroid::{bases_check, matroid_check, uniform_family, MatroidCheck, MatroidViolation};
pub use oracle::{exhaustive_oracle, OracleReport, DEFAULT_ORACLE_CAP};
