//! Hospital case-mix planning engine.
//!
//! Builds the capacity-allocation program for a hospital instance, attaches
//! utility-based or goal-based scalarizations, and audits the resulting
//! caseloads for Pareto optimality.

pub mod engine;
pub mod io;
pub mod model;
pub mod pareto;
pub mod scalarize;
pub mod sensitivity;
pub mod solver;
pub mod utility;

pub use model::{
    build_model, compute_upper_bounds, CaseMixSpec, Caseload, HospitalInstance, ModelOptions,
};
pub use engine::{Engine, SolveOutcome, SolveRequest};
pub use pareto::{check_pareto, ParetoReport};
pub use scalarize::{
    repair, solve_asf, solve_gam, solve_gpm, AsfConfig, GoalConfig, GpmMode, Planner, RepairStrategy,
    SolveResult,
};
pub use solver::{Backend, SimplexBackend, SolveStatus};
pub use utility::{PiecewiseLinearUtility, UfSpec, UfTemplate};

use solver::SolverError;
use utility::UtilityError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: SolverError,
    },
    #[error("{0}: no feasible solution")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Utility(_) | Error::Json { .. })
    }
}
