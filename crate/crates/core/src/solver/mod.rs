//! LP/MILP abstraction, PLF encoding and solver backends.

mod branch;
mod encode;
#[cfg(feature = "highs")]
mod highs;
mod lp_file;
mod program;
mod simplex;

use std::time::{Duration, Instant};

pub use encode::{encode_plf, EncodeOptions, Encoding, PlfVars, DEFAULT_SEGMENT_CAP, EPS_OPEN};
pub use lp_file::{to_lp_string, write_lp_file};
pub use program::{Constraint, Direction, Program, RowSense, VarId, VarKind, Variable};

#[cfg(feature = "highs")]
pub use self::highs::HighsBackend;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical trouble: {0}")]
    Numerical(String),
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("node limit reached after {0} nodes")]
    NodeLimit(usize),
    #[error("problem is unbounded")]
    Unbounded,
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("unknown solver backend {0:?} (expected simplex or highs)")]
    UnknownBackend(String),
    #[error("PLF has {segments} segments, above the cap of {cap}")]
    TooManySegments { segments: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

impl Solution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Optimal(Solution),
    Infeasible(SolveStats),
    Error { error: SolverError, stats: SolveStats },
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolveStatus::Optimal(_))
    }

    pub fn stats(&self) -> SolveStats {
        match self {
            SolveStatus::Optimal(s) => s.stats,
            SolveStatus::Infeasible(s) => *s,
            SolveStatus::Error { stats, .. } => *stats,
        }
    }

    pub fn solution(&self) -> Option<&Solution> {
        match self {
            SolveStatus::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, program: &Program) -> SolveStatus;
}

/// Internal dense simplex with depth-first branch-and-bound on binaries.
#[derive(Debug, Clone)]
pub struct SimplexBackend {
    pub max_iterations: usize,
    pub max_nodes: usize,
    pub relative_gap: f64,
    pub integrality_tol: f64,
}

impl Default for SimplexBackend {
    fn default() -> Self {
        SimplexBackend {
            max_iterations: 200_000,
            max_nodes: 200_000,
            relative_gap: 1e-6,
            integrality_tol: 1e-6,
        }
    }
}

impl Backend for SimplexBackend {
    fn name(&self) -> &'static str {
        "simplex"
    }

    fn solve(&self, program: &Program) -> SolveStatus {
        let start = Instant::now();
        let mut status = match program.validate() {
            Ok(()) => branch::solve(program, self),
            Err(error) => SolveStatus::Error {
                error,
                stats: SolveStats::default(),
            },
        };
        let elapsed = start.elapsed();
        match &mut status {
            SolveStatus::Optimal(s) => s.stats.wall_time = elapsed,
            SolveStatus::Infeasible(s) => s.wall_time = elapsed,
            SolveStatus::Error { stats, .. } => stats.wall_time = elapsed,
        }
        status
    }
}

/// Backend names accepted by [`backend_by_name`].
pub fn available_backends() -> &'static [&'static str] {
    if cfg!(feature = "highs") {
        &["simplex", "highs"]
    } else {
        &["simplex"]
    }
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>, SolverError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "" | "simplex" | "internal" => Ok(Box::new(SimplexBackend::default())),
        #[cfg(feature = "highs")]
        "highs" => Ok(Box::new(HighsBackend::default())),
        other => Err(SolverError::UnknownBackend(other.to_string())),
    }
}

/// Backend selected by the `CASEMIX_SOLVER` environment variable (default `simplex`).
pub fn backend_from_env() -> Result<Box<dyn Backend>, SolverError> {
    backend_by_name(&std::env::var("CASEMIX_SOLVER").unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(p: &Program) -> SolveStatus {
        SimplexBackend::default().solve(p)
    }

    #[test]
    fn empty_program_is_optimal_at_zero() {
        let s = solve(&Program::new());
        assert_eq!(s.solution().unwrap().objective, 0.0);
    }

    #[test]
    fn toy_lp() {
        let mut p = Program::new();
        let x = p.add_var("x", 0.0, 100.0);
        let y = p.add_var("y", 0.0, 50.0);
        p.add_row("c", vec![(x, 1.0), (y, 2.0)], RowSense::Le, 100.0);
        p.set_objective(Direction::Maximize, vec![(x, 1.0), (y, 1.0)], 0.0);
        let s = solve(&p);
        assert!((s.solution().unwrap().objective - 100.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = Program::new();
        let x = p.add_free("x");
        p.add_row("lo", vec![(x, 1.0)], RowSense::Ge, 1.0);
        p.add_row("hi", vec![(x, 1.0)], RowSense::Le, 0.0);
        assert!(matches!(solve(&p), SolveStatus::Infeasible(_)));
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = Program::new();
        let x = p.add_nonneg("x");
        p.set_objective(Direction::Maximize, vec![(x, 1.0)], 0.0);
        assert!(matches!(
            solve(&p),
            SolveStatus::Error {
                error: SolverError::Unbounded,
                ..
            }
        ));
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x + y, x free with x >= -3 via row, y <= 2 only.
        let mut p = Program::new();
        let x = p.add_free("x");
        let y = p.add_var("y", f64::NEG_INFINITY, 2.0);
        p.add_row("r1", vec![(x, 1.0)], RowSense::Ge, -3.0);
        p.add_row("r2", vec![(y, 1.0), (x, -1.0)], RowSense::Ge, -1.0);
        p.set_objective(Direction::Minimize, vec![(x, 1.0), (y, 1.0)], 0.5);
        let s = solve(&p);
        let sol = s.solution().unwrap();
        assert!((sol.value(x) + 3.0).abs() < 1e-9);
        assert!((sol.value(y) + 4.0).abs() < 1e-9);
        assert!((sol.objective + 6.5).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_and_upper_bounds() {
        let mut p = Program::new();
        let a = p.add_var("a", 1.0, 4.0);
        let b = p.add_var("b", 0.0, 3.0);
        p.add_row("sum", vec![(a, 1.0), (b, 1.0)], RowSense::Eq, 5.0);
        p.set_objective(Direction::Maximize, vec![(a, 2.0), (b, 1.0)], 0.0);
        let sol = solve(&p).solution().cloned().unwrap();
        assert!((sol.value(a) - 4.0).abs() < 1e-9);
        assert!((sol.value(b) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binary_knapsack() {
        let w = [5.0, 4.0, 3.0, 2.0];
        let v = [10.0, 40.0, 30.0, 50.0];
        let mut p = Program::new();
        let xs: Vec<_> = (0..4).map(|i| p.add_binary(format!("x{i}"))).collect();
        p.add_row(
            "cap",
            xs.iter().zip(w).map(|(&x, w)| (x, w)).collect(),
            RowSense::Le,
            10.0,
        );
        p.set_objective(
            Direction::Maximize,
            xs.iter().zip(v).map(|(&x, v)| (x, v)).collect(),
            0.0,
        );
        let sol = solve(&p).solution().cloned().unwrap();
        assert!((sol.objective - 120.0).abs() < 1e-6);
        assert!(sol.values.iter().all(|x| x.abs() < 1e-9 || (x - 1.0).abs() < 1e-9));
    }

    #[test]
    fn unknown_backend_name() {
        assert!(matches!(
            backend_by_name("cplex"),
            Err(SolverError::UnknownBackend(_))
        ));
        assert_eq!(backend_by_name("simplex").unwrap().name(), "simplex");
    }
}
