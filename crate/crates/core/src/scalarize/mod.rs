//! Single-objective scalarizations of the multicriteria planning problem.

mod asf;
mod goal;
mod repair;

pub use asf::{solve_asf, AsfConfig, TieBreak};
pub use goal::{solve_gam, solve_gpm, GamWeights, GoalConfig, GpmMode};
pub use repair::{repair, RepairStrategy};

use serde::{Deserialize, Serialize};

use crate::model::{build_model, expect_optimal, Caseload, CmpModel, HospitalInstance, ModelOptions};
use crate::solver::{Backend, Program, Solution};
use crate::utility::{instantiate, PiecewiseLinearUtility, UfSpec, UfTemplate};
use crate::Error;

/// Below this throughput a caseload counts as empty.
pub const ZERO_THROUGHPUT: f64 = 1e-6;
/// Slack subtracted from caseload floors to absorb round-off.
pub const FLOOR_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ufm,
    Gam,
    Gpm,
    Repair,
    Throughput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub id: String,
    pub patients: f64,
    pub utility: f64,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_mix_pct: Option<f64>,
}

/// Deviations of a goal-based solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalOutcome {
    pub goals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub over: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub under: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub backend: String,
    pub iterations: usize,
    pub nodes: usize,
    pub binaries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub method: Method,
    /// Value of the method's own objective at the returned caseload.
    pub objective: f64,
    pub throughput: f64,
    pub sum_u: f64,
    pub min_u: f64,
    pub zeroed: bool,
    pub groups: Vec<GroupOutcome>,
    pub caseload: Caseload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalOutcome>,
    pub solver: SolverInfo,
}

impl SolveResult {
    pub fn utilities(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.utility).collect()
    }

    pub fn patients(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.patients).collect()
    }

    /// Recomputes the utility aggregates from `groups`.
    pub(crate) fn rescore(&mut self) {
        self.sum_u = self.groups.iter().map(|g| g.utility).sum();
        self.min_u = if self.groups.is_empty() {
            0.0
        } else {
            self.groups.iter().map(|g| g.utility).fold(f64::INFINITY, f64::min)
        };
        self.zeroed = self.throughput < ZERO_THROUGHPUT && self.min_u <= 0.0;
    }
}

/// Instance, treatment limits and backend shared by every scalarization.
///
/// Each group's output is capped at its limit, which is also the utility domain.
pub struct Planner<'a> {
    instance: &'a HospitalInstance,
    bounds: Vec<f64>,
    backend: &'a dyn Backend,
    pool_resources: bool,
}

impl<'a> Planner<'a> {
    pub fn new(
        instance: &'a HospitalInstance,
        bounds: Vec<f64>,
        backend: &'a dyn Backend,
    ) -> Result<Self, Error> {
        instance.validate()?;
        if bounds.len() != instance.groups.len() {
            return Err(Error::validation(
                "/bounds",
                format!("expected {} bounds, got {}", instance.groups.len(), bounds.len()),
            ));
        }
        for (g, b) in instance.groups.iter().zip(&bounds) {
            if !(b.is_finite() && *b >= 0.0) {
                return Err(Error::validation(format!("/bounds/{}", g.id), "must be nonnegative"));
            }
        }
        Ok(Planner {
            instance,
            bounds,
            backend,
            pool_resources: true,
        })
    }

    /// Planner over the instance's published or computed treatment limits.
    pub fn with_planning_bounds(
        instance: &'a HospitalInstance,
        backend: &'a dyn Backend,
    ) -> Result<Self, Error> {
        let bounds = crate::model::planning_bounds(instance, backend)?;
        Planner::new(instance, bounds, backend)
    }

    pub fn pool_resources(mut self, on: bool) -> Self {
        self.pool_resources = on;
        self
    }

    pub fn instance(&self) -> &'a HospitalInstance {
        self.instance
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn backend(&self) -> &'a dyn Backend {
        self.backend
    }

    pub fn model(&self) -> Result<CmpModel, Error> {
        build_model(
            self.instance,
            None,
            &ModelOptions {
                pool_resources: self.pool_resources,
                output_caps: Some(self.bounds.clone()),
            },
        )
    }

    /// One linear UF1 utility per group.
    pub fn linear_utilities(&self) -> Result<Vec<PiecewiseLinearUtility>, Error> {
        self.utilities_for(&UfSpec::new(UfTemplate::Uf1))
    }

    /// The same spec instantiated for every group.
    pub fn utilities_for(&self, spec: &UfSpec) -> Result<Vec<PiecewiseLinearUtility>, Error> {
        self.bounds
            .iter()
            .map(|&b| instantiate(spec, b).map_err(Error::from))
            .collect()
    }

    pub(crate) fn run(&self, program: &Program, context: &str) -> Result<Solution, Error> {
        let status = self.backend.solve(program);
        let sol = expect_optimal(&status, context)?.clone();
        tracing::debug!(
            context,
            backend = self.backend.name(),
            iterations = sol.stats.iterations,
            nodes = sol.stats.nodes,
            wall_ms = sol.stats.wall_time.as_secs_f64() * 1e3,
            "solved"
        );
        Ok(sol)
    }

    pub(crate) fn check_plfs(&self, plfs: &[PiecewiseLinearUtility]) -> Result<(), Error> {
        if plfs.len() != self.instance.groups.len() {
            return Err(Error::validation(
                "/utilities",
                format!("expected {} utilities, got {}", self.instance.groups.len(), plfs.len()),
            ));
        }
        for ((g, p), &b) in self.instance.groups.iter().zip(plfs).zip(&self.bounds) {
            if p.domain_max() + 1e-9 * b.max(1.0) < b {
                return Err(Error::validation(
                    format!("/utilities/{}", g.id),
                    format!("utility domain {} is shorter than the limit {b}", p.domain_max()),
                ));
            }
        }
        Ok(())
    }

    /// Reads, re-checks and scores the caseload held in `sol`.
    pub(crate) fn summarize(
        &self,
        model: &CmpModel,
        sol: &Solution,
        plfs: &[PiecewiseLinearUtility],
        method: Method,
        objective: f64,
    ) -> Result<SolveResult, Error> {
        let caseload = model.caseload(self.instance, sol);
        caseload.check(self.instance)?;
        Ok(self.score(caseload, plfs, method, objective, sol))
    }

    pub(crate) fn score(
        &self,
        caseload: Caseload,
        plfs: &[PiecewiseLinearUtility],
        method: Method,
        objective: f64,
        sol: &Solution,
    ) -> SolveResult {
        let throughput = caseload.total();
        let mix = caseload.case_mix_pct();
        let groups: Vec<GroupOutcome> = caseload
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| GroupOutcome {
                id: g.id.clone(),
                patients: g.total,
                utility: plfs[i].evaluate_clamped(g.total),
                bound: self.bounds[i],
                case_mix_pct: mix.as_ref().map(|m| m[i]),
            })
            .collect();
        let mut r = SolveResult {
            method,
            objective,
            throughput,
            sum_u: 0.0,
            min_u: 0.0,
            zeroed: false,
            groups,
            caseload,
            goal: None,
            solver: SolverInfo {
                backend: self.backend.name().to_string(),
                iterations: sol.stats.iterations,
                nodes: sol.stats.nodes,
                binaries: 0,
            },
        };
        r.rescore();
        r
    }

    /// Adds `n_g >= floor_g - FLOOR_SLACK` rows (skipping `skip`).
    pub(crate) fn add_floors(&self, model: &mut CmpModel, floors: &[f64], skip: Option<usize>) {
        for (i, (g, &f)) in model.groups.iter().zip(floors).enumerate() {
            if Some(i) == skip {
                continue;
            }
            let lo = (f - FLOOR_SLACK).max(0.0);
            if lo > 0.0 {
                model.program.add_row(
                    format!("floor[{}]", self.instance.groups[i].id),
                    vec![(g.total, 1.0)],
                    crate::solver::RowSense::Ge,
                    lo,
                );
            }
        }
    }
}
