//! Request-level entry points shared by the command line and the HTTP service.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::io::UfConfig;
use crate::model::{GroupBound, HospitalInstance};
use crate::pareto::{check_pareto, ParetoReport};
use crate::scalarize::{
    repair, solve_asf, solve_gam, solve_gpm, AsfConfig, GamWeights, GoalConfig, GpmMode, Planner,
    RepairStrategy, SolveResult, TieBreak,
};
use crate::sensitivity::{run_sweep, SweepReport, SweepSpec};
use crate::solver::Backend;
use crate::utility::{UfSpec, UfTemplate};
use crate::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// Utility-function model with the ASF objective.
    #[default]
    Ufm,
    Gam,
    Gpm,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsfObjective {
    #[default]
    Mmu,
    Msu,
    /// `eps1 = 1`, `eps2 = 0.01` unless overridden.
    Asf,
}

/// One solve as requested by a caller.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveRequest {
    pub method: SolveMethod,
    pub objective: AsfObjective,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub tie_break: TieBreak,
    /// Goals for GAM/GPM; the treatment limits when absent.
    pub goals: Option<Vec<f64>>,
    pub gam_weights: GamWeights,
    pub gpm_mode: GpmMode,
    /// Absolute rather than relative GPM deviations.
    pub absolute: bool,
    pub over_weights: Vec<f64>,
    pub under_weights: Vec<f64>,
    /// Follow-up model applied to the caseload found.
    pub repair: Option<RepairStrategy>,
}

impl SolveRequest {
    pub fn asf(objective: AsfObjective) -> Self {
        SolveRequest {
            objective,
            ..Default::default()
        }
    }

    pub fn asf_config(&self) -> AsfConfig {
        let (e1, e2) = match self.objective {
            AsfObjective::Mmu => (1.0, 0.0),
            AsfObjective::Msu => (0.0, 1.0),
            AsfObjective::Asf => (1.0, 0.01),
        };
        let mut cfg = AsfConfig::new(self.eps1.unwrap_or(e1), self.eps2.unwrap_or(e2));
        cfg.tie_break = self.tie_break;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    #[serde(flatten)]
    pub result: SolveResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repaired: Option<SolveResult>,
}

/// An instance with its treatment limits and a solver backend.
#[derive(Clone)]
pub struct Engine {
    instance: Arc<HospitalInstance>,
    bounds: Vec<f64>,
    backend: Arc<dyn Backend>,
}

impl Engine {
    /// Validates the instance and settles its treatment limits.
    pub fn new(instance: HospitalInstance, backend: Arc<dyn Backend>) -> Result<Engine, Error> {
        instance.validate()?;
        let bounds = crate::model::planning_bounds(&instance, backend.as_ref())?;
        Ok(Engine {
            instance: Arc::new(instance),
            bounds,
            backend,
        })
    }

    pub fn instance(&self) -> &HospitalInstance {
        &self.instance
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn backend(&self) -> &dyn Backend {
        self.backend.as_ref()
    }

    pub fn bounds_table(&self) -> Vec<GroupBound> {
        self.instance
            .groups
            .iter()
            .zip(&self.bounds)
            .map(|(g, &bound)| GroupBound {
                group: g.id.clone(),
                bound,
            })
            .collect()
    }

    pub fn planner(&self) -> Planner<'_> {
        Planner::new(&self.instance, self.bounds.clone(), self.backend.as_ref())
            .expect("engine state is validated")
    }

    /// The linear configuration used when none is supplied.
    pub fn default_uf_config() -> UfConfig {
        UfConfig::uniform(&UfSpec::new(UfTemplate::Uf1))
    }

    pub fn solve(&self, uf: Option<&UfConfig>, req: &SolveRequest) -> Result<SolveOutcome, Error> {
        let planner = self.planner();
        let fallback = Engine::default_uf_config();
        let uf = uf.unwrap_or(&fallback);
        let goal_config = || GoalConfig {
            goals: req.goals.clone().unwrap_or_else(|| self.bounds.clone()),
            gam_weights: req.gam_weights.clone(),
            over_weights: req.over_weights.clone(),
            under_weights: req.under_weights.clone(),
            relative: !req.absolute,
        };
        let (result, plfs) = match req.method {
            SolveMethod::Ufm => {
                let plfs = uf.resolve(&self.instance, &self.bounds)?;
                let cfg = req.asf_config().with_weights(uf.weights(&self.instance)?);
                (solve_asf(&planner, &plfs, &cfg)?, plfs)
            }
            SolveMethod::Gam => (solve_gam(&planner, &goal_config())?, planner.linear_utilities()?),
            SolveMethod::Gpm => (
                solve_gpm(&planner, &goal_config(), req.gpm_mode)?,
                planner.linear_utilities()?,
            ),
        };
        let repaired = match &req.repair {
            Some(strategy) => Some(repair(&planner, &result.patients(), strategy, &plfs)?),
            None => None,
        };
        Ok(SolveOutcome { result, repaired })
    }

    pub fn sweep(&self, spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepReport, Error> {
        run_sweep(&self.planner(), spec, jobs)
    }

    pub fn pareto(&self, base: &[f64]) -> Result<ParetoReport, Error> {
        check_pareto(&self.planner(), base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::bundled_toy;
    use crate::solver::SimplexBackend;

    #[test]
    fn default_config_is_linear() {
        let e = Engine::new(bundled_toy(), Arc::new(SimplexBackend::default())).unwrap();
        let out = e.solve(None, &SolveRequest::asf(AsfObjective::Msu)).unwrap();
        // Both groups earn one utility point per theatre hour.
        assert!((out.result.sum_u - 100.0).abs() < 1e-6);
        assert!(out.repaired.is_none());
    }

    #[test]
    fn repair_follows_the_solve() {
        let e = Engine::new(bundled_toy(), Arc::new(SimplexBackend::default())).unwrap();
        let mut req = SolveRequest {
            method: SolveMethod::Gam,
            goals: Some(vec![10.0, 10.0]),
            ..Default::default()
        };
        req.repair = Some(RepairStrategy::sum_overachieve());
        let out = e.solve(None, &req).unwrap();
        let rep = out.repaired.unwrap();
        assert!((rep.throughput - 90.0).abs() < 1e-6, "{}", rep.throughput);
    }

    #[test]
    fn outcome_json_round_trips() {
        let e = Engine::new(bundled_toy(), Arc::new(SimplexBackend::default())).unwrap();
        let mut req = SolveRequest::asf(AsfObjective::Asf);
        req.repair = Some(RepairStrategy::Preference { group: "B".into() });
        let out = e.solve(None, &req).unwrap();
        let text = serde_json::to_string(&out).unwrap();
        assert_eq!(serde_json::from_str::<SolveOutcome>(&text).unwrap(), out);
    }
}
