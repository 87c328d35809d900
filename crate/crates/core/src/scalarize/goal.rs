use serde::{Deserialize, Serialize};

use super::{GoalOutcome, Method, Planner, SolveResult};
use crate::solver::{Direction, RowSense, VarId};
use crate::Error;

/// Weights of the goal-attainment band `goal - w*delta <= n <= goal + w*delta`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GamWeights {
    /// `w_g = goal_g`, so `delta` is a relative shortfall.
    #[default]
    Relative,
    Absolute,
    /// Signed per-group weights, used as given.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpmMode {
    /// Weighted sum of over- and under-deviations.
    #[default]
    Sum,
    /// Largest weighted under-deviation.
    MinimaxUnder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalConfig {
    /// Target caseload per group, within `[0, limit]`.
    pub goals: Vec<f64>,
    #[serde(default)]
    pub gam_weights: GamWeights,
    /// Over-achievement weights; empty means all ones.
    #[serde(default)]
    pub over_weights: Vec<f64>,
    /// Under-achievement weights; empty means all ones.
    #[serde(default)]
    pub under_weights: Vec<f64>,
    /// Divide goal-programming deviations by the goal.
    #[serde(default = "yes")]
    pub relative: bool,
}

fn yes() -> bool {
    true
}

impl GoalConfig {
    pub fn new(goals: Vec<f64>) -> Self {
        GoalConfig {
            goals,
            gam_weights: GamWeights::Relative,
            over_weights: Vec::new(),
            under_weights: Vec::new(),
            relative: true,
        }
    }

    pub fn validate(&self, planner: &Planner<'_>) -> Result<(), Error> {
        let inst = planner.instance();
        let n = inst.groups.len();
        if self.goals.len() != n {
            return Err(Error::validation(
                "/goals",
                format!("expected {n} goals, got {}", self.goals.len()),
            ));
        }
        for ((g, &goal), &bound) in inst.groups.iter().zip(&self.goals).zip(planner.bounds()) {
            if !(goal.is_finite() && goal >= 0.0 && goal <= bound * (1.0 + 1e-9) + 1e-9) {
                return Err(Error::validation(
                    format!("/goals/{}", g.id),
                    format!("goal {goal} must lie within [0, {bound}]"),
                ));
            }
        }
        if let GamWeights::Custom(w) = &self.gam_weights {
            check_len("/gam_weights", w, n)?;
            if let Some(i) = w.iter().position(|x| !x.is_finite()) {
                return Err(Error::validation(format!("/gam_weights/{i}"), "must be finite"));
            }
        }
        for (path, w) in [("/over_weights", &self.over_weights), ("/under_weights", &self.under_weights)] {
            if w.is_empty() {
                continue;
            }
            check_len(path, w, n)?;
            if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::validation(format!("{path}/{i}"), "must be nonnegative"));
            }
        }
        Ok(())
    }

    fn gam_weight(&self, g: usize) -> f64 {
        match &self.gam_weights {
            GamWeights::Relative => self.goals[g],
            GamWeights::Absolute => 1.0,
            GamWeights::Custom(w) => w[g],
        }
    }
}

fn check_len(path: &str, w: &[f64], n: usize) -> Result<(), Error> {
    if w.len() != n {
        return Err(Error::validation(path, format!("expected {n} weights, got {}", w.len())));
    }
    Ok(())
}

fn weight(w: &[f64], g: usize) -> f64 {
    w.get(g).copied().unwrap_or(1.0)
}

/// Goal attainment: minimize `delta >= 0` subject to every group's band.
pub fn solve_gam(planner: &Planner<'_>, cfg: &GoalConfig) -> Result<SolveResult, Error> {
    cfg.validate(planner)?;
    let inst = planner.instance();
    let mut model = planner.model()?;
    let delta = model.program.add_nonneg("delta");
    for (i, g) in model.groups.clone().iter().enumerate() {
        let w = cfg.gam_weight(i);
        let goal = cfg.goals[i];
        let id = &inst.groups[i].id;
        model.program.add_row(
            format!("gam_hi[{id}]"),
            vec![(g.total, 1.0), (delta, -w)],
            RowSense::Le,
            goal,
        );
        model.program.add_row(
            format!("gam_lo[{id}]"),
            vec![(g.total, 1.0), (delta, w)],
            RowSense::Ge,
            goal,
        );
    }
    model
        .program
        .set_objective(Direction::Minimize, vec![(delta, 1.0)], 0.0);

    let sol = match planner.run(&model.program, "goal attainment") {
        Err(e) if e.is_infeasible() => {
            let negative: Vec<&str> = (0..inst.groups.len())
                .filter(|&i| cfg.gam_weight(i) < 0.0)
                .map(|i| inst.groups[i].id.as_str())
                .collect();
            if negative.is_empty() {
                return Err(e);
            }
            return Err(Error::Infeasible(format!(
                "goal attainment with negative weights on {}: a negative weight closes the \
                 band around its goal, so the goals must then be met exactly",
                negative.join(", ")
            )));
        }
        other => other?,
    };
    let d = sol.value(delta);
    let plfs = planner.linear_utilities()?;
    let mut r = planner.summarize(&model, &sol, &plfs, Method::Gam, d)?;
    r.goal = Some(GoalOutcome {
        goals: cfg.goals.clone(),
        delta: Some(d),
        over: Vec::new(),
        under: Vec::new(),
    });
    Ok(r)
}

/// Goal programming with one over/under deviation pair per group.
///
/// A binary per group keeps at most one deviation positive wherever both
/// directions are possible.
pub fn solve_gpm(planner: &Planner<'_>, cfg: &GoalConfig, mode: GpmMode) -> Result<SolveResult, Error> {
    cfg.validate(planner)?;
    let inst = planner.instance();
    if cfg.relative {
        if let Some(i) = cfg.goals.iter().position(|&g| g <= 0.0) {
            return Err(Error::validation(
                format!("/goals/{}", inst.groups[i].id),
                "relative deviations need a positive goal",
            ));
        }
    }
    let mut model = planner.model()?;
    let mut devs: Vec<(VarId, VarId)> = Vec::new();
    for (i, g) in model.groups.clone().iter().enumerate() {
        let id = &inst.groups[i].id;
        let goal = cfg.goals[i];
        let room = (planner.bounds()[i] - goal).max(0.0);
        let over = model.program.add_var(format!("over[{id}]"), 0.0, room);
        let under = model.program.add_var(format!("under[{id}]"), 0.0, goal);
        model.program.add_row(
            format!("goal[{id}]"),
            vec![(g.total, 1.0), (over, -1.0), (under, 1.0)],
            RowSense::Eq,
            goal,
        );
        if room > 0.0 && goal > 0.0 {
            let lambda = model.program.add_binary(format!("side[{id}]"));
            model.program.add_row(
                format!("over_on[{id}]"),
                vec![(over, 1.0), (lambda, -room)],
                RowSense::Le,
                0.0,
            );
            model.program.add_row(
                format!("under_on[{id}]"),
                vec![(under, 1.0), (lambda, goal)],
                RowSense::Le,
                goal,
            );
        }
        devs.push((over, under));
    }
    let scale = |i: usize| if cfg.relative { cfg.goals[i] } else { 1.0 };
    match mode {
        GpmMode::Sum => {
            let mut terms = Vec::new();
            for (i, &(o, u)) in devs.iter().enumerate() {
                terms.push((o, weight(&cfg.over_weights, i) / scale(i)));
                terms.push((u, weight(&cfg.under_weights, i) / scale(i)));
            }
            model.program.set_objective(Direction::Minimize, terms, 0.0);
        }
        GpmMode::MinimaxUnder => {
            let t = model.program.add_nonneg("worst_under");
            for (i, &(_, u)) in devs.iter().enumerate() {
                model.program.add_row(
                    format!("worst[{}]", inst.groups[i].id),
                    vec![(t, 1.0), (u, -weight(&cfg.under_weights, i) / scale(i))],
                    RowSense::Ge,
                    0.0,
                );
            }
            model
                .program
                .set_objective(Direction::Minimize, vec![(t, 1.0)], 0.0);
        }
    }

    let sol = planner.run(&model.program, "goal programming")?;
    let over: Vec<f64> = devs.iter().map(|&(o, _)| sol.value(o).max(0.0)).collect();
    let under: Vec<f64> = devs.iter().map(|&(_, u)| sol.value(u).max(0.0)).collect();
    for (i, (o, u)) in over.iter().zip(&under).enumerate() {
        let tol = 1e-6 * cfg.goals[i].max(1.0);
        if o.min(*u) > tol {
            return Err(Error::Solver {
                context: format!("goal programming, group {}", inst.groups[i].id),
                source: crate::solver::SolverError::Numerical(format!(
                    "over- and under-deviation both positive ({o}, {u})"
                )),
            });
        }
    }
    let plfs = planner.linear_utilities()?;
    let mut r = planner.summarize(&model, &sol, &plfs, Method::Gpm, sol.objective)?;
    r.solver.binaries = model.program.num_binaries();
    r.goal = Some(GoalOutcome {
        goals: cfg.goals.clone(),
        delta: None,
        over,
        under,
    });
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::bundled_toy;
    use crate::solver::SimplexBackend;
    use approx::assert_abs_diff_eq;

    #[test]
    fn toy_gam_absolute_weights() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let mut cfg = GoalConfig::new(vec![100.0, 50.0]);
        cfg.gam_weights = GamWeights::Absolute;
        let r = solve_gam(&p, &cfg).unwrap();
        // (100 - d) + 2 (50 - d) <= 100  =>  d >= 100 / 3
        assert_abs_diff_eq!(r.objective, 100.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.groups[0].patients, 200.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.groups[1].patients, 50.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn achievable_goals_need_no_deviation() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let cfg = GoalConfig::new(vec![10.0, 10.0]);
        assert_abs_diff_eq!(solve_gam(&p, &cfg).unwrap().objective, 0.0, epsilon = 1e-9);
        for mode in [GpmMode::Sum, GpmMode::MinimaxUnder] {
            let r = solve_gpm(&p, &cfg, mode).unwrap();
            assert_abs_diff_eq!(r.objective, 0.0, epsilon = 1e-9);
            let g = r.goal.unwrap();
            assert!(g.over.iter().chain(&g.under).all(|d| d.abs() < 1e-9));
        }
    }

    #[test]
    fn negative_weights_are_diagnosed() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let mut cfg = GoalConfig::new(vec![100.0, 50.0]);
        cfg.gam_weights = GamWeights::Custom(vec![-1.0, -1.0]);
        let e = solve_gam(&p, &cfg).unwrap_err();
        assert!(e.is_infeasible());
        assert!(e.to_string().contains("negative weights on A, B"), "{e}");
    }

    #[test]
    fn relative_gpm_needs_positive_goals() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let e = solve_gpm(&p, &GoalConfig::new(vec![0.0, 10.0]), GpmMode::Sum).unwrap_err();
        assert!(e.to_string().starts_with("/goals/A"), "{e}");
    }

    #[test]
    fn goal_above_limit_is_rejected() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let e = solve_gam(&p, &GoalConfig::new(vec![10.0, 51.0])).unwrap_err();
        assert!(e.to_string().starts_with("/goals/B"), "{e}");
    }
}
