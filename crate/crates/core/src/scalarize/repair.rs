use serde::{Deserialize, Serialize};

use super::{GoalOutcome, Method, Planner, SolveResult};
use crate::solver::{Direction, RowSense};
use crate::utility::PiecewiseLinearUtility;
use crate::Error;

/// Second-stage model that improves on a given caseload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum RepairStrategy {
    /// Grow one group while no other group falls below its base.
    Preference { group: String },
    /// Maximize weighted over-achievement with every group at or above its base.
    SumOverachieve {
        #[serde(default)]
        weights: Vec<f64>,
    },
    /// Trade weighted over-achievement against under-achievement.
    /// A large `eps_minus` effectively forbids falling below the base.
    Tradeoff {
        eps_plus: f64,
        eps_minus: f64,
        #[serde(default)]
        over_weights: Vec<f64>,
        #[serde(default)]
        under_weights: Vec<f64>,
    },
}

impl RepairStrategy {
    pub fn sum_overachieve() -> Self {
        RepairStrategy::SumOverachieve { weights: Vec::new() }
    }
}

fn weight(w: &[f64], g: usize) -> f64 {
    w.get(g).copied().unwrap_or(1.0)
}

fn check_weights(path: &str, w: &[f64], n: usize) -> Result<(), Error> {
    if w.is_empty() {
        return Ok(());
    }
    if w.len() != n {
        return Err(Error::validation(path, format!("expected {n} weights, got {}", w.len())));
    }
    match w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        Some(i) => Err(Error::validation(format!("{path}/{i}"), "must be nonnegative")),
        None => Ok(()),
    }
}

/// Re-solves around the per-group totals `base`; utilities are scored with `plfs`.
pub fn repair(
    planner: &Planner<'_>,
    base: &[f64],
    strategy: &RepairStrategy,
    plfs: &[PiecewiseLinearUtility],
) -> Result<SolveResult, Error> {
    let inst = planner.instance();
    let n = inst.groups.len();
    planner.check_plfs(plfs)?;
    if base.len() != n {
        return Err(Error::validation("/base", format!("expected {n} totals, got {}", base.len())));
    }
    if let Some(i) = base.iter().position(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::validation(format!("/base/{}", inst.groups[i].id), "must be nonnegative"));
    }
    let mut model = planner.model()?;
    let totals = model.group_total_vars();
    let offset_of = |w: &[f64]| -> f64 { (0..n).map(|i| weight(w, i) * base[i]).sum() };

    let mut goal = None;
    match strategy {
        RepairStrategy::Preference { group } => {
            let g = inst.group_index(group).ok_or_else(|| {
                Error::validation("/group", format!("unknown patient group {group}"))
            })?;
            planner.add_floors(&mut model, base, Some(g));
            model
                .program
                .set_objective(Direction::Maximize, vec![(totals[g], 1.0)], -base[g]);
        }
        RepairStrategy::SumOverachieve { weights } => {
            check_weights("/weights", weights, n)?;
            planner.add_floors(&mut model, base, None);
            let terms = (0..n).map(|i| (totals[i], weight(weights, i))).collect();
            model
                .program
                .set_objective(Direction::Maximize, terms, -offset_of(weights));
        }
        RepairStrategy::Tradeoff {
            eps_plus,
            eps_minus,
            over_weights,
            under_weights,
        } => {
            for (path, e) in [("/eps_plus", *eps_plus), ("/eps_minus", *eps_minus)] {
                if !(e.is_finite() && e >= 0.0) {
                    return Err(Error::validation(path, "must be nonnegative"));
                }
            }
            check_weights("/over_weights", over_weights, n)?;
            check_weights("/under_weights", under_weights, n)?;
            let mut terms = Vec::new();
            let mut devs = Vec::new();
            for i in 0..n {
                let id = &inst.groups[i].id;
                let room = (planner.bounds()[i] - base[i]).max(0.0);
                let over = model.program.add_var(format!("over[{id}]"), 0.0, room);
                let under = model.program.add_var(format!("under[{id}]"), 0.0, base[i]);
                model.program.add_row(
                    format!("base[{id}]"),
                    vec![(totals[i], 1.0), (over, -1.0), (under, 1.0)],
                    RowSense::Eq,
                    base[i],
                );
                if room > 0.0 && base[i] > 0.0 {
                    let lambda = model.program.add_binary(format!("side[{id}]"));
                    model.program.add_row(
                        format!("over_on[{id}]"),
                        vec![(over, 1.0), (lambda, -room)],
                        RowSense::Le,
                        0.0,
                    );
                    model.program.add_row(
                        format!("under_on[{id}]"),
                        vec![(under, 1.0), (lambda, base[i])],
                        RowSense::Le,
                        base[i],
                    );
                }
                terms.push((over, eps_plus * weight(over_weights, i)));
                terms.push((under, -eps_minus * weight(under_weights, i)));
                devs.push((over, under));
            }
            model.program.set_objective(Direction::Maximize, terms, 0.0);
            goal = Some(devs);
        }
    }

    let sol = planner.run(&model.program, "caseload repair")?;
    let mut r = planner.summarize(&model, &sol, plfs, Method::Repair, sol.objective)?;
    r.solver.binaries = model.program.num_binaries();
    let totals_now = r.patients();
    let (over, under) = match goal {
        Some(devs) => devs
            .iter()
            .map(|&(o, u)| (sol.value(o).max(0.0), sol.value(u).max(0.0)))
            .unzip(),
        None => totals_now
            .iter()
            .zip(base)
            .map(|(&x, &b)| ((x - b).max(0.0), (b - x).max(0.0)))
            .unzip(),
    };
    r.goal = Some(GoalOutcome {
        goals: base.to_vec(),
        delta: None,
        over,
        under,
    });
    Ok(r)
}
