//! Depth-first branch-and-bound over binary variables.

use super::program::{Direction, Program, VarKind};
use super::simplex::{solve_lp, LpOutcome, LpSolution, SimplexOptions};
use super::{SimplexBackend, Solution, SolveStats, SolveStatus, SolverError};

struct Node {
    fixings: Vec<(usize, f64)>,
}

pub(super) fn solve(program: &Program, cfg: &SimplexBackend) -> SolveStatus {
    let opts = SimplexOptions {
        max_iterations: cfg.max_iterations,
    };
    let base_lower: Vec<f64> = program.vars().iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = program.vars().iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = program
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let sense = match program.direction() {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };

    let mut stats = SolveStats::default();
    let error = |error: SolverError, stats: SolveStats| SolveStatus::Error { error, stats };

    let mut incumbent: Option<LpSolution> = program.start().and_then(|x| {
        let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let integral = binaries.iter().all(|&j| (x[j] - x[j].round()).abs() <= cfg.integrality_tol);
        (x.len() == program.num_vars() && integral && program.max_violation(x) <= 1e-6 * scale).then(|| {
            LpSolution {
                values: x.to_vec(),
                objective: program.objective_value(x),
                iterations: 0,
            }
        })
    });
    let from_start = incumbent.is_some();
    let mut replaced = false;
    let mut stack = vec![Node {
        fixings: Vec::new(),
    }];
    let mut first = true;

    while let Some(node) = stack.pop() {
        if stats.nodes >= cfg.max_nodes {
            if incumbent.is_some() {
                tracing::warn!(nodes = stats.nodes, "node limit hit; returning incumbent");
                break;
            }
            return error(SolverError::NodeLimit(stats.nodes), stats);
        }
        stats.nodes += 1;
        let (mut lo, mut hi) = (base_lower.clone(), base_upper.clone());
        for &(j, v) in &node.fixings {
            lo[j] = v;
            hi[j] = v;
        }
        let outcome = match solve_lp(program, &lo, &hi, &opts) {
            Ok(o) => o,
            Err(e) => return error(e, stats),
        };
        let lp = match outcome {
            LpOutcome::Optimal(lp) => lp,
            LpOutcome::Infeasible { iterations } => {
                stats.iterations += iterations;
                first = false;
                continue;
            }
            LpOutcome::Unbounded { iterations } => {
                stats.iterations += iterations;
                if first {
                    return error(SolverError::Unbounded, stats);
                }
                return error(
                    SolverError::Numerical("unbounded node below a bounded root".into()),
                    stats,
                );
            }
        };
        first = false;
        stats.iterations += lp.iterations;

        if let Some(inc) = &incumbent {
            let tol = cfg.relative_gap * inc.objective.abs().max(1.0);
            if sense * lp.objective <= sense * inc.objective + tol {
                continue;
            }
        }

        // Most fractional binary.
        let mut branch_on: Option<(usize, f64)> = None;
        let mut best_frac = cfg.integrality_tol;
        for &j in &binaries {
            let x = lp.values[j];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > best_frac {
                best_frac = frac;
                branch_on = Some((j, x));
            }
        }
        match branch_on {
            None => {
                incumbent = Some(lp);
                replaced = true;
            }
            Some((j, x)) => {
                let near = x.round();
                for v in [1.0 - near, near] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    stack.push(Node { fixings });
                }
            }
        }
    }

    let Some(inc) = incumbent else {
        return SolveStatus::Infeasible(stats);
    };
    if binaries.is_empty() || (from_start && !replaced) {
        return SolveStatus::Optimal(Solution {
            objective: inc.objective,
            values: inc.values,
            stats,
        });
    }

    // Re-solve with binaries fixed at their rounded values to clean the continuous part.
    let (mut lo, mut hi) = (base_lower, base_upper);
    for &j in &binaries {
        let v = inc.values[j].round();
        lo[j] = v;
        hi[j] = v;
    }
    match solve_lp(program, &lo, &hi, &opts) {
        Ok(LpOutcome::Optimal(lp)) => {
            stats.iterations += lp.iterations;
            let mut values = lp.values;
            for &j in &binaries {
                values[j] = values[j].round();
            }
            SolveStatus::Optimal(Solution {
                objective: program.objective_value(&values),
                values,
                stats,
            })
        }
        _ => SolveStatus::Optimal(Solution {
            objective: inc.objective,
            values: inc.values,
            stats,
        }),
    }
}
