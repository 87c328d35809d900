//! HiGHS backend (enabled with the `highs` cargo feature).

use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense};

use super::program::{Direction, Program, RowSense, VarKind};
use super::{Backend, Solution, SolveStats, SolveStatus, SolverError};

#[derive(Debug, Clone)]
pub struct HighsBackend {
    pub relative_gap: f64,
    pub feasibility_tol: f64,
    pub seed: i32,
}

impl Default for HighsBackend {
    fn default() -> Self {
        HighsBackend {
            relative_gap: 1e-6,
            feasibility_tol: 1e-7,
            seed: 0,
        }
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, program: &Program) -> SolveStatus {
        let start = Instant::now();
        let stats = |start: Instant| SolveStats {
            wall_time: start.elapsed(),
            ..Default::default()
        };
        if let Err(error) = program.validate() {
            return SolveStatus::Error {
                error,
                stats: stats(start),
            };
        }
        let mut cost = vec![0.0; program.num_vars()];
        for &(v, c) in program.objective() {
            cost[v.index()] += c;
        }
        let mut pb = RowProblem::default();
        let mut cols = Vec::with_capacity(program.num_vars());
        for (v, &c) in program.vars().iter().zip(&cost) {
            let col = match v.kind {
                VarKind::Continuous => pb.add_column(c, v.lower..=v.upper),
                VarKind::Binary => pb.add_integer_column(c, v.lower.max(0.0)..=v.upper.min(1.0)),
            };
            cols.push(col);
        }
        for r in program.rows() {
            let terms: Vec<_> = r.terms.iter().map(|&(v, a)| (cols[v.index()], a)).collect();
            match r.sense {
                RowSense::Le => pb.add_row(..=r.rhs, terms),
                RowSense::Ge => pb.add_row(r.rhs.., terms),
                RowSense::Eq => pb.add_row(r.rhs..=r.rhs, terms),
            }
        }
        let sense = match program.direction() {
            Direction::Maximize => Sense::Maximise,
            Direction::Minimize => Sense::Minimise,
        };
        let mut model = pb.optimise(sense);
        model.set_option("output_flag", false);
        model.set_option("mip_rel_gap", self.relative_gap);
        model.set_option("primal_feasibility_tolerance", self.feasibility_tol);
        model.set_option("random_seed", self.seed);
        model.set_option("threads", 1);
        let solved = match model.try_solve() {
            Ok(s) => s,
            Err(e) => {
                return SolveStatus::Error {
                    error: SolverError::Backend(format!("{e:?}")),
                    stats: stats(start),
                }
            }
        };
        match solved.status() {
            HighsModelStatus::Optimal => {
                let mut values = solved.get_solution().columns().to_vec();
                for (v, x) in program.vars().iter().zip(values.iter_mut()) {
                    if v.kind == VarKind::Binary {
                        *x = x.round();
                    }
                }
                SolveStatus::Optimal(Solution {
                    objective: program.objective_value(&values),
                    values,
                    stats: stats(start),
                })
            }
            HighsModelStatus::Infeasible => SolveStatus::Infeasible(stats(start)),
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                SolveStatus::Error {
                    error: SolverError::Unbounded,
                    stats: stats(start),
                }
            }
            other => SolveStatus::Error {
                error: SolverError::Backend(format!("HiGHS status {other:?}")),
                stats: stats(start),
            },
        }
    }
}
