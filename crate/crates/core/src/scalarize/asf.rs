use serde::{Deserialize, Serialize};

use super::{Method, Planner, SolveResult};
use crate::solver::{encode_plf, Direction, EncodeOptions, PlfVars, RowSense, VarId};
use crate::utility::PiecewiseLinearUtility;
use crate::Error;

const TIE_TOL: f64 = 1e-6;

/// Second pass applied among alternative ASF optima.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    None,
    /// Re-optimize throughput subject to ASF >= ASF* - 1e-6.
    MaxThroughput,
}

/// Blend of the minimum and the sum of weighted utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsfConfig {
    pub eps1: f64,
    pub eps2: f64,
    /// Per-group weights; empty means all ones.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub tie_break: TieBreak,
    /// Encode every utility with segment binaries, even concave ones.
    #[serde(default)]
    pub force_binary: bool,
}

impl AsfConfig {
    pub fn new(eps1: f64, eps2: f64) -> Self {
        AsfConfig {
            eps1,
            eps2,
            weights: Vec::new(),
            tie_break: TieBreak::None,
            force_binary: false,
        }
    }

    /// Maximize the minimum utility.
    pub fn mmu() -> Self {
        AsfConfig::new(1.0, 0.0)
    }

    /// Maximize the sum of utilities.
    pub fn msu() -> Self {
        AsfConfig::new(0.0, 1.0)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self, groups: usize) -> Result<(), Error> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("/{name}"), "must be a nonnegative number"));
            }
        }
        if self.eps1 + self.eps2 <= 0.0 {
            return Err(Error::validation("/eps1", "eps1 + eps2 must be positive"));
        }
        if !self.weights.is_empty() {
            if self.weights.len() != groups {
                return Err(Error::validation(
                    "/weights",
                    format!("expected {groups} weights, got {}", self.weights.len()),
                ));
            }
            for (i, w) in self.weights.iter().enumerate() {
                if !(w.is_finite() && *w > 0.0) {
                    return Err(Error::validation(format!("/weights/{i}"), "must be positive"));
                }
            }
        }
        Ok(())
    }

    fn weight(&self, g: usize) -> f64 {
        self.weights.get(g).copied().unwrap_or(1.0)
    }
}

/// Maximizes `eps1 * min_g w_g u_g + eps2 * sum_g w_g u_g`.
///
/// The empty caseload is handed to the solver as a starting point, so when no
/// caseload scores strictly better the result is the empty one.
pub fn solve_asf(
    planner: &Planner<'_>,
    plfs: &[PiecewiseLinearUtility],
    cfg: &AsfConfig,
) -> Result<SolveResult, Error> {
    let groups = planner.instance().groups.len();
    cfg.validate(groups)?;
    planner.check_plfs(plfs)?;

    let mut model = planner.model()?;
    let totals = model.group_total_vars();
    let mut uvars: Vec<PlfVars> = Vec::with_capacity(groups);
    for (i, (&x, plf)) in totals.iter().zip(plfs).enumerate() {
        let opts = EncodeOptions {
            name: format!("u[{}]", planner.instance().groups[i].id),
            force_binary: cfg.force_binary,
            ..EncodeOptions::default()
        };
        uvars.push(
            encode_plf(&mut model.program, x, plf, &opts).map_err(|source| Error::Solver {
                context: format!("utility of group {}", planner.instance().groups[i].id),
                source,
            })?,
        );
    }

    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let z = (cfg.eps1 > 0.0 && groups > 0).then(|| {
        let z = model.program.add_free("z");
        for (i, pv) in uvars.iter().enumerate() {
            model.program.add_row(
                format!("min[{}]", planner.instance().groups[i].id),
                vec![(z, 1.0), (pv.u, -cfg.weight(i))],
                RowSense::Le,
                0.0,
            );
        }
        objective.push((z, cfg.eps1));
        z
    });
    if cfg.eps2 > 0.0 {
        for (i, pv) in uvars.iter().enumerate() {
            objective.push((pv.u, cfg.eps2 * cfg.weight(i)));
        }
    }
    model
        .program
        .set_objective(Direction::Maximize, objective.clone(), 0.0);
    model.program.set_start(empty_start(&model.program, &uvars, plfs, z, cfg));

    let mut sol = planner.run(&model.program, "ASF solve")?;
    let asf = sol.objective;

    if cfg.tie_break == TieBreak::MaxThroughput {
        model
            .program
            .add_row("asf_floor", objective, RowSense::Ge, asf - TIE_TOL);
        model.set_throughput_objective();
        let mut start = sol.values.clone();
        start.truncate(model.program.num_vars());
        model.program.set_start(start);
        sol = planner.run(&model.program, "ASF tie-break")?;
    }

    let mut result = planner.summarize(&model, &sol, plfs, Method::Ufm, asf)?;
    result.solver.binaries = model.program.num_binaries();
    // Score segment-encoded groups on the segment the solver picked: a caseload
    // within round-off below a step still earns the step it was placed on.
    for ((g, pv), plf) in result.groups.iter_mut().zip(&uvars).zip(plfs) {
        if let Some(k) = pv.binaries.iter().position(|&d| sol.value(d) > 0.5) {
            let piece = plf.pieces()[k];
            g.utility = piece.at(g.patients.clamp(piece.left, piece.right));
        }
    }
    result.rescore();
    Ok(result)
}

/// The all-zero caseload: every group on its first piece, `z` at the minimum weighted utility.
fn empty_start(
    program: &crate::solver::Program,
    uvars: &[PlfVars],
    plfs: &[PiecewiseLinearUtility],
    z: Option<VarId>,
    cfg: &AsfConfig,
) -> Vec<f64> {
    let mut x = vec![0.0; program.num_vars()];
    let mut zmin = f64::INFINITY;
    for (i, (pv, plf)) in uvars.iter().zip(plfs).enumerate() {
        let u0 = plf.evaluate_clamped(0.0);
        x[pv.u.index()] = u0;
        if let Some(&d) = pv.binaries.first() {
            x[d.index()] = 1.0;
        }
        zmin = zmin.min(cfg.weight(i) * u0);
    }
    if let Some(z) = z {
        x[z.index()] = zmin;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::bundled_toy;
    use crate::solver::SimplexBackend;
    use crate::utility::{instantiate, Quantity, UfParams, UfSpec, UfTemplate};
    use approx::assert_abs_diff_eq;

    fn toy_planner<'a>(
        inst: &'a crate::HospitalInstance,
        be: &'a SimplexBackend,
    ) -> Planner<'a> {
        Planner::with_planning_bounds(inst, be).unwrap()
    }

    #[test]
    fn toy_mmu_equalizes_linear_utilities() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = toy_planner(&inst, &be);
        assert_eq!(p.bounds(), &[100.0, 50.0]);
        let plfs = p.linear_utilities().unwrap();
        let r = solve_asf(&p, &plfs, &AsfConfig::mmu()).unwrap();
        assert_abs_diff_eq!(r.groups[0].patients, 50.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.groups[1].patients, 25.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.min_u, 50.0, epsilon = 1e-6);
        assert!(!r.zeroed);
    }

    #[test]
    fn unreachable_indifference_gives_empty_caseload() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = toy_planner(&inst, &be);
        // Both groups need 60% of their limit before any utility accrues: 60 + 60 > 100 hours.
        let spec = UfSpec::with_params(
            UfTemplate::Uf8,
            UfParams {
                indifference: Some(Quantity::Fraction(0.6)),
                ..Default::default()
            },
        );
        let plfs = p.utilities_for(&spec).unwrap();
        let r = solve_asf(&p, &plfs, &AsfConfig::mmu()).unwrap();
        assert!(r.zeroed);
        assert_eq!(r.throughput, 0.0);
    }

    #[test]
    fn rejects_zero_blend() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = toy_planner(&inst, &be);
        let plfs = p.linear_utilities().unwrap();
        let e = solve_asf(&p, &plfs, &AsfConfig::new(0.0, 0.0)).unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn tie_break_raises_throughput() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = toy_planner(&inst, &be);
        // Aspiration at 10%: utilities saturate long before capacity runs out.
        let spec = UfSpec::with_params(
            UfTemplate::Uf3,
            UfParams {
                aspiration: Some(Quantity::Fraction(0.1)),
                ..Default::default()
            },
        );
        let plfs = p.utilities_for(&spec).unwrap();
        let mut cfg = AsfConfig::mmu();
        let plain = solve_asf(&p, &plfs, &cfg).unwrap();
        cfg.tie_break = TieBreak::MaxThroughput;
        let tied = solve_asf(&p, &plfs, &cfg).unwrap();
        assert_abs_diff_eq!(plain.min_u, 100.0, epsilon = 1e-6);
        assert_abs_diff_eq!(tied.min_u, 100.0, epsilon = 2.0 * TIE_TOL);
        // Best case: B at its 5-patient aspiration, A takes the remaining 90 hours.
        assert_abs_diff_eq!(tied.throughput, 95.0, epsilon = 1e-6);
        assert!(plain.throughput <= tied.throughput + 1e-9);
    }

    #[test]
    fn short_utility_domain_is_rejected() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = toy_planner(&inst, &be);
        let spec = UfSpec::new(UfTemplate::Uf1);
        let plfs = vec![instantiate(&spec, 10.0).unwrap(), instantiate(&spec, 50.0).unwrap()];
        assert!(solve_asf(&p, &plfs, &AsfConfig::msu()).unwrap_err().is_validation());
    }
}
