//! Pareto audit of a caseload: can total throughput grow without any group losing patients?

use serde::{Deserialize, Serialize};

use crate::model::Caseload;
use crate::scalarize::Planner;
use crate::Error;

/// Relative throughput gain below which a caseload counts as Pareto optimal.
pub const PARETO_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub is_pareto: bool,
    pub base_throughput: f64,
    pub corrected_throughput: f64,
    pub diff: f64,
    /// Gain relative to the base; 0 when the base is empty.
    pub diff_pct: f64,
    /// The base caseload treats nobody.
    pub zeroed: bool,
    pub corrected: Caseload,
}

/// Maximizes throughput with every group floored at its `base` total.
pub fn check_pareto(planner: &Planner<'_>, base: &[f64]) -> Result<ParetoReport, Error> {
    let inst = planner.instance();
    if base.len() != inst.groups.len() {
        return Err(Error::validation(
            "/base",
            format!("expected {} totals, got {}", inst.groups.len(), base.len()),
        ));
    }
    if let Some(i) = base.iter().position(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::validation(format!("/base/{}", inst.groups[i].id), "must be nonnegative"));
    }
    let mut model = planner.model()?;
    planner.add_floors(&mut model, base, None);
    model.set_throughput_objective();
    let sol = planner
        .run(&model.program, "Pareto audit")
        .map_err(|e| match e {
            Error::Infeasible(_) => Error::Infeasible(
                "Pareto audit: the base caseload does not fit the instance".into(),
            ),
            e => e,
        })?;
    let corrected = model.caseload(inst, &sol);
    corrected.check(inst)?;
    let base_n: f64 = base.iter().sum();
    let new_n = corrected.total();
    let diff = new_n - base_n;
    let zeroed = base_n < crate::scalarize::ZERO_THROUGHPUT;
    Ok(ParetoReport {
        is_pareto: diff <= PARETO_TOL * base_n,
        base_throughput: base_n,
        corrected_throughput: new_n,
        diff,
        diff_pct: if zeroed { 0.0 } else { 100.0 * diff / base_n },
        zeroed,
        corrected,
    })
}
