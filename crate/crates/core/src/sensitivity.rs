//! Parameter sweeps over a utility template, and the case-mix spread they produce.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalarize::{solve_asf, AsfConfig, Planner, TieBreak};
use crate::utility::{Quantity, UfParams, UfSpec, UfTemplate};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Maximize the minimum utility.
    Mmu,
    /// Maximize the sum of utilities.
    Msu,
}

impl Objective {
    pub fn asf_config(self) -> AsfConfig {
        match self {
            Objective::Mmu => AsfConfig::mmu(),
            Objective::Msu => AsfConfig::msu(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Mmu => "mmu",
            Objective::Msu => "msu",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mmu" => Ok(Objective::Mmu),
            "msu" => Ok(Objective::Msu),
            _ => Err(format!("unknown objective {s:?} (expected mmu or msu)")),
        }
    }
}

fn both() -> Vec<Objective> {
    vec![Objective::Mmu, Objective::Msu]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub template: UfTemplate,
    /// Parameter to vary. Thresholds (`indifference`, `aspiration`,
    /// `reference`) take values in percent of each group's limit; `pair` sets
    /// indifference to `v`% and aspiration to `100 - v`%. Other parameters
    /// take raw values.
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default = "both")]
    pub objectives: Vec<Objective>,
    /// Parameters held fixed across the sweep.
    #[serde(default)]
    pub fixed: UfParams,
    /// Thresholds are absolute patient counts instead of percentages.
    #[serde(default)]
    pub absolute: bool,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Indifference,
    Aspiration,
    Reference,
    Pair,
    Alpha,
    Beta,
    Steepness,
    TierUtility,
    Reward,
    Income,
    Penalty,
}

impl Param {
    fn parse(name: &str) -> Option<Param> {
        Some(match name.to_ascii_lowercase().as_str() {
            "indifference" | "ptoi" | "intercept" => Param::Indifference,
            "aspiration" | "aspt" => Param::Aspiration,
            "reference" | "ref" => Param::Reference,
            "pair" => Param::Pair,
            "alpha" => Param::Alpha,
            "beta" => Param::Beta,
            "steepness" => Param::Steepness,
            "tier_utility" => Param::TierUtility,
            "reward" => Param::Reward,
            "income" => Param::Income,
            "penalty" => Param::Penalty,
            _ => return None,
        })
    }

    fn names(self) -> &'static [&'static str] {
        match self {
            Param::Indifference => &["indifference"],
            Param::Aspiration => &["aspiration"],
            Param::Reference => &["reference"],
            Param::Pair => &["indifference", "aspiration"],
            Param::Alpha => &["alpha"],
            Param::Beta => &["beta"],
            Param::Steepness => &["steepness"],
            Param::TierUtility => &["tier_utility"],
            Param::Reward => &["reward"],
            Param::Income => &["income"],
            Param::Penalty => &["penalty"],
        }
    }

    fn is_threshold(self) -> bool {
        matches!(
            self,
            Param::Indifference | Param::Aspiration | Param::Reference | Param::Pair
        )
    }
}

fn accepts(template: UfTemplate, name: &str) -> bool {
    template
        .required_params()
        .iter()
        .chain(template.optional_params())
        .any(|p| p.split('|').any(|q| q == name))
}

impl SweepSpec {
    pub fn new(template: UfTemplate, param: &str, values: Vec<f64>) -> Self {
        SweepSpec {
            template,
            param: param.to_string(),
            values,
            objectives: both(),
            fixed: UfParams::default(),
            absolute: false,
            tie_break: TieBreak::None,
        }
    }

    pub fn with_objectives(mut self, objectives: Vec<Objective>) -> Self {
        self.objectives = objectives;
        self
    }

    fn param(&self) -> Result<Param, Error> {
        let p = Param::parse(&self.param)
            .ok_or_else(|| Error::validation("/param", format!("unknown parameter {:?}", self.param)))?;
        if self.template == UfTemplate::Uf10 {
            return Err(Error::validation(
                "/template",
                "UF10 pays out at a single point and is not swept",
            ));
        }
        if let Some(missing) = p.names().iter().find(|n| !accepts(self.template, n)) {
            return Err(Error::validation(
                "/param",
                format!("{} has no parameter {missing}", self.template),
            ));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let p = self.param()?;
        if self.values.is_empty() {
            return Err(Error::validation("/values", "at least one value is required"));
        }
        if self.objectives.is_empty() {
            return Err(Error::validation("/objectives", "at least one objective is required"));
        }
        for (i, &v) in self.values.iter().enumerate() {
            let ok = v.is_finite()
                && (!p.is_threshold() || v >= 0.0)
                && (!p.is_threshold() || self.absolute || v <= 100.0);
            if !ok {
                return Err(Error::validation(
                    format!("/values/{i}"),
                    if p.is_threshold() && !self.absolute {
                        format!("{v} is not a percentage in [0, 100]")
                    } else {
                        format!("{v} is out of range")
                    },
                ));
            }
        }
        if p == Param::Pair && self.absolute {
            return Err(Error::validation("/absolute", "paired sweeps are percentages"));
        }
        Ok(())
    }

    /// The utility spec of the run at `value`.
    pub fn spec_at(&self, value: f64) -> Result<UfSpec, Error> {
        let p = self.param()?;
        let q = |v: f64| {
            if self.absolute {
                Quantity::Absolute(v)
            } else {
                Quantity::Fraction(v / 100.0)
            }
        };
        let mut params = self.fixed.clone();
        match p {
            Param::Indifference => params.indifference = Some(q(value)),
            Param::Aspiration => params.aspiration = Some(q(value)),
            Param::Reference => params.reference = Some(q(value)),
            Param::Pair => {
                params.indifference = Some(q(value));
                params.aspiration = Some(q(100.0 - value));
            }
            Param::Alpha => params.alpha = Some(value),
            Param::Beta => params.beta = Some(value),
            Param::Steepness => params.steepness = Some(value),
            Param::TierUtility => params.tier_utility = Some(value),
            Param::Reward => params.reward = Some(value),
            Param::Income => params.income = Some(value),
            Param::Penalty => params.penalty = Some(value),
        }
        Ok(UfSpec::with_params(self.template, params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub throughput: f64,
    pub sum_u: f64,
    pub min_u: f64,
    pub zeroed: bool,
    pub patients: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Share of throughput per group in percent; absent for an empty caseload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_mix_pct: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMixRange {
    pub group: String,
    pub min_pct: f64,
    pub max_pct: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMixDiff {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    pub runs_used: usize,
    pub ranges: Vec<CaseMixRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub groups: Vec<String>,
    pub bounds: Vec<f64>,
    /// One row per (value, objective), values outermost.
    pub rows: Vec<SweepRow>,
    /// Case-mix spread per objective.
    pub case_mix: Vec<CaseMixDiff>,
}

/// Runs one ASF solve per (value, objective).
///
/// Failed runs are recorded in their row and do not stop the sweep. `jobs`
/// bounds the number of concurrent solves (`None`: one per logical core).
pub fn run_sweep(
    planner: &Planner<'_>,
    spec: &SweepSpec,
    jobs: Option<usize>,
) -> Result<SweepReport, Error> {
    spec.validate()?;
    let cases: Vec<(f64, Objective)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.objectives.iter().map(move |&o| (v, o)))
        .collect();
    let run = |&(value, objective): &(f64, Objective)| -> SweepRow {
        let outcome = spec.spec_at(value).and_then(|uf| {
            let plfs = planner.utilities_for(&uf)?;
            let mut cfg = objective.asf_config();
            cfg.tie_break = spec.tie_break;
            solve_asf(planner, &plfs, &cfg)
        });
        match outcome {
            Ok(r) => SweepRow {
                value,
                objective,
                summary: Some(RunSummary {
                    throughput: r.throughput,
                    sum_u: r.sum_u,
                    min_u: r.min_u,
                    zeroed: r.zeroed,
                    patients: r.patients(),
                    utilities: r.utilities(),
                    case_mix_pct: r.caseload.case_mix_pct(),
                }),
                error: None,
            },
            Err(e) => {
                tracing::warn!(value, objective = objective.as_str(), error = %e, "sweep run failed");
                SweepRow {
                    value,
                    objective,
                    summary: None,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    let rows: Vec<SweepRow> = match jobs {
        Some(1) => cases.iter().map(run).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::validation("/jobs", e.to_string()))?
            .install(|| cases.par_iter().map(run).collect()),
        None => cases.par_iter().map(run).collect(),
    };
    let mut report = SweepReport {
        spec: spec.clone(),
        groups: planner.instance().group_ids(),
        bounds: planner.bounds().to_vec(),
        rows,
        case_mix: Vec::new(),
    };
    let mut seen = Vec::new();
    for o in &spec.objectives {
        if !seen.contains(o) {
            seen.push(*o);
            report.case_mix.push(case_mix_diff(&report, Some(*o)));
        }
    }
    Ok(report)
}

/// Per-group minimum and maximum case-mix share over the non-empty runs,
/// optionally restricted to one objective.
pub fn case_mix_diff(report: &SweepReport, objective: Option<Objective>) -> CaseMixDiff {
    let mixes: Vec<&Vec<f64>> = report
        .rows
        .iter()
        .filter(|r| objective.is_none_or(|o| r.objective == o))
        .filter_map(|r| r.summary.as_ref())
        .filter(|s| !s.zeroed)
        .filter_map(|s| s.case_mix_pct.as_ref())
        .collect();
    if mixes.is_empty() {
        return CaseMixDiff {
            objective,
            runs_used: 0,
            ranges: Vec::new(),
            diagnostic: Some("no run produced a nonempty caseload".into()),
        };
    }
    let ranges = report
        .groups
        .iter()
        .enumerate()
        .map(|(g, id)| {
            let (lo, hi) = mixes
                .iter()
                .map(|m| m[g])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            CaseMixRange {
                group: id.clone(),
                min_pct: lo,
                max_pct: hi,
                range: hi - lo,
            }
        })
        .collect();
    CaseMixDiff {
        objective,
        runs_used: mixes.len(),
        ranges,
        diagnostic: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::bundled_toy;
    use crate::solver::SimplexBackend;
    use approx::assert_abs_diff_eq;

    #[test]
    fn toy_aspiration_sweep_keeps_proportional_mix() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let spec = SweepSpec::new(UfTemplate::Uf3, "aspiration", vec![10.0, 20.0])
            .with_objectives(vec![Objective::Mmu]);
        let r = run_sweep(&p, &spec, Some(2)).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            let mix = row.summary.as_ref().unwrap().case_mix_pct.clone().unwrap();
            assert_abs_diff_eq!(mix[0], 200.0 / 3.0, epsilon = 1e-6);
        }
        let d = &r.case_mix[0];
        assert!(d.ranges.iter().all(|g| g.range.abs() < 1e-6));
    }

    #[test]
    fn failed_runs_are_recorded_per_row() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        // An absolute aspiration of 80 exceeds B's limit of 50.
        let mut spec = SweepSpec::new(UfTemplate::Uf3, "aspiration", vec![10.0, 80.0])
            .with_objectives(vec![Objective::Msu]);
        spec.absolute = true;
        let r = run_sweep(&p, &spec, Some(1)).unwrap();
        assert!(r.rows[0].summary.is_some());
        assert!(r.rows[1].error.as_deref().unwrap().contains("treatment limit"));
    }

    #[test]
    fn all_zeroed_gives_empty_diagnostic() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let spec = SweepSpec::new(UfTemplate::Uf2, "ptoi", vec![60.0, 70.0])
            .with_objectives(vec![Objective::Mmu]);
        let r = run_sweep(&p, &spec, None).unwrap();
        let d = case_mix_diff(&r, None);
        assert_eq!(d.runs_used, 0);
        assert!(d.ranges.is_empty() && d.diagnostic.is_some());
    }

    #[test]
    fn paired_values_mirror() {
        let spec = SweepSpec::new(UfTemplate::Uf4, "pair", vec![5.0]);
        let uf = spec.spec_at(5.0).unwrap();
        assert_eq!(uf.params.indifference, Some(Quantity::Fraction(0.05)));
        assert_eq!(uf.params.aspiration, Some(Quantity::Fraction(0.95)));
        assert!(SweepSpec::new(UfTemplate::Uf3, "pair", vec![5.0]).validate().is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = [
            SweepSpec::new(UfTemplate::Uf3, "aspiration", vec![]),
            SweepSpec::new(UfTemplate::Uf3, "aspiration", vec![120.0]),
            SweepSpec::new(UfTemplate::Uf3, "nope", vec![10.0]),
            SweepSpec::new(UfTemplate::Uf1, "aspiration", vec![10.0]),
            SweepSpec::new(UfTemplate::Uf10, "aspiration", vec![10.0]),
        ];
        for s in bad {
            assert!(s.validate().unwrap_err().is_validation(), "{s:?}");
        }
    }
}
