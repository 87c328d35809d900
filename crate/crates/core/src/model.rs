//! Hospital instance data model and the capacity-allocation program.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solver::{Backend, Direction, Program, RowSense, Solution, SolveStatus, VarId};
use crate::Error;

const MIX_TOL: f64 = 1e-9;
/// Relative tolerance of the caseload feasibility re-check.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Theatre,
    Ward,
    Icu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    pub kind: ResourceKind,
    pub bed_count: u32,
    pub weekly_hours: f64,
}

impl Resource {
    /// Total hours over the horizon.
    pub fn availability(&self, horizon_weeks: u32) -> f64 {
        self.bed_count as f64 * self.weekly_hours * horizon_weeks as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub duration_hours: f64,
    pub eligible_resources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtype {
    pub id: String,
    pub mix_fraction: f64,
    pub activities: Vec<Activity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientGroup {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub subtypes: Vec<Subtype>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_mix: Option<f64>,
}

fn schema_v1() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalInstance {
    #[serde(default = "schema_v1")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub horizon_weeks: u32,
    pub resources: Vec<Resource>,
    pub groups: Vec<PatientGroup>,
    /// Reference treatment limits used in place of computed ones when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_bounds: Option<BTreeMap<String, f64>>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.into(),
        message: message.into(),
    }
}

impl HospitalInstance {
    pub fn group_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.id.clone()).collect()
    }

    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    /// Checks every structural invariant; errors carry JSON-pointer paths.
    pub fn validate(&self) -> Result<(), Error> {
        if self.schema_version != 1 {
            return Err(invalid(
                "/schema_version",
                format!("unsupported schema version {}", self.schema_version),
            ));
        }
        if self.horizon_weeks == 0 {
            return Err(invalid("/horizon_weeks", "must be a positive integer"));
        }
        let mut kinds = HashMap::new();
        for (i, r) in self.resources.iter().enumerate() {
            let path = format!("/resources/{i}");
            if r.id.is_empty() {
                return Err(invalid(format!("{path}/id"), "must not be empty"));
            }
            if kinds.insert(r.id.as_str(), r.kind).is_some() {
                return Err(invalid(format!("{path}/id"), format!("duplicate resource id {}", r.id)));
            }
            if r.bed_count == 0 {
                return Err(invalid(format!("{path}/bed_count"), "must be at least 1"));
            }
            if !(r.weekly_hours.is_finite() && r.weekly_hours > 0.0) {
                return Err(invalid(format!("{path}/weekly_hours"), "must be positive"));
            }
        }
        let mut gids = HashSet::new();
        for (gi, g) in self.groups.iter().enumerate() {
            let gpath = format!("/groups/{gi}");
            if g.id.is_empty() {
                return Err(invalid(format!("{gpath}/id"), "must not be empty"));
            }
            if !gids.insert(g.id.as_str()) {
                return Err(invalid(format!("{gpath}/id"), format!("duplicate group id {}", g.id)));
            }
            if g.subtypes.is_empty() {
                return Err(invalid(format!("{gpath}/subtypes"), "a group needs at least one subtype"));
            }
            if let Some(m) = g.group_mix {
                if !(0.0..=1.0).contains(&m) {
                    return Err(invalid(format!("{gpath}/group_mix"), "must lie in [0, 1]"));
                }
            }
            let mut sids = HashSet::new();
            let mut mix_sum = 0.0;
            for (si, s) in g.subtypes.iter().enumerate() {
                let spath = format!("{gpath}/subtypes/{si}");
                if !sids.insert(s.id.as_str()) {
                    return Err(invalid(format!("{spath}/id"), format!("duplicate subtype id {}", s.id)));
                }
                if !(0.0..=1.0).contains(&s.mix_fraction) {
                    return Err(invalid(format!("{spath}/mix_fraction"), "must lie in [0, 1]"));
                }
                mix_sum += s.mix_fraction;
                let mut consumes = false;
                for (ai, a) in s.activities.iter().enumerate() {
                    let apath = format!("{spath}/activities/{ai}");
                    if !a.duration_hours.is_finite() || a.duration_hours < 0.0 {
                        return Err(invalid(
                            format!("{apath}/duration_hours"),
                            format!("negative or non-finite duration {}", a.duration_hours),
                        ));
                    }
                    if a.eligible_resources.is_empty() {
                        return Err(invalid(format!("{apath}/eligible_resources"), "must not be empty"));
                    }
                    let mut kind = None;
                    for (ri, rid) in a.eligible_resources.iter().enumerate() {
                        let rpath = format!("{apath}/eligible_resources/{ri}");
                        let Some(&k) = kinds.get(rid.as_str()) else {
                            return Err(invalid(rpath, format!("unknown resource {rid}")));
                        };
                        if kind.is_some_and(|prev| prev != k) {
                            return Err(invalid(rpath, "eligible resources must all be of one kind"));
                        }
                        kind = Some(k);
                    }
                    consumes |= a.duration_hours > 0.0;
                }
                if !consumes {
                    return Err(invalid(
                        format!("{spath}/activities"),
                        "subtype must use at least one resource for a positive duration",
                    ));
                }
            }
            if (mix_sum - 1.0).abs() > MIX_TOL {
                return Err(invalid(
                    format!("{gpath}/subtypes"),
                    format!("mix fractions of group {} sum to {mix_sum}, expected 1", g.id),
                ));
            }
        }
        if !self.groups.is_empty() && self.groups.iter().all(|g| g.group_mix.is_some()) {
            let s: f64 = self.groups.iter().filter_map(|g| g.group_mix).sum();
            if (s - 1.0).abs() > MIX_TOL {
                return Err(invalid("/groups", format!("group mix sums to {s}, expected 1")));
            }
        }
        if let Some(pb) = &self.published_bounds {
            for g in &self.groups {
                match pb.get(&g.id) {
                    Some(v) if v.is_finite() && *v > 0.0 => {}
                    Some(_) => {
                        return Err(invalid(format!("/published_bounds/{}", g.id), "must be positive"))
                    }
                    None => {
                        return Err(invalid(
                            "/published_bounds",
                            format!("missing bound for group {}", g.id),
                        ))
                    }
                }
            }
            if let Some(k) = pb.keys().find(|k| !gids.contains(k.as_str())) {
                return Err(invalid(format!("/published_bounds/{k}"), "unknown group"));
            }
        }
        Ok(())
    }

    /// Copy keeping only the listed groups.
    pub fn restricted_to(&self, keep: &[usize]) -> HospitalInstance {
        let mut out = self.clone();
        out.groups = keep.iter().map(|&i| self.groups[i].clone()).collect();
        out.published_bounds = None;
        out
    }
}

/// Designated case mix: group mix and optional subtype-mix overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseMixSpec {
    #[serde(default)]
    pub group_mix: BTreeMap<String, f64>,
    #[serde(default)]
    pub sub_mix: BTreeMap<String, BTreeMap<String, f64>>,
}

impl CaseMixSpec {
    fn validate(&self, inst: &HospitalInstance) -> Result<(), Error> {
        if !self.group_mix.is_empty() {
            for (k, v) in &self.group_mix {
                if inst.group_index(k).is_none() {
                    return Err(invalid(format!("/group_mix/{k}"), "unknown group"));
                }
                if !(0.0..=1.0).contains(v) {
                    return Err(invalid(format!("/group_mix/{k}"), "must lie in [0, 1]"));
                }
            }
            let s: f64 = self.group_mix.values().sum();
            if (s - 1.0).abs() > MIX_TOL {
                return Err(invalid("/group_mix", format!("fractions sum to {s}, expected 1")));
            }
        }
        for (gid, m) in &self.sub_mix {
            let Some(gi) = inst.group_index(gid) else {
                return Err(invalid(format!("/sub_mix/{gid}"), "unknown group"));
            };
            let g = &inst.groups[gi];
            for k in m.keys() {
                if !g.subtypes.iter().any(|s| &s.id == k) {
                    return Err(invalid(format!("/sub_mix/{gid}/{k}"), "unknown subtype"));
                }
            }
            let s: f64 = m.values().sum();
            if (s - 1.0).abs() > MIX_TOL {
                return Err(invalid(format!("/sub_mix/{gid}"), format!("fractions sum to {s}, expected 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelOptions {
    /// Merge resources used by exactly the same activities into one capacity row.
    pub pool_resources: bool,
    /// Upper limits on each group's total, aligned with `instance.groups`.
    pub output_caps: Option<Vec<f64>>,
}

impl ModelOptions {
    pub fn pooled() -> Self {
        ModelOptions {
            pool_resources: true,
            output_caps: None,
        }
    }

    pub fn with_caps(caps: Vec<f64>) -> Self {
        ModelOptions {
            pool_resources: true,
            output_caps: Some(caps),
        }
    }
}

/// A capacity row covering one or more interchangeable resources.
#[derive(Debug, Clone)]
pub struct CapacitySlot {
    pub resources: Vec<usize>,
    pub capacity: f64,
}

#[derive(Debug, Clone)]
pub struct AllocationVar {
    pub group: usize,
    pub subtype: usize,
    pub activity: usize,
    pub slot: usize,
    pub var: VarId,
}

#[derive(Debug, Clone)]
pub struct GroupVars {
    pub total: VarId,
    pub subtypes: Vec<VarId>,
}

/// The capacity-allocation program plus the handles needed to read a caseload back.
#[derive(Debug, Clone)]
pub struct CmpModel {
    pub program: Program,
    pub groups: Vec<GroupVars>,
    pub allocations: Vec<AllocationVar>,
    pub slots: Vec<CapacitySlot>,
}

impl CmpModel {
    pub fn group_total_vars(&self) -> Vec<VarId> {
        self.groups.iter().map(|g| g.total).collect()
    }

    /// Sets the objective to total throughput.
    pub fn set_throughput_objective(&mut self) {
        let terms = self.groups.iter().map(|g| (g.total, 1.0)).collect();
        self.program.set_objective(Direction::Maximize, terms, 0.0);
    }

    /// Reads the caseload out of a solution, splitting pooled allocations
    /// across resources in proportion to their availability.
    pub fn caseload(&self, inst: &HospitalInstance, sol: &Solution) -> Caseload {
        let groups = inst
            .groups
            .iter()
            .zip(&self.groups)
            .map(|(g, v)| GroupCaseload {
                id: g.id.clone(),
                total: sol.value(v.total).max(0.0),
                subtypes: g
                    .subtypes
                    .iter()
                    .zip(&v.subtypes)
                    .map(|(s, &var)| SubtypeCaseload {
                        id: s.id.clone(),
                        patients: sol.value(var).max(0.0),
                    })
                    .collect(),
            })
            .collect();
        let mut allocations = Vec::new();
        for a in &self.allocations {
            let b = sol.value(a.var).max(0.0);
            let slot = &self.slots[a.slot];
            let g = &inst.groups[a.group];
            let s = &g.subtypes[a.subtype];
            for &r in &slot.resources {
                let res = &inst.resources[r];
                let share = res.availability(inst.horizon_weeks) / slot.capacity;
                allocations.push(Allocation {
                    group: g.id.clone(),
                    subtype: s.id.clone(),
                    activity: s.activities[a.activity].id.clone(),
                    resource: res.id.clone(),
                    patients: b * share,
                });
            }
        }
        Caseload {
            groups,
            allocations,
        }
    }
}

/// Builds the capacity-allocation program. The objective is left empty.
pub fn build_model(
    inst: &HospitalInstance,
    case_mix: Option<&CaseMixSpec>,
    opts: &ModelOptions,
) -> Result<CmpModel, Error> {
    inst.validate()?;
    if let Some(cm) = case_mix {
        cm.validate(inst)?;
    }
    if let Some(caps) = &opts.output_caps {
        if caps.len() != inst.groups.len() {
            return Err(invalid("/output_caps", "one cap per group is required"));
        }
    }

    // Resource slots over positive-duration activities.
    let rindex: HashMap<&str, usize> = inst
        .resources
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut users: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); inst.resources.len()];
    for (gi, g) in inst.groups.iter().enumerate() {
        for (si, s) in g.subtypes.iter().enumerate() {
            for (ai, a) in s.activities.iter().enumerate() {
                if a.duration_hours > 0.0 {
                    for rid in &a.eligible_resources {
                        users[rindex[rid.as_str()]].push((gi, si, ai));
                    }
                }
            }
        }
    }
    let mut slot_of = vec![usize::MAX; inst.resources.len()];
    let mut slots: Vec<CapacitySlot> = Vec::new();
    let mut by_users: HashMap<Vec<(usize, usize, usize)>, usize> = HashMap::new();
    for (r, u) in users.iter().enumerate() {
        if u.is_empty() {
            continue;
        }
        let cap = inst.resources[r].availability(inst.horizon_weeks);
        let key = u.clone();
        let existing = if opts.pool_resources {
            by_users.get(&key).copied()
        } else {
            None
        };
        match existing {
            Some(k) => {
                slots[k].resources.push(r);
                slots[k].capacity += cap;
                slot_of[r] = k;
            }
            None => {
                slots.push(CapacitySlot {
                    resources: vec![r],
                    capacity: cap,
                });
                slot_of[r] = slots.len() - 1;
                by_users.insert(key, slots.len() - 1);
            }
        }
    }

    let mut p = Program::new();
    let mut groups = Vec::with_capacity(inst.groups.len());
    let mut allocations = Vec::new();
    let mut slot_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); slots.len()];
    for (gi, g) in inst.groups.iter().enumerate() {
        let cap = opts
            .output_caps
            .as_ref()
            .map_or(f64::INFINITY, |c| c[gi]);
        let total = p.add_var(format!("n[{}]", g.id), 0.0, cap);
        let mut subs = Vec::with_capacity(g.subtypes.len());
        for (si, s) in g.subtypes.iter().enumerate() {
            let n2 = p.add_nonneg(format!("n[{}.{}]", g.id, s.id));
            subs.push(n2);
            for (ai, a) in s.activities.iter().enumerate() {
                if a.duration_hours <= 0.0 {
                    continue;
                }
                let mut seen = HashSet::new();
                let mut row = vec![(n2, 1.0)];
                for rid in &a.eligible_resources {
                    let k = slot_of[rindex[rid.as_str()]];
                    if !seen.insert(k) {
                        continue;
                    }
                    let name = slots[k]
                        .resources
                        .iter()
                        .map(|&r| inst.resources[r].id.as_str())
                        .next()
                        .unwrap_or("");
                    let beta = p.add_nonneg(format!("b[{}.{}.{}@{}]", g.id, s.id, a.id, name));
                    row.push((beta, -1.0));
                    slot_terms[k].push((beta, a.duration_hours));
                    allocations.push(AllocationVar {
                        group: gi,
                        subtype: si,
                        activity: ai,
                        slot: k,
                        var: beta,
                    });
                }
                p.add_row(format!("flow[{}.{}.{}]", g.id, s.id, a.id), row, RowSense::Eq, 0.0);
            }
        }
        let mut row = vec![(total, 1.0)];
        row.extend(subs.iter().map(|&v| (v, -1.0)));
        p.add_row(format!("total[{}]", g.id), row, RowSense::Eq, 0.0);
        let overrides = case_mix.and_then(|cm| cm.sub_mix.get(&g.id));
        for (s, &n2) in g.subtypes.iter().zip(&subs) {
            let mu = overrides
                .and_then(|m| m.get(&s.id).copied())
                .unwrap_or(s.mix_fraction);
            if mu > 0.0 {
                p.add_row(
                    format!("submix[{}.{}]", g.id, s.id),
                    vec![(n2, 1.0), (total, -mu)],
                    RowSense::Ge,
                    0.0,
                );
            }
        }
        groups.push(GroupVars {
            total,
            subtypes: subs,
        });
    }
    for (k, terms) in slot_terms.into_iter().enumerate() {
        let name = inst.resources[slots[k].resources[0]].id.clone();
        p.add_row(format!("cap[{name}]"), terms, RowSense::Le, slots[k].capacity);
    }
    if let Some(cm) = case_mix {
        if !cm.group_mix.is_empty() {
            for (gi, g) in inst.groups.iter().enumerate() {
                let mu = cm.group_mix.get(&g.id).copied().unwrap_or(0.0);
                if mu > 0.0 {
                    let mut row: Vec<(VarId, f64)> =
                        groups.iter().map(|v: &GroupVars| (v.total, -mu)).collect();
                    row[gi].1 += 1.0;
                    p.add_row(format!("mix[{}]", g.id), row, RowSense::Ge, 0.0);
                }
            }
        }
    }
    Ok(CmpModel {
        program: p,
        groups,
        allocations,
        slots,
    })
}

fn solved<'a>(status: &'a SolveStatus, context: &str) -> Result<&'a Solution, Error> {
    match status {
        SolveStatus::Optimal(s) => Ok(s),
        SolveStatus::Infeasible(_) => Err(Error::Infeasible(context.to_string())),
        SolveStatus::Error { error, .. } => Err(Error::Solver {
            context: context.to_string(),
            source: error.clone(),
        }),
    }
}

pub(crate) fn expect_optimal<'a>(status: &'a SolveStatus, context: &str) -> Result<&'a Solution, Error> {
    solved(status, context)
}

/// Maximum throughput of the instance (no case-mix constraints beyond sub-mix).
pub fn max_throughput(
    inst: &HospitalInstance,
    opts: &ModelOptions,
    backend: &dyn Backend,
) -> Result<(f64, Caseload), Error> {
    let mut m = build_model(inst, None, opts)?;
    m.set_throughput_objective();
    let status = backend.solve(&m.program);
    let sol = solved(&status, "maximum throughput")?;
    let cl = m.caseload(inst, sol);
    cl.check(inst)?;
    Ok((cl.total(), cl))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBound {
    pub group: String,
    pub bound: f64,
}

/// Treatment limit of every group when it has all resources to itself.
pub fn compute_upper_bounds(
    inst: &HospitalInstance,
    backend: &dyn Backend,
) -> Result<Vec<GroupBound>, Error> {
    inst.validate()?;
    (0..inst.groups.len())
        .into_par_iter()
        .map(|gi| {
            let single = inst.restricted_to(&[gi]);
            let id = &inst.groups[gi].id;
            let mut m = build_model(&single, None, &ModelOptions::pooled())?;
            m.set_throughput_objective();
            let status = backend.solve(&m.program);
            let sol = solved(&status, &format!("upper bound of group {id}"))?;
            Ok(GroupBound {
                group: id.clone(),
                bound: sol.objective.max(0.0),
            })
        })
        .collect()
}

/// Bounds used as utility domains and output caps: the instance's published
/// values when present, otherwise computed.
pub fn planning_bounds(inst: &HospitalInstance, backend: &dyn Backend) -> Result<Vec<f64>, Error> {
    inst.validate()?;
    match &inst.published_bounds {
        Some(pb) => Ok(inst.groups.iter().map(|g| pb[&g.id]).collect()),
        None => Ok(compute_upper_bounds(inst, backend)?
            .into_iter()
            .map(|b| b.bound)
            .collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeCaseload {
    pub id: String,
    pub patients: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCaseload {
    pub id: String,
    pub total: f64,
    #[serde(default)]
    pub subtypes: Vec<SubtypeCaseload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub group: String,
    pub subtype: String,
    pub activity: String,
    pub resource: String,
    pub patients: f64,
}

/// Patients treated per group and subtype, with the resource allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caseload {
    pub groups: Vec<GroupCaseload>,
    #[serde(default)]
    pub allocations: Vec<Allocation>,
}

impl Caseload {
    /// All-zero caseload for `inst`.
    pub fn zero(inst: &HospitalInstance) -> Caseload {
        Caseload {
            groups: inst
                .groups
                .iter()
                .map(|g| GroupCaseload {
                    id: g.id.clone(),
                    total: 0.0,
                    subtypes: g
                        .subtypes
                        .iter()
                        .map(|s| SubtypeCaseload {
                            id: s.id.clone(),
                            patients: 0.0,
                        })
                        .collect(),
                })
                .collect(),
            allocations: Vec::new(),
        }
    }

    /// Total throughput.
    pub fn total(&self) -> f64 {
        self.groups.iter().map(|g| g.total).sum()
    }

    pub fn group_totals(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.total).collect()
    }

    /// Group totals aligned with `inst.groups`; missing groups count as zero.
    pub fn totals_for(&self, inst: &HospitalInstance) -> Result<Vec<f64>, Error> {
        for (i, g) in self.groups.iter().enumerate() {
            if inst.group_index(&g.id).is_none() {
                return Err(invalid(format!("/groups/{i}/id"), format!("unknown group {}", g.id)));
            }
            if !g.total.is_finite() || g.total < 0.0 {
                return Err(invalid(format!("/groups/{i}/total"), "must be a nonnegative number"));
            }
        }
        Ok(inst
            .groups
            .iter()
            .map(|g| {
                self.groups
                    .iter()
                    .find(|c| c.id == g.id)
                    .map_or(0.0, |c| c.total)
            })
            .collect())
    }

    /// Case-mix percentages `100 n_g / N`; `None` when nothing is treated.
    pub fn case_mix_pct(&self) -> Option<Vec<f64>> {
        let n = self.total();
        (n > 1e-9).then(|| self.groups.iter().map(|g| 100.0 * g.total / n).collect())
    }

    /// Re-checks the flow, hierarchy and capacity relations against `inst`.
    pub fn check(&self, inst: &HospitalInstance) -> Result<(), Error> {
        let tol = |scale: f64| FEAS_TOL * scale.abs().max(1.0);
        let mut flows: HashMap<(&str, &str, &str), f64> = HashMap::new();
        let mut used: HashMap<&str, f64> = HashMap::new();
        for a in &self.allocations {
            if a.patients < -tol(0.0) {
                return Err(invalid("/allocations", "negative allocation"));
            }
            *flows
                .entry((a.group.as_str(), a.subtype.as_str(), a.activity.as_str()))
                .or_default() += a.patients;
            let g = inst
                .groups
                .iter()
                .find(|g| g.id == a.group)
                .ok_or_else(|| invalid("/allocations", format!("unknown group {}", a.group)))?;
            let s = g
                .subtypes
                .iter()
                .find(|s| s.id == a.subtype)
                .ok_or_else(|| invalid("/allocations", format!("unknown subtype {}", a.subtype)))?;
            let act = s
                .activities
                .iter()
                .find(|x| x.id == a.activity)
                .ok_or_else(|| invalid("/allocations", format!("unknown activity {}", a.activity)))?;
            if !act.eligible_resources.contains(&a.resource) {
                return Err(invalid(
                    "/allocations",
                    format!("{} is not eligible for {}.{}.{}", a.resource, a.group, a.subtype, a.activity),
                ));
            }
            *used.entry(a.resource.as_str()).or_default() += a.patients * act.duration_hours;
        }
        for (gi, gc) in self.groups.iter().enumerate() {
            let g = inst
                .groups
                .iter()
                .find(|g| g.id == gc.id)
                .ok_or_else(|| invalid(format!("/groups/{gi}"), format!("unknown group {}", gc.id)))?;
            let sum: f64 = gc.subtypes.iter().map(|s| s.patients).sum();
            if (gc.total - sum).abs() > tol(gc.total) {
                return Err(invalid(
                    format!("/groups/{gi}"),
                    format!("group {} total {} differs from subtype sum {}", gc.id, gc.total, sum),
                ));
            }
            for sc in &gc.subtypes {
                let s = g.subtypes.iter().find(|s| s.id == sc.id).ok_or_else(|| {
                    invalid(format!("/groups/{gi}/subtypes"), format!("unknown subtype {}", sc.id))
                })?;
                for a in s.activities.iter().filter(|a| a.duration_hours > 0.0) {
                    let f = flows
                        .get(&(gc.id.as_str(), sc.id.as_str(), a.id.as_str()))
                        .copied()
                        .unwrap_or(0.0);
                    if (f - sc.patients).abs() > tol(sc.patients) {
                        return Err(invalid(
                            format!("/groups/{gi}/subtypes"),
                            format!(
                                "{}.{} activity {} allocates {} patients, expected {}",
                                gc.id, sc.id, a.id, f, sc.patients
                            ),
                        ));
                    }
                }
            }
        }
        for r in &inst.resources {
            let u = used.get(r.id.as_str()).copied().unwrap_or(0.0);
            let cap = r.availability(inst.horizon_weeks);
            if u > cap + tol(cap) {
                return Err(invalid(
                    "/allocations",
                    format!("resource {} used {u} h of {cap} h", r.id),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SimplexBackend;

    fn act(id: &str, t: f64, res: &[&str]) -> Activity {
        Activity {
            id: id.into(),
            duration_hours: t,
            eligible_resources: res.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn group(id: &str, t: f64) -> PatientGroup {
        PatientGroup {
            id: id.into(),
            name: None,
            subtypes: vec![Subtype {
                id: "S".into(),
                mix_fraction: 1.0,
                activities: vec![act("OT", t, &["T1"])],
            }],
            group_mix: None,
        }
    }

    fn toy() -> HospitalInstance {
        HospitalInstance {
            schema_version: 1,
            name: None,
            horizon_weeks: 1,
            resources: vec![Resource {
                id: "T1".into(),
                kind: ResourceKind::Theatre,
                bed_count: 1,
                weekly_hours: 100.0,
            }],
            groups: vec![group("A", 1.0), group("B", 2.0)],
            published_bounds: None,
        }
    }

    #[test]
    fn toy_bounds_and_throughput() {
        let b = SimplexBackend::default();
        let bounds = compute_upper_bounds(&toy(), &b).unwrap();
        assert!((bounds[0].bound - 100.0).abs() < 1e-9);
        assert!((bounds[1].bound - 50.0).abs() < 1e-9);
        let (n, cl) = max_throughput(&toy(), &ModelOptions::pooled(), &b).unwrap();
        assert!((n - 100.0).abs() < 1e-9);
        assert!((cl.groups[0].total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_instance_has_empty_program() {
        let mut inst = toy();
        inst.groups.clear();
        let mut m = build_model(&inst, None, &ModelOptions::pooled()).unwrap();
        m.set_throughput_objective();
        assert_eq!(m.program.num_vars(), 0);
        let s = SimplexBackend::default().solve(&m.program);
        assert_eq!(s.solution().unwrap().objective, 0.0);
    }

    #[test]
    fn validation_paths() {
        let mut inst = toy();
        inst.groups[0].subtypes[0].mix_fraction = 0.9;
        let e = inst.validate().unwrap_err().to_string();
        assert!(e.starts_with("/groups/0/subtypes"), "{e}");

        let mut inst = toy();
        inst.groups[1].subtypes[0].activities[0].eligible_resources[0] = "X".into();
        let e = inst.validate().unwrap_err().to_string();
        assert!(e.contains("/groups/1/subtypes/0/activities/0/eligible_resources/0"), "{e}");

        let mut inst = toy();
        inst.groups[1].subtypes[0].activities[0].duration_hours = -1.0;
        assert!(inst.validate().unwrap_err().to_string().contains("negative"));
    }

    #[test]
    fn pooling_merges_interchangeable_resources() {
        let mut inst = toy();
        inst.resources.push(Resource {
            id: "T2".into(),
            kind: ResourceKind::Theatre,
            bed_count: 1,
            weekly_hours: 50.0,
        });
        for g in &mut inst.groups {
            g.subtypes[0].activities[0].eligible_resources.push("T2".into());
        }
        let pooled = build_model(&inst, None, &ModelOptions::pooled()).unwrap();
        let split = build_model(&inst, None, &ModelOptions::default()).unwrap();
        assert_eq!(pooled.slots.len(), 1);
        assert_eq!(split.slots.len(), 2);
        let b = SimplexBackend::default();
        let (np, clp) = max_throughput(&inst, &ModelOptions::pooled(), &b).unwrap();
        let (ns, _) = max_throughput(&inst, &ModelOptions::default(), &b).unwrap();
        assert!((np - 150.0).abs() < 1e-9 && (ns - 150.0).abs() < 1e-9);
        clp.check(&inst).unwrap();
        let t2: f64 = clp
            .allocations
            .iter()
            .filter(|a| a.resource == "T2")
            .map(|a| a.patients)
            .sum();
        assert!((t2 - 50.0).abs() < 1e-9);
    }

    #[test]
    fn group_mix_limits_throughput() {
        let mut cm = CaseMixSpec::default();
        cm.group_mix.insert("A".into(), 0.5);
        cm.group_mix.insert("B".into(), 0.5);
        let mut m = build_model(&toy(), Some(&cm), &ModelOptions::pooled()).unwrap();
        m.set_throughput_objective();
        let s = SimplexBackend::default().solve(&m.program);
        // n_A = n_B, n_A + 2 n_B <= 100
        assert!((s.solution().unwrap().objective - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn check_detects_overuse() {
        let b = SimplexBackend::default();
        let (_, mut cl) = max_throughput(&toy(), &ModelOptions::pooled(), &b).unwrap();
        for a in &mut cl.allocations {
            a.patients *= 1.01;
        }
        for g in &mut cl.groups {
            g.total *= 1.01;
            for s in &mut g.subtypes {
                s.patients *= 1.01;
            }
        }
        assert!(cl.check(&toy()).is_err());
    }
}
