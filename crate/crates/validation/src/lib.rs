//! Random toy instances, brute-force grid oracles and reusable invariant
//! checks for the case-mix engine.
//!
//! Toys keep every capacity and processing time integral and every
//! utility threshold on an integer output, so rounding a continuous caseload
//! down to the grid keeps it feasible and on the same side of every jump.

use casemix_core::model::{Activity, PatientGroup, Resource, ResourceKind, Subtype};
use casemix_core::scalarize::GpmMode;
use casemix_core::solver::{encode_plf, Direction, EncodeOptions, Program, EPS_OPEN};
use casemix_core::utility::{instantiate, CurveVariant, Quantity, UfParams};
use casemix_core::{
    check_pareto, repair, solve_asf, solve_gam, solve_gpm, AsfConfig, Backend, GoalConfig,
    HospitalInstance, Planner, PiecewiseLinearUtility, RepairStrategy, SimplexBackend, SolveResult,
    UfSpec, UfTemplate,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A toy instance with one single-activity path per (group, resource) pair.
#[derive(Debug, Clone)]
pub struct Toy {
    pub inst: HospitalInstance,
    /// `times[g][r]`: hours of resource `r` per patient of group `g` (0 if unused).
    pub times: Vec<Vec<u32>>,
    pub caps: Vec<u32>,
}

impl Toy {
    pub fn groups(&self) -> usize {
        self.times.len()
    }

    /// Treatment limits by hand: the tightest resource a group uses.
    pub fn bounds(&self) -> Vec<f64> {
        self.times
            .iter()
            .map(|t| {
                t.iter()
                    .zip(&self.caps)
                    .filter(|(&t, _)| t > 0)
                    .map(|(&t, &c)| c as f64 / t as f64)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn fits(&self, n: &[f64], rel_tol: f64) -> bool {
        self.caps.iter().enumerate().all(|(r, &c)| {
            let used: f64 = (0..self.groups()).map(|g| n[g] * self.times[g][r] as f64).sum();
            used <= c as f64 * (1.0 + rel_tol) + rel_tol
        }) && n.iter().all(|&x| x >= -1e-9)
    }

    fn fits_grid(&self, k: &[usize]) -> bool {
        self.caps.iter().enumerate().all(|(r, &c)| {
            (0..self.groups())
                .map(|g| k[g] as u64 * self.times[g][r] as u64)
                .sum::<u64>()
                <= c as u64
        })
    }

    /// Calls `f` on every feasible integer caseload.
    pub fn for_each_grid_point(&self, mut f: impl FnMut(&[usize])) {
        let top: Vec<usize> = self.bounds().iter().map(|b| b.floor() as usize).collect();
        let mut k = vec![0usize; self.groups()];
        loop {
            if self.fits_grid(&k) {
                f(&k);
            }
            let mut g = 0;
            loop {
                if g == k.len() {
                    return;
                }
                if k[g] < top[g] {
                    k[g] += 1;
                    // Later coordinates only grow the load, so skip the rest of
                    // this row once it overflows.
                    if self.fits_grid(&k) || g + 1 == k.len() {
                        break;
                    }
                }
                k[g] = 0;
                g += 1;
            }
        }
    }

    pub fn planner<'a>(&'a self, backend: &'a dyn Backend) -> Planner<'a> {
        Planner::with_planning_bounds(&self.inst, backend).unwrap()
    }
}

/// 1-3 groups, 1-3 resources, capacities 20-100 hours, 1-4 hours per patient.
pub fn random_toy(rng: &mut StdRng) -> Toy {
    let ng = rng.random_range(1..=3usize);
    let nr = rng.random_range(1..=3usize);
    let caps: Vec<u32> = (0..nr).map(|_| rng.random_range(20..=100)).collect();
    let mut times = vec![vec![0u32; nr]; ng];
    for row in &mut times {
        for t in row.iter_mut() {
            if rng.random_bool(0.6) {
                *t = rng.random_range(1..=4);
            }
        }
        if row.iter().all(|&t| t == 0) {
            let r = rng.random_range(0..nr);
            row[r] = rng.random_range(1..=4);
        }
    }
    toy_from(&times, &caps)
}

pub fn toy_from(times: &[Vec<u32>], caps: &[u32]) -> Toy {
    let resources = caps
        .iter()
        .enumerate()
        .map(|(r, &c)| Resource {
            id: format!("R{r}"),
            kind: ResourceKind::Theatre,
            bed_count: 1,
            weekly_hours: c as f64,
        })
        .collect();
    let groups = times
        .iter()
        .enumerate()
        .map(|(g, row)| PatientGroup {
            id: format!("G{g}"),
            name: None,
            group_mix: None,
            subtypes: vec![Subtype {
                id: "S".into(),
                mix_fraction: 1.0,
                activities: row
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| t > 0)
                    .map(|(r, &t)| Activity {
                        id: format!("A{r}"),
                        duration_hours: t as f64,
                        eligible_resources: vec![format!("R{r}")],
                    })
                    .collect(),
            }],
        })
        .collect();
    Toy {
        inst: HospitalInstance {
            schema_version: 1,
            name: Some("random toy".into()),
            horizon_weeks: 1,
            resources,
            groups,
            published_bounds: None,
        },
        times: times.to_vec(),
        caps: caps.to_vec(),
    }
}

fn abs(v: usize) -> Option<Quantity> {
    Some(Quantity::Absolute(v as f64))
}

/// A piecewise-linear catalog utility whose thresholds sit on integers.
pub fn random_grid_spec(rng: &mut StdRng, bound: f64) -> UfSpec {
    const TEMPLATES: [UfTemplate; 12] = [
        UfTemplate::Uf1,
        UfTemplate::Uf2,
        UfTemplate::Uf3,
        UfTemplate::Uf4,
        UfTemplate::Uf5,
        UfTemplate::Uf6,
        UfTemplate::Uf8,
        UfTemplate::Uf9,
        UfTemplate::Uf11,
        UfTemplate::Uf12,
        UfTemplate::Uf13,
        UfTemplate::Uf14,
    ];
    let top = bound.floor() as usize;
    let t = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
    let lo = rng.random_range(1..top);
    let hi = rng.random_range(lo + 1..=top);
    let mut p = UfParams::default();
    match t {
        UfTemplate::Uf1 => {}
        UfTemplate::Uf2 | UfTemplate::Uf5 => p.indifference = abs(lo),
        UfTemplate::Uf3 | UfTemplate::Uf6 => p.aspiration = abs(hi),
        UfTemplate::Uf4 => {
            p.indifference = abs(lo);
            p.aspiration = abs(hi);
        }
        UfTemplate::Uf8 => p.indifference = abs(lo),
        UfTemplate::Uf9 => {
            p.indifference = abs(lo);
            p.aspiration = abs(hi);
            p.tier_utility = Some(rng.random_range(0.0..100.0));
        }
        UfTemplate::Uf11 => {
            p.aspiration = abs(hi);
            p.income = Some(rng.random_range(0.0..3.0));
            p.penalty = Some(rng.random_range(0.0..3.0));
        }
        UfTemplate::Uf12 => {
            p.indifference = abs(lo);
            p.reward = Some(rng.random_range(0.0..3.0));
        }
        UfTemplate::Uf13 => {
            p.indifference = abs(lo);
            p.reward = Some(rng.random_range(0.0..3.0));
            p.penalty = Some(rng.random_range(0.0..3.0));
        }
        UfTemplate::Uf14 => {
            p.indifference = abs(lo);
            p.penalty = Some(rng.random_range(0.0..3.0));
        }
        _ => unreachable!(),
    }
    UfSpec::with_params(t, p)
}

fn frac(rng: &mut StdRng, lo: f64, hi: f64) -> Option<Quantity> {
    Some(Quantity::Fraction(rng.random_range(lo..hi)))
}

/// Any catalog template with random parameters, nonlinear variants included.
pub fn random_catalog_spec(rng: &mut StdRng) -> UfSpec {
    let t = UfTemplate::ALL[rng.random_range(0..UfTemplate::ALL.len())];
    let mut p = UfParams::default();
    let points = Some(rng.random_range(8..=40usize));
    match t {
        UfTemplate::Uf1 => match rng.random_range(0..5) {
            0 => {}
            1 => {
                p.variant = Some(CurveVariant::Power);
                p.alpha = Some(rng.random_range(0.3..3.0));
                p.points = points;
            }
            2 => {
                p.variant = Some(CurveVariant::ComplementPower);
                p.beta = Some(rng.random_range(0.3..3.0));
                p.points = points;
            }
            3 => {
                p.variant = Some(CurveVariant::Exp);
                p.points = points;
            }
            _ => {
                p.variant = Some(CurveVariant::CalibratedExp);
                p.alpha = Some(rng.random_range(0.5..5.0));
                p.points = points;
            }
        },
        UfTemplate::Uf2 => {
            p.indifference = frac(rng, 0.0, 0.9);
            if rng.random_bool(0.3) {
                p.alpha = Some(rng.random_range(0.3..3.0));
                p.points = points;
            }
        }
        UfTemplate::Uf3 => {
            p.aspiration = frac(rng, 0.05, 1.0);
            if rng.random_bool(0.3) {
                p.alpha = Some(rng.random_range(0.3..3.0));
                p.points = points;
            }
        }
        UfTemplate::Uf4 | UfTemplate::Uf9 => {
            let a = rng.random_range(0.0..0.8);
            p.indifference = Some(Quantity::Fraction(a));
            p.aspiration = Some(Quantity::Fraction(rng.random_range(a + 0.05..1.0)));
            if t == UfTemplate::Uf9 {
                p.tier_utility = Some(rng.random_range(0.0..100.0));
            }
        }
        UfTemplate::Uf5 => p.indifference = frac(rng, 0.0, 0.9),
        UfTemplate::Uf6 => {
            if rng.random_bool(0.3) {
                p.variant = Some(CurveVariant::Beta);
                p.alpha = Some(rng.random_range(1.5..5.0));
                p.beta = Some(rng.random_range(1.5..5.0));
                p.points = points;
            } else {
                p.aspiration = frac(rng, 0.05, 1.0);
            }
        }
        UfTemplate::Uf7 => {
            p.reference = frac(rng, 0.1, 0.9);
            p.steepness = Some(rng.random_range(1.0..20.0));
            p.points = points;
        }
        UfTemplate::Uf8 => p.indifference = frac(rng, 0.05, 0.95),
        UfTemplate::Uf10 => p.aspiration = frac(rng, 0.05, 0.95),
        UfTemplate::Uf11 => {
            p.aspiration = frac(rng, 0.05, 1.0);
            p.income = Some(rng.random_range(0.0..0.2));
            p.penalty = Some(rng.random_range(0.0..0.2));
        }
        UfTemplate::Uf12 | UfTemplate::Uf13 | UfTemplate::Uf14 => {
            p.indifference = frac(rng, 0.05, 0.95);
            p.reward = Some(rng.random_range(0.0..0.2));
            p.penalty = Some(rng.random_range(0.0..0.2));
            if t == UfTemplate::Uf12 {
                p.penalty = None;
            }
            if t == UfTemplate::Uf14 {
                p.reward = None;
            }
        }
    }
    UfSpec::with_params(t, p)
}

/// Largest slope magnitude of the linear pieces (jumps excluded).
pub fn lipschitz(plf: &PiecewiseLinearUtility) -> f64 {
    plf.pieces().iter().map(|p| p.slope.abs()).fold(0.0, f64::max)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Checks a solve's caseload against the toy's own capacity arithmetic.
fn check_caseload(toy: &Toy, r: &SolveResult) -> Result<Vec<f64>, String> {
    let x = r.patients();
    if !toy.fits(&x, 1e-6) {
        return Err(format!("caseload {x:?} exceeds capacity"));
    }
    let b = toy.bounds();
    if let Some(g) = (0..x.len()).find(|&g| x[g] > b[g] * (1.0 + 1e-9) + 1e-9) {
        return Err(format!("group {g}: {} above its limit {}", x[g], b[g]));
    }
    Ok(x)
}

/// Reported utilities must be the PLF value at the caseload, or at a
/// breakpoint within solver tolerance of it (the caseload may sit a
/// round-off below a jump and be scored on the segment past it).
fn check_utilities(plfs: &[PiecewiseLinearUtility], x: &[f64], u: &[f64]) -> Result<(), String> {
    for g in 0..x.len() {
        let d = plfs[g].domain_max();
        let at = plfs[g].evaluate_clamped(x[g]);
        let ok = close(u[g], at, 1e-5)
            || plfs[g]
                .breakpoints()
                .iter()
                .filter(|&&t| (t - x[g]).abs() <= 1e-6 * d)
                .any(|&t| close(u[g], plfs[g].evaluate_clamped(t), 1e-5));
        if !ok {
            return Err(format!("group {g}: utility {} but u({}) = {at}", u[g], x[g]));
        }
    }
    Ok(())
}

pub struct AsfCase {
    pub eps1: f64,
    pub eps2: f64,
    pub weights: Vec<f64>,
}

fn asf_value(c: &AsfCase, u: &[f64]) -> f64 {
    let wu: Vec<f64> = u.iter().zip(&c.weights).map(|(u, w)| u * w).collect();
    c.eps1 * wu.iter().copied().fold(f64::INFINITY, f64::min) + c.eps2 * wu.iter().sum::<f64>()
}

/// ASF optimum vs exhaustive search over the integer grid.
///
/// The solver must do at least as well as every grid point, and rounding its
/// caseload down to the grid may lose at most one output unit per group.
pub fn check_asf_oracle(
    toy: &Toy,
    specs: &[UfSpec],
    case: &AsfCase,
    backend: &dyn Backend,
) -> Result<(), String> {
    let planner = toy.planner(backend);
    let bounds = toy.bounds();
    let plfs: Vec<_> = specs
        .iter()
        .zip(&bounds)
        .map(|(s, &b)| instantiate(s, b).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let cfg = AsfConfig::new(case.eps1, case.eps2).with_weights(case.weights.clone());
    let r = solve_asf(&planner, &plfs, &cfg).map_err(|e| e.to_string())?;
    let x = check_caseload(toy, &r)?;
    let u = r.utilities();
    check_utilities(&plfs, &x, &u)?;
    let solved = asf_value(case, &u);

    let tables: Vec<Vec<f64>> = plfs
        .iter()
        .zip(&bounds)
        .map(|(p, b)| (0..=b.floor() as usize).map(|k| p.evaluate(k as f64).unwrap()).collect())
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut uk = vec![0.0; toy.groups()];
    toy.for_each_grid_point(|k| {
        for g in 0..k.len() {
            uk[g] = tables[g][k[g]];
        }
        best = best.max(asf_value(case, &uk));
    });
    let lw: Vec<f64> = plfs.iter().zip(&case.weights).map(|(p, w)| lipschitz(p) * w).collect();
    let resolution = case.eps1 * lw.iter().copied().fold(0.0, f64::max) + case.eps2 * lw.iter().sum::<f64>();
    let tol = 1e-5 + 1e-6 * best.abs();
    if solved < best - tol {
        return Err(format!("solver {solved} below grid optimum {best} (x = {x:?})"));
    }
    if solved > best + resolution + tol {
        return Err(format!(
            "solver {solved} beats grid optimum {best} by more than the grid resolution {resolution}"
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalModel {
    Gam,
    GpmSum,
    GpmMinimaxUnder,
}

fn goal_value(model: GoalModel, goals: &[f64], x: &[f64]) -> f64 {
    let dev = goals.iter().zip(x);
    match model {
        GoalModel::Gam => dev.map(|(g, x)| (x - g).abs() / g).fold(0.0, f64::max),
        GoalModel::GpmSum => dev.map(|(g, x)| (x - g).abs() / g).sum(),
        GoalModel::GpmMinimaxUnder => dev.map(|(g, x)| (g - x).max(0.0) / g).fold(0.0, f64::max),
    }
}

/// Goal models (relative deviations, unit weights) vs grid search.
pub fn check_goal_oracle(
    toy: &Toy,
    goals: &[f64],
    model: GoalModel,
    backend: &dyn Backend,
) -> Result<(), String> {
    let planner = toy.planner(backend);
    let cfg = GoalConfig::new(goals.to_vec());
    let r = match model {
        GoalModel::Gam => solve_gam(&planner, &cfg),
        GoalModel::GpmSum => solve_gpm(&planner, &cfg, GpmMode::Sum),
        GoalModel::GpmMinimaxUnder => solve_gpm(&planner, &cfg, GpmMode::MinimaxUnder),
    }
    .map_err(|e| e.to_string())?;
    let x = check_caseload(toy, &r)?;
    let solved = goal_value(model, goals, &x);
    let mut best = f64::INFINITY;
    let mut xk = vec![0.0; toy.groups()];
    toy.for_each_grid_point(|k| {
        for g in 0..k.len() {
            xk[g] = k[g] as f64;
        }
        best = best.min(goal_value(model, goals, &xk));
    });
    let per_unit: Vec<f64> = goals.iter().map(|g| 1.0 / g).collect();
    let resolution = match model {
        GoalModel::GpmSum => per_unit.iter().sum(),
        _ => per_unit.iter().copied().fold(0.0, f64::max),
    };
    let tol = 1e-6;
    if solved > best + tol {
        return Err(format!("{model:?}: solver {solved} worse than grid optimum {best} (x = {x:?})"));
    }
    if solved < best - resolution - tol {
        return Err(format!("{model:?}: solver {solved} beats grid optimum {best} by more than {resolution}"));
    }
    if model == GoalModel::Gam {
        let delta = r.goal.as_ref().and_then(|g| g.delta).ok_or("GAM result has no delta")?;
        if !close(delta, solved, 1e-6) {
            return Err(format!("GAM delta {delta} but the caseload deviates by {solved}"));
        }
    }
    Ok(())
}

/// Random integral goals within each group's limit.
pub fn random_goals(rng: &mut StdRng, bounds: &[f64]) -> Vec<f64> {
    bounds.iter().map(|b| rng.random_range(1..=b.floor() as usize) as f64).collect()
}

/// Runs the full oracle battery on one random toy.
pub fn oracle_instance(seed: u64, backend: &dyn Backend) -> Result<usize, String> {
    let mut rng = rng(seed);
    let toy = random_toy(&mut rng);
    let computed = toy.planner(backend).bounds().to_vec();
    for (g, (a, b)) in computed.iter().zip(toy.bounds()).enumerate() {
        if !close(*a, b, 1e-9 * b) {
            return Err(format!("seed {seed}: limit of group {g} is {a}, expected {b}"));
        }
    }
    let bounds = toy.bounds();
    let n = toy.groups();
    let specs: Vec<UfSpec> = bounds.iter().map(|&b| random_grid_spec(&mut rng, b)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1..=3) as f64).collect();
    let cases = [
        AsfCase { eps1: 1.0, eps2: 0.0, weights: vec![1.0; n] },
        AsfCase { eps1: 0.0, eps2: 1.0, weights: vec![1.0; n] },
        AsfCase { eps1: 1.0, eps2: 0.1, weights },
    ];
    let mut checks = 0;
    for c in &cases {
        check_asf_oracle(&toy, &specs, c, backend)
            .map_err(|e| format!("seed {seed}, specs {specs:?}, eps ({}, {}): {e}", c.eps1, c.eps2))?;
        checks += 1;
    }
    let goals = random_goals(&mut rng, &bounds);
    for m in [GoalModel::Gam, GoalModel::GpmSum, GoalModel::GpmMinimaxUnder] {
        check_goal_oracle(&toy, &goals, m, backend).map_err(|e| format!("seed {seed}, goals {goals:?}: {e}"))?;
        checks += 1;
    }
    Ok(checks)
}

/// One encoding-exactness case. Returns `Ok(false)` when the random
/// parameters do not describe a valid utility.
pub fn encoding_case(rng: &mut StdRng, backend: &dyn Backend) -> Result<bool, String> {
    let spec = random_catalog_spec(rng);
    let d = rng.random_range(10.0..5000.0);
    let Ok(plf) = instantiate(&spec, d) else {
        return Ok(false);
    };
    let ctx = |what: &str| format!("{spec:?} on [0, {d}]: {what}");

    // Free output with a random linear reward or cost on it.
    let c = rng.random_range(-2.0..2.0) * 100.0 / d;
    let force_binary = rng.random_bool(0.3);
    let solve_free = |force_binary: bool| -> Result<(f64, f64, f64, Option<usize>), String> {
        let mut prog = Program::new();
        let x = prog.add_var("x", 0.0, d);
        let opts = EncodeOptions { force_binary, ..Default::default() };
        let vars = encode_plf(&mut prog, x, &plf, &opts).map_err(|e| ctx(&e.to_string()))?;
        prog.set_objective(Direction::Maximize, vec![(vars.u, 1.0), (x, c)], 0.0);
        let status = backend.solve(&prog);
        let sol = status.solution().ok_or_else(|| ctx(&format!("not solved: {status:?}")))?;
        let seg = vars
            .binaries
            .iter()
            .position(|&b| sol.value(b) > 0.5);
        Ok((sol.value(x), sol.value(vars.u), sol.objective, seg))
    };
    let (x, u, obj, seg) = solve_free(force_binary)?;
    let expected = match seg {
        Some(i) => {
            let p = plf.pieces()[i];
            let right = if p.open_right { (p.right - EPS_OPEN * d).max(p.left) } else { p.right };
            let xs = x.clamp(p.left, right);
            if (x - xs).abs() > 1e-6 * d {
                return Err(ctx(&format!("x = {x} lies outside its segment [{}, {right}]", p.left)));
            }
            plf.evaluate(xs).unwrap()
        }
        None => plf.evaluate(x).map_err(|e| ctx(&e.to_string()))?,
    };
    if !close(u, expected, 1e-5) {
        return Err(ctx(&format!("free: u = {u} but evaluate({x}) = {expected}")));
    }

    // The fast path for concave utilities and segment selection agree.
    if plf.is_concave() && !force_binary {
        let (_, _, obj_bin, _) = solve_free(true)?;
        if !close(obj, obj_bin, 1e-6 * obj.abs().max(1.0)) {
            return Err(ctx(&format!("concave form {obj} vs segment selection {obj_bin}")));
        }
    }

    // Pinned output: the utility variable must equal evaluate exactly,
    // whether the objective pushes it up or down.
    let a = rng.random_range(0.0..=d);
    let near_jump = plf.jumps().iter().any(|&(t, h)| h != 0.0 && a < t && t - a <= 2.0 * EPS_OPEN * d);
    if !near_jump {
        let want = plf.evaluate(a).unwrap();
        for maximize in [true, false] {
            let mut prog = Program::new();
            let x = prog.add_var("x", a, a);
            let opts = EncodeOptions { maximized: maximize, ..Default::default() };
            let vars = encode_plf(&mut prog, x, &plf, &opts).map_err(|e| ctx(&e.to_string()))?;
            let dir = if maximize { Direction::Maximize } else { Direction::Minimize };
            prog.set_objective(dir, vec![(vars.u, 1.0)], 0.0);
            let status = backend.solve(&prog);
            let sol = status.solution().ok_or_else(|| ctx(&format!("pinned at {a}: {status:?}")))?;
            if !close(sol.value(vars.u), want, 1e-5) {
                return Err(ctx(&format!(
                    "pinned at {a} ({}): u = {} but evaluate = {want}",
                    if maximize { "max" } else { "min" },
                    sol.value(vars.u)
                )));
            }
        }
    }
    Ok(true)
}

/// Runs encoding cases until `count` valid ones have passed.
pub fn encoding_suite(seed: u64, count: usize, backend: &dyn Backend) -> Result<usize, String> {
    let mut rng = rng(seed);
    let mut done = 0;
    let mut tries = 0;
    while done < count {
        tries += 1;
        if tries > 20 * count {
            return Err(format!("only {done} valid utilities in {tries} draws"));
        }
        if encoding_case(&mut rng, backend)? {
            done += 1;
        }
    }
    Ok(done)
}

/// UF2, UF3 and UF4 reduce to UF1 (and UF4 to UF3) at their degenerate settings.
pub fn check_collapses(upper: f64, aspiration_frac: f64, xs: &[f64]) -> Result<(), String> {
    let build = |t: UfTemplate, p: UfParams| instantiate(&UfSpec::with_params(t, p), upper).unwrap();
    let uf1 = build(UfTemplate::Uf1, UfParams::default());
    let uf2 = build(
        UfTemplate::Uf2,
        UfParams { indifference: Some(Quantity::Absolute(0.0)), ..Default::default() },
    );
    let na = Some(Quantity::Fraction(aspiration_frac));
    let uf3 = build(UfTemplate::Uf3, UfParams { aspiration: na, ..Default::default() });
    let uf4 = build(
        UfTemplate::Uf4,
        UfParams { indifference: Some(Quantity::Absolute(0.0)), aspiration: na, ..Default::default() },
    );
    let uf4_full = build(
        UfTemplate::Uf4,
        UfParams {
            indifference: Some(Quantity::Absolute(0.0)),
            aspiration: Some(Quantity::Fraction(1.0)),
            ..Default::default()
        },
    );
    for &x in xs {
        let x = x * upper;
        let pairs = [
            ("UF2(0) vs UF1", &uf2, &uf1),
            ("UF4(0, a) vs UF3(a)", &uf4, &uf3),
            ("UF4(0, max) vs UF1", &uf4_full, &uf1),
        ];
        for (what, a, b) in pairs {
            let (ua, ub) = (a.evaluate(x).unwrap(), b.evaluate(x).unwrap());
            if !close(ua, ub, 1e-9 * ub.abs().max(1.0)) {
                return Err(format!("{what} at {x} of {upper}: {ua} vs {ub}"));
            }
        }
    }
    Ok(())
}

/// A monotone template's utility is nondecreasing along sorted points.
pub fn check_monotone(rng: &mut StdRng) -> Result<bool, String> {
    let spec = loop {
        let s = random_catalog_spec(rng);
        if s.template.is_monotone() {
            break s;
        }
    };
    let d = rng.random_range(1.0..5000.0);
    let Ok(plf) = instantiate(&spec, d) else {
        return Ok(false);
    };
    let mut xs: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..=d)).collect();
    xs.extend(plf.breakpoints());
    xs.extend([0.0, d]);
    xs.sort_by(f64::total_cmp);
    let us: Vec<f64> = xs.iter().map(|&x| plf.evaluate(x).unwrap()).collect();
    for i in 1..xs.len() {
        if us[i] < us[i - 1] - 1e-9 * us[i - 1].abs().max(1.0) {
            return Err(format!(
                "{spec:?} on [0, {d}] decreases from u({}) = {} to u({}) = {}",
                xs[i - 1],
                us[i - 1],
                xs[i],
                us[i]
            ));
        }
    }
    Ok(true)
}

/// At a goal-programming optimum no group is both over and under its goal.
pub fn check_gpm_complementarity(seed: u64, backend: &dyn Backend) -> Result<(), String> {
    let mut rng = rng(seed);
    let toy = random_toy(&mut rng);
    let planner = toy.planner(backend);
    let goals = random_goals(&mut rng, planner.bounds());
    for mode in [GpmMode::Sum, GpmMode::MinimaxUnder] {
        for relative in [true, false] {
            let mut cfg = GoalConfig::new(goals.clone());
            cfg.relative = relative;
            let r = solve_gpm(&planner, &cfg, mode).map_err(|e| e.to_string())?;
            let g = r.goal.as_ref().ok_or("no goal outcome")?;
            for (i, (o, u)) in g.over.iter().zip(&g.under).enumerate() {
                if o * u > 1e-6 {
                    return Err(format!("seed {seed}, {mode:?}: group {i} over {o} and under {u}"));
                }
                let x = r.groups[i].patients;
                if !close(x - goals[i], o - u, 1e-6 * goals[i].max(1.0)) {
                    return Err(format!("seed {seed}: group {i} at {x}, goal {}, over {o}, under {u}", goals[i]));
                }
            }
        }
    }
    Ok(())
}

/// Auditing a corrected caseload finds nothing more, and repairing a
/// repaired caseload changes nothing.
pub fn check_repair_idempotence(seed: u64, backend: &dyn Backend) -> Result<(), String> {
    let mut rng = rng(seed);
    let toy = random_toy(&mut rng);
    let planner = toy.planner(backend);
    let bounds = planner.bounds().to_vec();
    let specs: Vec<UfSpec> = bounds.iter().map(|&b| random_grid_spec(&mut rng, b)).collect();
    let plfs: Vec<_> = specs.iter().zip(&bounds).map(|(s, &b)| instantiate(s, b).unwrap()).collect();
    let base = solve_asf(&planner, &plfs, &AsfConfig::mmu()).map_err(|e| e.to_string())?;

    let first = check_pareto(&planner, &base.patients()).map_err(|e| e.to_string())?;
    let corrected = first.corrected.totals_for(&toy.inst).map_err(|e| e.to_string())?;
    let second = check_pareto(&planner, &corrected).map_err(|e| e.to_string())?;
    if second.diff > 1e-4 * second.base_throughput.max(1e-9) {
        return Err(format!("seed {seed}: corrected caseload still improvable by {}", second.diff));
    }

    let strategies = [
        RepairStrategy::sum_overachieve(),
        RepairStrategy::Preference { group: toy.inst.groups[rng.random_range(0..toy.groups())].id.clone() },
    ];
    for s in &strategies {
        let once = repair(&planner, &base.patients(), s, &plfs).map_err(|e| e.to_string())?;
        let twice = repair(&planner, &once.patients(), s, &plfs).map_err(|e| e.to_string())?;
        if !close(once.throughput, twice.throughput, 1e-6 * once.throughput.max(1.0)) {
            return Err(format!(
                "seed {seed}, {s:?}: throughput {} after one repair, {} after two",
                once.throughput, twice.throughput
            ));
        }
        for (a, b) in once.patients().iter().zip(twice.patients()) {
            if b < a - 1e-6 * a.max(1.0) {
                return Err(format!("seed {seed}, {s:?}: second repair lowered a group from {a} to {b}"));
            }
        }
    }
    Ok(())
}

pub fn backend() -> SimplexBackend {
    SimplexBackend::default()
}
