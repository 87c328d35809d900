//! Acceptance run over the bundled case study and random toys.
//!
//! Prints one PASS/FAIL line per criterion, followed by the individual
//! checks, and exits nonzero when any criterion fails. Reference values are
//! the published ones; the toy checks use independent brute-force oracles.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use casemix_core::io::bundled_case_study;
use casemix_core::scalarize::GpmMode;
use casemix_core::utility::{Quantity, UfParams};
use casemix_core::{
    check_pareto, compute_upper_bounds, solve_asf, solve_gam, solve_gpm, AsfConfig, GoalConfig,
    HospitalInstance, Planner, SimplexBackend, SolveResult, UfSpec, UfTemplate,
};

const PUBLISHED_LIMITS: [(&str, f64); 19] = [
    ("CARD", 2427.78),
    ("ENDO", 2817.25),
    ("ENT", 4884.2),
    ("FMAX", 1820.53),
    ("GAST", 5301.99),
    ("GYN", 5109.98),
    ("HEP", 3261.53),
    ("IMMU", 2652.76),
    ("NEPH", 4219.99),
    ("NEUR", 2470.08),
    ("ONC", 1278.37),
    ("OPHT", 6083.21),
    ("ORTH", 1999.34),
    ("PLAS", 1507.43),
    ("PSY", 1012.6),
    ("RESP", 3297.35),
    ("TRANS", 235.61),
    ("UROL", 3048.02),
    ("VASC", 649.9),
];
const PUBLISHED_TOTAL: f64 = 54077.91;
const MSU_THROUGHPUT: f64 = 31663.97;

/// Outcome of one criterion: a list of (passed, description) checks.
#[derive(Default)]
struct Criterion {
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push((ok, what.into()));
    }

    /// `got` within `rel` of `want`, or within `abs` when `want` is zero.
    fn near(&mut self, label: &str, got: f64, want: f64, rel: f64, abs: f64) {
        let tol = if want == 0.0 { abs } else { rel * want.abs() };
        let ok = (got - want).abs() <= tol;
        self.check(ok, format!("{label}: {got:.2} vs {want:.2} (tolerance {tol:.2})"));
    }

    fn error(&mut self, label: &str, e: impl std::fmt::Display) {
        self.check(false, format!("{label}: {e}"));
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|(ok, _)| *ok)
    }
}

fn spec(t: UfTemplate, f: impl FnOnce(&mut UfParams)) -> UfSpec {
    let mut p = UfParams::default();
    f(&mut p);
    UfSpec::with_params(t, p)
}

fn frac(v: f64) -> Option<Quantity> {
    Some(Quantity::Fraction(v))
}

fn solve_spec(p: &Planner<'_>, s: &UfSpec, cfg: &AsfConfig) -> Result<SolveResult, String> {
    let plfs = p.utilities_for(s).map_err(|e| e.to_string())?;
    solve_asf(p, &plfs, cfg).map_err(|e| e.to_string())
}

fn treatment_limits(inst: &HospitalInstance, be: &SimplexBackend) -> Criterion {
    let mut c = Criterion::default();
    let t = Instant::now();
    let bounds = match compute_upper_bounds(inst, be) {
        Ok(b) => b,
        Err(e) => {
            c.error("limits", e);
            return c;
        }
    };
    let elapsed = t.elapsed();
    for (id, want) in PUBLISHED_LIMITS {
        match bounds.iter().find(|b| b.group == id) {
            Some(b) => c.near(id, b.bound, want, 0.01, 0.0),
            None => c.error(id, "group missing"),
        }
    }
    c.near("total", bounds.iter().map(|b| b.bound).sum(), PUBLISHED_TOTAL, 0.01, 0.0);
    c.check(elapsed <= Duration::from_secs(30), format!("runtime {elapsed:.2?} (limit 30 s)"));
    c
}

fn goal_models(p: &Planner<'_>) -> Criterion {
    let mut c = Criterion::default();
    let goals = GoalConfig::new(p.bounds().to_vec());
    match solve_gam(p, &goals) {
        Ok(r) => {
            c.near("goal attainment throughput", r.throughput, 22389.66, 0.01, 0.0);
            c.near("goal attainment sum u", r.sum_u, 513.55, 0.01, 0.0);
            c.near("goal attainment min u", r.min_u, 0.0, 0.01, 1.0);
        }
        Err(e) => c.error("goal attainment", e),
    }
    match solve_gpm(p, &goals, GpmMode::MinimaxUnder) {
        Ok(r) => c.near("goal programming minimax min u", r.min_u, 36.03, 1.0 / 36.03, 0.0),
        Err(e) => c.error("goal programming minimax", e),
    }
    match solve_gpm(p, &goals, GpmMode::Sum) {
        Ok(r) => c.near("goal programming sum throughput", r.throughput, MSU_THROUGHPUT, 0.01, 0.0),
        Err(e) => c.error("goal programming sum", e),
    }
    c
}

/// Caseloads of the spot suite's MMU rows, kept for the Pareto criterion.
type MmuRows = Vec<(String, Vec<f64>)>;

fn spot_suite(p: &Planner<'_>) -> (Criterion, MmuRows) {
    let mut c = Criterion::default();
    let mut mmu = Vec::new();
    let mut run = |c: &mut Criterion, label: String, s: UfSpec, cfg: AsfConfig| -> Option<SolveResult> {
        match solve_spec(p, &s, &cfg) {
            Ok(r) => {
                if cfg.eps2 == 0.0 {
                    mmu.push((label, r.patients()));
                }
                Some(r)
            }
            Err(e) => {
                c.error(&label, e);
                None
            }
        }
    };

    for f in [0.1, 0.2, 0.3] {
        let label = format!("UF3 aspiration {:.0}% MMU", f * 100.0);
        if let Some(r) = run(&mut c, label.clone(), spec(UfTemplate::Uf3, |p| p.aspiration = frac(f)), AsfConfig::mmu()) {
            let ok = (r.throughput - f * PUBLISHED_TOTAL).abs() <= 0.01 * f * PUBLISHED_TOTAL
                && (r.sum_u - 1900.0).abs() <= 0.01
                && (r.min_u - 100.0).abs() <= 0.01;
            c.check(
                ok,
                format!(
                    "{label}: N {:.2} (want {:.2}), sum u {:.2} (want 1900), min u {:.2} (want 100)",
                    r.throughput,
                    f * PUBLISHED_TOTAL,
                    r.sum_u,
                    r.min_u
                ),
            );
        }
    }

    if let Some(r) = run(&mut c, "UF1 MSU".into(), UfSpec::new(UfTemplate::Uf1), AsfConfig::msu()) {
        c.near("UF1 MSU throughput", r.throughput, MSU_THROUGHPUT, 0.01, 0.0);
    }

    let label = "UF2 indifference 40% MMU".to_string();
    if let Some(r) = run(&mut c, label.clone(), spec(UfTemplate::Uf2, |p| p.indifference = frac(0.4)), AsfConfig::mmu()) {
        c.check(r.zeroed, format!("{label}: zeroed = {} (N {:.2})", r.zeroed, r.throughput));
    }

    for i in [0.05, 0.1, 0.2, 0.5] {
        let label = format!("UF5 intercept {:.0}% MSU", i * 100.0);
        if let Some(r) = run(&mut c, label.clone(), spec(UfTemplate::Uf5, |p| p.indifference = frac(i)), AsfConfig::msu()) {
            let want = -100.0 * i / (1.0 - i);
            let ok = (r.min_u - want).abs() <= 0.5;
            c.check(ok, format!("{label}: min u {:.2} vs {want:.2} (tolerance 0.50)", r.min_u));
        }
    }

    for pct in [40, 50, 60, 70, 80, 90] {
        let label = format!("UF8 aspiration {pct}% MMU");
        let f = pct as f64 / 100.0;
        if let Some(r) = run(&mut c, label.clone(), spec(UfTemplate::Uf8, |p| p.aspiration = frac(f)), AsfConfig::mmu()) {
            c.check(r.zeroed, format!("{label}: zeroed = {} (N {:.2})", r.zeroed, r.throughput));
        }
    }
    (c, mmu)
}

fn pareto_pattern(p: &Planner<'_>, mmu: &MmuRows) -> Criterion {
    let mut c = Criterion::default();
    for (label, caseload) in mmu {
        match check_pareto(p, caseload) {
            Ok(a) => c.check(
                !a.is_pareto && a.diff > 0.0,
                format!("{label}: dominated by {:.2} patients", a.diff),
            ),
            Err(e) => c.error(label, e),
        }
    }
    let msu = [
        ("UF1 MSU", UfSpec::new(UfTemplate::Uf1)),
        ("UF5 intercept 10% MSU", spec(UfTemplate::Uf5, |p| p.indifference = frac(0.1))),
        ("UF11 target 100% MSU", spec(UfTemplate::Uf11, |p| p.aspiration = frac(1.0))),
    ];
    for (label, s) in msu {
        match solve_spec(p, &s, &AsfConfig::msu()).and_then(|r| {
            check_pareto(p, &r.patients()).map_err(|e| e.to_string())
        }) {
            Ok(a) => c.check(
                a.diff <= 1e-4 * a.base_throughput,
                format!("{label}: N {:.2}, diff {:.4}", a.base_throughput, a.diff),
            ),
            Err(e) => c.error(label, e),
        }
    }
    match solve_gam(p, &GoalConfig::new(p.bounds().to_vec()))
        .map_err(|e| e.to_string())
        .and_then(|r| check_pareto(p, &r.patients()).map_err(|e| e.to_string()))
    {
        Ok(a) => c.near("goal attainment corrected throughput", a.corrected_throughput, 33530.74, 0.01, 0.0),
        Err(e) => c.error("goal attainment audit", e),
    }
    c
}

fn property_suites(be: &SimplexBackend) -> Criterion {
    let mut c = Criterion::default();
    let mut rng = casemix_validation::rng(11);
    let first_error = |r: Result<(), String>, err: &mut Option<String>| {
        if let (Err(e), None) = (r, &*err) {
            *err = Some(e);
        }
    };

    let mut err = None;
    for k in 0..300 {
        let upper = 1.0 + 37.0 * k as f64;
        let na = 0.01 + 0.99 * ((k * 7919) % 100) as f64 / 100.0;
        let xs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        first_error(casemix_validation::check_collapses(upper, na, &xs), &mut err);
    }
    c.check(err.is_none(), format!("template collapses over 300 domains: {}", err.as_deref().unwrap_or("ok")));

    let mut err = None;
    let mut tested = 0;
    while tested < 300 {
        match casemix_validation::check_monotone(&mut rng) {
            Ok(true) => tested += 1,
            Ok(false) => {}
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    c.check(err.is_none(), format!("monotone templates over {tested} utilities: {}", err.as_deref().unwrap_or("ok")));

    let mut err = None;
    for seed in 0..60 {
        first_error(casemix_validation::check_gpm_complementarity(seed, be), &mut err);
    }
    c.check(err.is_none(), format!("goal deviation complementarity over 60 toys: {}", err.as_deref().unwrap_or("ok")));

    let mut err = None;
    for seed in 0..60 {
        first_error(casemix_validation::check_repair_idempotence(seed, be), &mut err);
    }
    c.check(err.is_none(), format!("repair and audit idempotence over 60 toys: {}", err.as_deref().unwrap_or("ok")));
    c
}

fn oracle_equivalence(be: &SimplexBackend, started: Instant) -> Criterion {
    let mut c = Criterion::default();
    let mut checks = 0;
    let mut err = None;
    for seed in 1000..1060 {
        match casemix_validation::oracle_instance(seed, be) {
            Ok(n) => checks += n,
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    c.check(
        err.is_none(),
        format!("{checks} scalarization optima on 60 toys vs grid search: {}", err.as_deref().unwrap_or("ok")),
    );
    match casemix_validation::encoding_suite(2024, 500, be) {
        Ok(n) => c.check(true, format!("{n} encoded utilities match direct evaluation")),
        Err(e) => c.error("encoding", e),
    }
    let total = started.elapsed();
    c.check(total <= Duration::from_secs(300), format!("full run {total:.2?} (limit 5 min)"));
    c
}

fn main() -> ExitCode {
    let started = Instant::now();
    let inst = bundled_case_study();
    let be = SimplexBackend::default();
    let planner = Planner::with_planning_bounds(&inst, &be).expect("bundled instance is valid");

    let mut results: Vec<(&str, Criterion)> = Vec::new();
    results.push(("treatment limits", treatment_limits(&inst, &be)));
    results.push(("goal models", goal_models(&planner)));
    let (spot, mmu) = spot_suite(&planner);
    results.push(("spot suite", spot));
    results.push(("Pareto pattern", pareto_pattern(&planner, &mmu)));
    results.push(("property suites", property_suites(&be)));
    results.push(("oracle equivalence", oracle_equivalence(&be, started)));

    let mut failed = 0;
    for (label, c) in &results {
        let ok = c.passed();
        failed += usize::from(!ok);
        println!("{} {label}", if ok { "PASS" } else { "FAIL" });
        for (ok, what) in &c.checks {
            println!("    [{}] {what}", if *ok { "ok" } else { "x" });
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
