//! Dense bounded-variable primal simplex.
//!
//! The program is brought to the form `min c'x, Ax = b, 0 <= x <= u` by shifting,
//! mirroring or splitting each variable, row-equilibrated, and solved with a
//! two-phase method. Nonbasic columns sit at one of their bounds, so upper bounds
//! (binaries relaxed to `[0, 1]`, output caps) never become rows.
//!
//! The starting point is every structural variable at its lower bound; the
//! method only leaves that vertex when doing so improves the objective.

use super::program::{Direction, Program, RowSense};
use super::SolverError;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-6;
const DEGENERATE_RUN: usize = 64;
const REINVERT_EVERY: usize = 200;

#[derive(Debug, Clone)]
pub(crate) struct SimplexOptions {
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal(LpSolution),
    Infeasible { iterations: usize },
    Unbounded { iterations: usize },
}

/// How a program variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum ColumnMap {
    Shift { col: usize, lower: f64 },
    Mirror { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n: usize,
    /// Row-major `B^-1 A`.
    t: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    excluded: Vec<bool>,
    cost: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    since_reinvert: usize,
}

/// Solves the LP relaxation of `program` with per-variable bound overrides.
pub(crate) fn solve_lp(
    program: &Program,
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Result<LpOutcome, SolverError> {
    let nv = program.num_vars();
    debug_assert_eq!(lower.len(), nv);

    for j in 0..nv {
        if lower[j] > upper[j] + 1e-12 {
            return Ok(LpOutcome::Infeasible { iterations: 0 });
        }
    }

    // Column mapping.
    let mut maps = Vec::with_capacity(nv);
    let mut col_upper: Vec<f64> = Vec::new();
    for j in 0..nv {
        let (l, u) = (lower[j], upper[j].max(lower[j]));
        if l.is_finite() {
            maps.push(ColumnMap::Shift {
                col: col_upper.len(),
                lower: l,
            });
            col_upper.push(if u.is_finite() { u - l } else { f64::INFINITY });
        } else if u.is_finite() {
            maps.push(ColumnMap::Mirror {
                col: col_upper.len(),
                upper: u,
            });
            col_upper.push(f64::INFINITY);
        } else {
            let pos = col_upper.len();
            maps.push(ColumnMap::Split { pos, neg: pos + 1 });
            col_upper.push(f64::INFINITY);
            col_upper.push(f64::INFINITY);
        }
    }
    let n_struct = col_upper.len();

    // Rows in structural columns.
    struct RawRow {
        coefs: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    }
    let mut raw: Vec<RawRow> = Vec::with_capacity(program.rows().len());
    for row in program.rows() {
        let mut rhs = row.rhs;
        let mut dense: Vec<f64> = vec![0.0; 0];
        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(row.terms.len() + 1);
        for &(v, a) in &row.terms {
            if a == 0.0 {
                continue;
            }
            match maps[v.0] {
                ColumnMap::Shift { col, lower } => {
                    rhs -= a * lower;
                    coefs.push((col, a));
                }
                ColumnMap::Mirror { col, upper } => {
                    rhs -= a * upper;
                    coefs.push((col, -a));
                }
                ColumnMap::Split { pos, neg } => {
                    coefs.push((pos, a));
                    coefs.push((neg, -a));
                }
            }
        }
        // merge duplicate columns
        coefs.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        for (c, a) in coefs {
            match merged.last_mut() {
                Some((lc, la)) if *lc == c => *la += a,
                _ => merged.push((c, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        dense.clear();
        let scale = merged.iter().fold(0.0f64, |s, &(_, a)| s.max(a.abs()));
        if scale == 0.0 {
            let ok = match row.sense {
                RowSense::Le => rhs >= -1e-9,
                RowSense::Ge => rhs <= 1e-9,
                RowSense::Eq => rhs.abs() <= 1e-9,
            };
            if !ok {
                return Ok(LpOutcome::Infeasible { iterations: 0 });
            }
            continue;
        }
        raw.push(RawRow {
            coefs: merged.into_iter().map(|(c, a)| (c, a / scale)).collect(),
            sense: row.sense,
            rhs: rhs / scale,
        });
    }

    let m = raw.len();
    let n_slack = raw.iter().filter(|r| r.sense != RowSense::Eq).count();
    // Decide slack sign and need for artificials after rhs normalisation.
    let mut needs_art = vec![false; m];
    let mut flip = vec![false; m];
    for (i, r) in raw.iter().enumerate() {
        flip[i] = r.rhs < 0.0;
        let slack_sign = match r.sense {
            RowSense::Le => 1.0,
            RowSense::Ge => -1.0,
            RowSense::Eq => 0.0,
        } * if flip[i] { -1.0 } else { 1.0 };
        needs_art[i] = slack_sign <= 0.0;
    }
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let n = n_struct + n_slack + n_art;

    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    let mut upper_all = col_upper.clone();
    upper_all.resize(n, f64::INFINITY);
    let mut basis = vec![usize::MAX; m];
    let mut is_art = vec![false; n];
    let mut next_slack = n_struct;
    let mut next_art = n_struct + n_slack;
    for (i, r) in raw.iter().enumerate() {
        let sgn = if flip[i] { -1.0 } else { 1.0 };
        for &(c, v) in &r.coefs {
            a[i * n + c] = sgn * v;
        }
        b[i] = sgn * r.rhs;
        if r.sense != RowSense::Eq {
            let coef = if r.sense == RowSense::Le { 1.0 } else { -1.0 } * sgn;
            a[i * n + next_slack] = coef;
            if coef > 0.0 {
                basis[i] = next_slack;
            }
            next_slack += 1;
        }
        if needs_art[i] {
            a[i * n + next_art] = 1.0;
            basis[i] = next_art;
            is_art[next_art] = true;
            next_art += 1;
        }
    }

    // Phase-2 costs (minimisation form).
    let sign = match program.direction() {
        Direction::Maximize => -1.0,
        Direction::Minimize => 1.0,
    };
    let mut cost = vec![0.0; n];
    for &(v, c) in program.objective() {
        match maps[v.0] {
            ColumnMap::Shift { col, .. } => cost[col] += sign * c,
            ColumnMap::Mirror { col, .. } => cost[col] -= sign * c,
            ColumnMap::Split { pos, neg } => {
                cost[pos] += sign * c;
                cost[neg] -= sign * c;
            }
        }
    }

    let mut status = vec![Status::AtLower; n];
    for &j in &basis {
        status[j] = Status::Basic;
    }
    let mut tab = Tableau {
        m,
        n,
        t: a.clone(),
        a,
        xb: b.clone(),
        b,
        basis,
        status,
        upper: upper_all,
        excluded: vec![false; n],
        cost: vec![0.0; n],
        d: vec![0.0; n],
        iterations: 0,
        since_reinvert: 0,
    };

    // Phase 1.
    if n_art > 0 {
        for j in 0..n {
            tab.cost[j] = if is_art[j] { 1.0 } else { 0.0 };
        }
        tab.recompute_reduced_costs();
        match tab.run(opts)? {
            RunEnd::Optimal => {}
            RunEnd::Unbounded => {
                return Err(SolverError::Numerical(
                    "phase one reported an unbounded ray".into(),
                ))
            }
        }
        tab.reinvert()?;
        let infeas: f64 = (0..m)
            .filter(|&i| is_art[tab.basis[i]])
            .map(|i| tab.xb[i].max(0.0))
            .sum();
        if infeas > PHASE1_TOL {
            return Ok(LpOutcome::Infeasible {
                iterations: tab.iterations,
            });
        }
        for j in 0..n {
            if is_art[j] {
                tab.upper[j] = 0.0;
                tab.excluded[j] = true;
                if tab.status[j] != Status::Basic {
                    tab.status[j] = Status::AtLower;
                }
            }
        }
        for i in 0..m {
            if is_art[tab.basis[i]] {
                tab.xb[i] = 0.0;
            }
        }
    }

    // Phase 2.
    tab.cost = cost;
    tab.recompute_reduced_costs();
    match tab.run(opts)? {
        RunEnd::Optimal => {}
        RunEnd::Unbounded => {
            return Ok(LpOutcome::Unbounded {
                iterations: tab.iterations,
            })
        }
    }
    tab.reinvert()?;

    let x = tab.column_values();
    let values: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            ColumnMap::Shift { col, lower } => lower + x[col],
            ColumnMap::Mirror { col, upper } => upper - x[col],
            ColumnMap::Split { pos, neg } => x[pos] - x[neg],
        })
        .collect();
    let objective = program.objective_value(&values);
    Ok(LpOutcome::Optimal(LpSolution {
        values,
        objective,
        iterations: tab.iterations,
    }))
}

enum RunEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn recompute_reduced_costs(&mut self) {
        let (m, n) = (self.m, self.n);
        self.d.copy_from_slice(&self.cost);
        for i in 0..m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * n..(i + 1) * n];
                for (dj, &tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for i in 0..m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for j in 0..self.n {
            if self.status[j] == Status::AtUpper {
                x[j] = self.upper[j];
            }
        }
        for i in 0..self.m {
            x[self.basis[i]] = self.xb[i];
        }
        x
    }

    /// Rebuilds `B^-1 A`, basic values and reduced costs from the original data.
    fn reinvert(&mut self) -> Result<(), SolverError> {
        let (m, n) = (self.m, self.n);
        self.since_reinvert = 0;
        if m == 0 {
            self.recompute_reduced_costs();
            return Ok(());
        }
        // Gauss-Jordan on [B | A | rhs].
        let w = m + n + 1;
        let mut aug = vec![0.0; m * w];
        for i in 0..m {
            for (k, &col) in self.basis.iter().enumerate() {
                aug[i * w + k] = self.a[i * n + col];
            }
            aug[i * w + m..i * w + m + n].copy_from_slice(&self.a[i * n..(i + 1) * n]);
            let mut rhs = self.b[i];
            for j in 0..n {
                if self.status[j] == Status::AtUpper {
                    rhs -= self.a[i * n + j] * self.upper[j];
                }
            }
            aug[i * w + m + n] = rhs;
        }
        for k in 0..m {
            let (mut piv, mut best) = (k, aug[k * w + k].abs());
            for i in k + 1..m {
                let v = aug[i * w + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-12 {
                return Err(SolverError::Numerical("singular basis on reinversion".into()));
            }
            if piv != k {
                for c in 0..w {
                    aug.swap(k * w + c, piv * w + c);
                }
            }
            let p = aug[k * w + k];
            for c in 0..w {
                aug[k * w + c] /= p;
            }
            let pivot_row: Vec<(usize, f64)> = (0..w)
                .filter_map(|c| {
                    let v = aug[k * w + c];
                    (v != 0.0).then_some((c, v))
                })
                .collect();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * w + k];
                if f != 0.0 {
                    for &(c, v) in &pivot_row {
                        aug[i * w + c] -= f * v;
                    }
                }
            }
        }
        // Row k of the reduced system corresponds to basis position k.
        for i in 0..m {
            self.t[i * n..(i + 1) * n].copy_from_slice(&aug[i * w + m..i * w + m + n]);
            let v = aug[i * w + m + n];
            let ub = self.upper[self.basis[i]];
            self.xb[i] = if v < 0.0 && v > -HARRIS_TOL * 10.0 {
                0.0
            } else if ub.is_finite() && v > ub && v < ub + HARRIS_TOL * 10.0 {
                ub
            } else {
                v
            };
        }
        self.recompute_reduced_costs();
        Ok(())
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n {
            if self.excluded[j] || self.status[j] == Status::Basic || self.upper[j] <= 0.0 {
                continue;
            }
            let dj = self.d[j];
            let dir = match self.status[j] {
                Status::AtLower if dj < -OPT_TOL => 1.0,
                Status::AtUpper if dj > OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, opts: &SimplexOptions) -> Result<RunEnd, SolverError> {
        let (m, n) = (self.m, self.n);
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(SolverError::IterationLimit(self.iterations));
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
            }
            let bland = degenerate > DEGENERATE_RUN;
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Ok(RunEnd::Optimal);
            };
            self.iterations += 1;

            // Harris two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            for i in 0..m {
                let alpha = dir * self.t[i * n + q];
                if alpha > PIVOT_TOL {
                    theta_max = theta_max.min((self.xb[i] + HARRIS_TOL) / alpha);
                } else if alpha < -PIVOT_TOL {
                    let ub = self.upper[self.basis[i]];
                    if ub.is_finite() {
                        theta_max = theta_max.min((ub - self.xb[i] + HARRIS_TOL) / -alpha);
                    }
                }
            }
            let flip_len = self.upper[q];
            if theta_max.is_infinite() && flip_len.is_infinite() {
                return Ok(RunEnd::Unbounded);
            }
            let mut leave: Option<(usize, f64, bool)> = None; // (row, ratio, to_upper)
            if theta_max.is_finite() {
                let mut best_alpha = 0.0;
                let mut best_basis = usize::MAX;
                for i in 0..m {
                    let alpha = dir * self.t[i * n + q];
                    let (ratio, to_upper) = if alpha > PIVOT_TOL {
                        (self.xb[i] / alpha, false)
                    } else if alpha < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                        ((self.upper[self.basis[i]] - self.xb[i]) / -alpha, true)
                    } else {
                        continue;
                    };
                    if ratio > theta_max {
                        continue;
                    }
                    let better = if bland {
                        ratio < leave.map_or(f64::INFINITY, |l| l.1) - 1e-12
                            || (ratio <= leave.map_or(f64::INFINITY, |l| l.1) + 1e-12
                                && self.basis[i] < best_basis)
                    } else {
                        alpha.abs() > best_alpha
                    };
                    if better {
                        best_alpha = alpha.abs();
                        best_basis = self.basis[i];
                        leave = Some((i, ratio.max(0.0), to_upper));
                    }
                }
            }

            let step = leave.map_or(f64::INFINITY, |l| l.1);
            if flip_len.is_finite() && flip_len <= step {
                // Bound flip of the entering column.
                for i in 0..m {
                    let alpha = self.t[i * n + q];
                    if alpha != 0.0 {
                        self.xb[i] -= dir * alpha * flip_len;
                    }
                }
                self.status[q] = if dir > 0.0 {
                    Status::AtUpper
                } else {
                    Status::AtLower
                };
                degenerate = 0;
                continue;
            }
            let Some((r, theta, to_upper)) = leave else {
                return Ok(RunEnd::Unbounded);
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            // Update basic values.
            let entering_value = if self.status[q] == Status::AtUpper {
                self.upper[q]
            } else {
                0.0
            } + dir * theta;
            for i in 0..m {
                let alpha = self.t[i * n + q];
                if alpha != 0.0 {
                    self.xb[i] -= dir * alpha * theta;
                    if self.xb[i] < 0.0 && self.xb[i] > -HARRIS_TOL * 10.0 {
                        self.xb[i] = 0.0;
                    }
                }
            }
            let leaving = self.basis[r];
            self.status[leaving] = if to_upper {
                Status::AtUpper
            } else {
                Status::AtLower
            };
            self.basis[r] = q;
            self.status[q] = Status::Basic;
            self.xb[r] = entering_value;
            self.pivot(r, q);
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let (m, n) = (self.m, self.n);
        let p = self.t[r * n + q];
        let inv = 1.0 / p;
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v *= inv;
        }
        self.t[r * n + q] = 1.0;
        let nz: Vec<(usize, f64)> = self.t[r * n..(r + 1) * n]
            .iter()
            .enumerate()
            .filter_map(|(j, &v)| (v != 0.0).then_some((j, v)))
            .collect();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f != 0.0 {
                let row = &mut self.t[i * n..(i + 1) * n];
                for &(j, v) in &nz {
                    row[j] -= f * v;
                }
                row[q] = 0.0;
            }
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &(j, v) in &nz {
                self.d[j] -= dq * v;
            }
            self.d[q] = 0.0;
        }
        self.since_reinvert += 1;
    }
}
