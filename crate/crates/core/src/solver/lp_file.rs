//! CPLEX LP text export.
//!
//! Coefficients are written with 17 significant digits so that re-parsing
//! recovers every `f64` exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::program::{Direction, Program, RowSense, VarId, VarKind};

const TERMS_PER_LINE: usize = 4;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, '_');
    }
    if s.len() > 200 {
        s.truncate(200);
    }
    s
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>, prefix: char) -> Vec<String> {
    let mut seen = HashSet::new();
    names
        .enumerate()
        .map(|(i, n)| {
            let mut s = sanitize(n);
            if !seen.insert(s.clone()) {
                s = format!("{prefix}{i}_{s}");
                seen.insert(s.clone());
            }
            s
        })
        .collect()
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(names.first().map_or("", String::as_str));
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(c.abs()), names[v.0]);
    }
}

/// Renders `program` in CPLEX LP format.
pub fn to_lp_string(program: &Program) -> String {
    let vnames = unique_names(program.vars().iter().map(|v| v.name.as_str()), 'x');
    let rnames = unique_names(program.rows().iter().map(|r| r.name.as_str()), 'c');
    let mut out = String::new();
    out.push_str(match program.direction() {
        Direction::Maximize => "Maximize\n",
        Direction::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    if program.objective().is_empty() && vnames.is_empty() {
        out.push_str(" 0");
    } else {
        write_terms(&mut out, program.objective(), &vnames);
    }
    let offset = program.objective_offset();
    if offset != 0.0 {
        let sign = if offset < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", num(offset.abs()));
    }
    out.push_str("\nSubject To\n");
    for (r, name) in program.rows().iter().zip(&rnames) {
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &r.terms, &vnames);
        let op = match r.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(r.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in program.vars().iter().zip(&vnames) {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {name} = {}", num(v.lower));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {name} >= {}", num(v.lower));
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", num(v.upper));
            }
        }
    }
    let bins: Vec<&String> = program
        .vars()
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp_file(program: &Program, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, to_lp_string(program))
}
