//! JSON and CSV output of solve results, sweeps and Pareto audits.
//!
//! JSON keeps full `f64` precision so results read back unchanged. CSV
//! numbers are printed with six decimals.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::model::GroupBound;
use crate::pareto::ParetoReport;
use crate::scalarize::SolveResult;
use crate::sensitivity::SweepReport;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?} (expected json or csv)")),
        }
    }
}

impl Format {
    /// Guesses the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| {
        if !e.is_io_error() {
            return Error::Csv(e);
        }
        match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(path)(source),
            _ => unreachable!("checked above"),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, to_json(value)).map_err(io_err(path))
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Error> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Per-group rows of a solve result.
pub fn solve_result_csv_rows(r: &SolveResult) -> Vec<Vec<String>> {
    r.groups
        .iter()
        .map(|g| {
            vec![
                g.id.clone(),
                num(g.patients),
                num(g.utility),
                num(g.bound),
                g.case_mix_pct.map(num).unwrap_or_default(),
            ]
        })
        .collect()
}

pub const SOLVE_CSV_HEADER: [&str; 5] = ["group", "patients", "utility", "bound", "case_mix_pct"];

pub fn write_result(r: &SolveResult, path: impl AsRef<Path>, format: Format) -> Result<(), Error> {
    let path = path.as_ref();
    match format {
        Format::Json => write_json(r, path),
        Format::Csv => write_rows(path, &SOLVE_CSV_HEADER, solve_result_csv_rows(r)),
    }
}

pub const SWEEP_CSV_HEADER: [&str; 7] = ["value", "objective", "N", "sum_u", "min_u", "zeroed", "error"];
pub const CASE_MIX_CSV_HEADER: [&str; 6] =
    ["value", "objective", "group", "patients", "utility", "case_mix_pct"];
pub const RANGE_CSV_HEADER: [&str; 5] = ["objective", "group", "min_pct", "max_pct", "range"];

/// Writes `sweep.csv`, `case_mix.csv` and `case_mix_range.csv` into `dir`.
pub fn write_sweep_csv(report: &SweepReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, Error> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut summary = Vec::new();
    let mut mix = Vec::new();
    for row in &report.rows {
        let (v, o) = (num(row.value), row.objective.as_str().to_string());
        match &row.summary {
            Some(s) => {
                summary.push(vec![
                    v.clone(),
                    o.clone(),
                    num(s.throughput),
                    num(s.sum_u),
                    num(s.min_u),
                    s.zeroed.to_string(),
                    String::new(),
                ]);
                for (g, id) in report.groups.iter().enumerate() {
                    mix.push(vec![
                        v.clone(),
                        o.clone(),
                        id.clone(),
                        num(s.patients[g]),
                        num(s.utilities[g]),
                        s.case_mix_pct.as_ref().map(|m| num(m[g])).unwrap_or_default(),
                    ]);
                }
            }
            None => summary.push(vec![
                v,
                o,
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                row.error.clone().unwrap_or_default(),
            ]),
        }
    }
    let ranges = report
        .case_mix
        .iter()
        .flat_map(|d| {
            let o = d.objective.map_or("all", |o| o.as_str());
            d.ranges.iter().map(move |r| {
                vec![
                    o.to_string(),
                    r.group.clone(),
                    num(r.min_pct),
                    num(r.max_pct),
                    num(r.range),
                ]
            })
        })
        .collect();
    let paths = [
        dir.join("sweep.csv"),
        dir.join("case_mix.csv"),
        dir.join("case_mix_range.csv"),
    ];
    write_rows(&paths[0], &SWEEP_CSV_HEADER, summary)?;
    write_rows(&paths[1], &CASE_MIX_CSV_HEADER, mix)?;
    write_rows(&paths[2], &RANGE_CSV_HEADER, ranges)?;
    Ok(paths.to_vec())
}

pub const BOUNDS_CSV_HEADER: [&str; 2] = ["group", "bound"];

/// Treatment limits per group followed by a `TOTAL` row.
pub fn write_bounds(bounds: &[GroupBound], path: impl AsRef<Path>, format: Format) -> Result<(), Error> {
    let path = path.as_ref();
    let total: f64 = bounds.iter().map(|b| b.bound).sum();
    match format {
        Format::Json => write_json(&serde_json::json!({ "groups": bounds, "total": total }), path),
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = bounds.iter().map(|b| vec![b.group.clone(), num(b.bound)]).collect();
            rows.push(vec!["TOTAL".into(), num(total)]);
            write_rows(path, &BOUNDS_CSV_HEADER, rows)
        }
    }
}

pub const PARETO_CSV_HEADER: [&str; 6] =
    ["base_N", "corrected_N", "diff", "diff_pct", "is_pareto", "zeroed"];

pub fn write_pareto(r: &ParetoReport, path: impl AsRef<Path>, format: Format) -> Result<(), Error> {
    let path = path.as_ref();
    match format {
        Format::Json => write_json(r, path),
        Format::Csv => write_rows(
            path,
            &PARETO_CSV_HEADER,
            vec![vec![
                num(r.base_throughput),
                num(r.corrected_throughput),
                num(r.diff),
                num(r.diff_pct),
                r.is_pareto.to_string(),
                r.zeroed.to_string(),
            ]],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::bundled_toy;
    use crate::scalarize::{solve_asf, AsfConfig, Planner};
    use crate::sensitivity::{run_sweep, Objective, SweepSpec};
    use crate::solver::SimplexBackend;
    use crate::UfTemplate;

    fn toy_result() -> SolveResult {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let plfs = p.linear_utilities().unwrap();
        solve_asf(&p, &plfs, &AsfConfig::new(1.0, 0.1)).unwrap()
    }

    #[test]
    fn json_round_trips_exactly() {
        let r = toy_result();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_result(&r, &p, Format::Json).unwrap();
        let back: SolveResult = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn csv_uses_six_decimals() {
        let r = toy_result();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_result(&r, &p, Format::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("group,patients,utility,bound,case_mix_pct"));
        let a = lines.next().unwrap();
        assert!(a.starts_with("A,"), "{a}");
        assert!(a.split(',').skip(1).all(|f| f.split('.').nth(1).unwrap().len() == 6), "{a}");
    }

    #[test]
    fn sweep_csv_files() {
        let inst = bundled_toy();
        let be = SimplexBackend::default();
        let p = Planner::with_planning_bounds(&inst, &be).unwrap();
        let spec = SweepSpec::new(UfTemplate::Uf3, "aspiration", vec![10.0, 20.0])
            .with_objectives(vec![Objective::Mmu, Objective::Msu]);
        let rep = run_sweep(&p, &spec, Some(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_sweep_csv(&rep, dir.path()).unwrap();
        let sweep = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(sweep.starts_with("value,objective,N,sum_u,min_u,zeroed,error\n10.000000,mmu,"));
        assert_eq!(sweep.lines().count(), 5);
        let mix = std::fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(mix.lines().count(), 1 + 4 * 2);
        let ranges = std::fs::read_to_string(&paths[2]).unwrap();
        assert_eq!(ranges.lines().count(), 1 + 2 * 2);
    }

    #[test]
    fn bounds_end_with_a_total() {
        let b = vec![
            GroupBound { group: "A".into(), bound: 1.5 },
            GroupBound { group: "B".into(), bound: 2.0 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        write_bounds(&b, &p, Format::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "group,bound\nA,1.500000\nB,2.000000\nTOTAL,3.500000\n");
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let r = toy_result();
        let e = write_result(&r, "/nonexistent-dir/x/r.json", Format::Json).unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
        let e = write_result(&r, "/nonexistent-dir/x/r.csv", Format::Csv).unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
    }
}
