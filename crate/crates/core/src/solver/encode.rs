//! Linear and mixed-binary encodings of piecewise-linear utilities.

use serde::{Deserialize, Serialize};

use super::program::{Program, RowSense, VarId};
use super::SolverError;
use crate::utility::PiecewiseLinearUtility;

pub const DEFAULT_SEGMENT_CAP: usize = 64;
/// Open interval ends are pulled in by this fraction of the domain.
pub const EPS_OPEN: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct EncodeOptions {
    /// Name prefix for the created variables and rows.
    pub name: String,
    /// The utility variable is only ever pushed upwards by the objective.
    pub maximized: bool,
    pub segment_cap: usize,
    /// Use segment selection even where a pure LP form exists.
    pub force_binary: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            name: "u".into(),
            maximized: true,
            segment_cap: DEFAULT_SEGMENT_CAP,
            force_binary: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Single,
    Epigraph,
    Binary,
}

#[derive(Debug, Clone)]
pub struct PlfVars {
    pub u: VarId,
    pub encoding: Encoding,
    pub binaries: Vec<VarId>,
}

/// Adds a utility variable `u = plf(x)` to `program`.
///
/// `x` must already be bounded within `[0, plf.domain_max()]`.
pub fn encode_plf(
    program: &mut Program,
    x: VarId,
    plf: &PiecewiseLinearUtility,
    opts: &EncodeOptions,
) -> Result<PlfVars, SolverError> {
    let pieces = plf.pieces();
    if pieces.len() > opts.segment_cap {
        return Err(SolverError::TooManySegments {
            segments: pieces.len(),
            cap: opts.segment_cap,
        });
    }
    let name = &opts.name;
    let d = plf.domain_max();

    if pieces.len() == 1 && !opts.force_binary {
        let p = pieces[0];
        let u = program.add_free(name.clone());
        program.add_row(
            format!("{name}_def"),
            vec![(u, 1.0), (x, -p.slope)],
            RowSense::Eq,
            p.value - p.slope * p.left,
        );
        return Ok(PlfVars {
            u,
            encoding: Encoding::Single,
            binaries: Vec::new(),
        });
    }

    if opts.maximized && plf.is_concave() && !opts.force_binary {
        let u = program.add_free(name.clone());
        for (i, p) in pieces.iter().enumerate() {
            program.add_row(
                format!("{name}_hull{i}"),
                vec![(u, 1.0), (x, -p.slope)],
                RowSense::Le,
                p.value - p.slope * p.left,
            );
        }
        return Ok(PlfVars {
            u,
            encoding: Encoding::Epigraph,
            binaries: Vec::new(),
        });
    }

    let (umin, umax) = plf.range();
    let u = program.add_var(name.clone(), umin, umax);
    let eps = EPS_OPEN * d;
    let mut binaries = Vec::with_capacity(pieces.len());
    for (i, p) in pieces.iter().enumerate() {
        let delta = program.add_binary(format!("{name}_seg{i}"));
        binaries.push(delta);
        if p.left > 0.0 {
            // x >= l - l (1 - delta)
            program.add_row(
                format!("{name}_l{i}"),
                vec![(x, 1.0), (delta, -p.left)],
                RowSense::Ge,
                0.0,
            );
        }
        let right = if p.open_right {
            (p.right - eps).max(p.left)
        } else {
            p.right
        };
        let mx = d - right;
        if mx > 0.0 {
            // x <= r + (d - r)(1 - delta)
            program.add_row(
                format!("{name}_r{i}"),
                vec![(x, 1.0), (delta, mx)],
                RowSense::Le,
                d,
            );
        }
        let c = p.value - p.slope * p.left;
        let (f0, fd) = (c, c + p.slope * d);
        let m_up = (umax - f0.min(fd)).max(0.0);
        let m_lo = (f0.max(fd) - umin).max(0.0);
        program.add_row(
            format!("{name}_ub{i}"),
            vec![(u, 1.0), (x, -p.slope), (delta, m_up)],
            RowSense::Le,
            c + m_up,
        );
        program.add_row(
            format!("{name}_lb{i}"),
            vec![(u, 1.0), (x, -p.slope), (delta, -m_lo)],
            RowSense::Ge,
            c - m_lo,
        );
    }
    program.add_row(
        format!("{name}_one"),
        binaries.iter().map(|&b| (b, 1.0)).collect(),
        RowSense::Eq,
        1.0,
    );
    Ok(PlfVars {
        u,
        encoding: Encoding::Binary,
        binaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Backend, Direction, SimplexBackend};
    use crate::utility::{instantiate, Quantity, UfParams, UfSpec, UfTemplate};

    fn max_u_with_cap(plf: &PiecewiseLinearUtility, cap: f64, force: bool) -> (f64, f64, Encoding) {
        let mut p = Program::new();
        let x = p.add_var("x", 0.0, cap.min(plf.domain_max()));
        let opts = EncodeOptions {
            force_binary: force,
            ..Default::default()
        };
        let v = encode_plf(&mut p, x, plf, &opts).unwrap();
        p.set_objective(Direction::Maximize, vec![(v.u, 1.0)], 0.0);
        let s = SimplexBackend::default().solve(&p);
        let sol = s.solution().expect("optimal");
        (sol.value(v.u), sol.value(x), v.encoding)
    }

    fn uf8() -> PiecewiseLinearUtility {
        let mut params = UfParams::default();
        params.indifference = Some(Quantity::Absolute(30.0));
        instantiate(&UfSpec::with_params(UfTemplate::Uf8, params), 100.0).unwrap()
    }

    #[test]
    fn linear_is_a_single_equality() {
        let plf = instantiate(&UfSpec::new(UfTemplate::Uf1), 100.0).unwrap();
        let mut p = Program::new();
        let x = p.add_var("x", 0.0, 100.0);
        let v = encode_plf(&mut p, x, &plf, &EncodeOptions::default()).unwrap();
        assert_eq!(v.encoding, Encoding::Single);
        assert_eq!(p.rows().len(), 1);
        assert_eq!(p.num_binaries(), 0);
    }

    #[test]
    fn step_function_needs_its_threshold() {
        let plf = uf8();
        let (u, _, enc) = max_u_with_cap(&plf, 29.0, false);
        assert_eq!(enc, Encoding::Binary);
        assert!(u.abs() < 1e-6);
        let (u, x, _) = max_u_with_cap(&plf, 31.0, false);
        assert!((u - 100.0).abs() < 1e-6);
        assert!(x >= 30.0 - 1e-9);
    }

    #[test]
    fn triangular_uses_epigraph_and_finds_apex() {
        let mut params = UfParams::default();
        params.aspiration = Some(Quantity::Absolute(40.0));
        let plf = instantiate(&UfSpec::with_params(UfTemplate::Uf6, params), 100.0).unwrap();
        let (u, x, enc) = max_u_with_cap(&plf, 100.0, false);
        assert_eq!(enc, Encoding::Epigraph);
        assert!((u - 100.0).abs() < 1e-9);
        assert!((x - 40.0).abs() < 1e-9);
        let (ub, xb, enc) = max_u_with_cap(&plf, 100.0, true);
        assert_eq!(enc, Encoding::Binary);
        assert!((ub - u).abs() < 1e-6 && (xb - x).abs() < 1e-6);
    }

    #[test]
    fn too_many_segments() {
        let n = 80;
        let plf = PiecewiseLinearUtility::new(
            0.0,
            (1..=n).map(|i| i as f64).collect(),
            (0..=n).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect(),
            n as f64,
        )
        .unwrap();
        let mut p = Program::new();
        let x = p.add_var("x", 0.0, n as f64);
        assert!(matches!(
            encode_plf(&mut p, x, &plf, &EncodeOptions::default()),
            Err(SolverError::TooManySegments { .. })
        ));
    }

    #[test]
    fn jump_at_domain_end_is_reachable() {
        let plf = PiecewiseLinearUtility::new(0.0, vec![100.0, 100.0], vec![0.0, 100.0, 0.0], 100.0)
            .unwrap();
        let (u, x, _) = max_u_with_cap(&plf, 100.0, false);
        assert!((u - 100.0).abs() < 1e-6);
        assert!((x - 100.0).abs() < 1e-6);
    }
}
