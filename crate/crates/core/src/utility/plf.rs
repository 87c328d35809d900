use serde::{Deserialize, Serialize};

use super::UtilityError;

const BREAKPOINT_TOL: f64 = 1e-9;

/// Piecewise-linear utility over `[0, domain_max]`.
///
/// `slopes[i]` applies between `breakpoints[i-1]` and `breakpoints[i]` (with
/// `0` and `domain_max` as outer ends). Where two consecutive breakpoints are
/// equal, the slope entry between them is a jump height in utility units and
/// the function takes the post-jump value at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlf", into = "RawPlf")]
pub struct PiecewiseLinearUtility {
    anchor: f64,
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    domain_max: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPlf {
    anchor: f64,
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    domain_max: f64,
}

impl TryFrom<RawPlf> for PiecewiseLinearUtility {
    type Error = UtilityError;

    fn try_from(r: RawPlf) -> Result<Self, Self::Error> {
        PiecewiseLinearUtility::new(r.anchor, r.breakpoints, r.slopes, r.domain_max)
    }
}

impl From<PiecewiseLinearUtility> for RawPlf {
    fn from(p: PiecewiseLinearUtility) -> Self {
        RawPlf {
            anchor: p.anchor,
            breakpoints: p.breakpoints,
            slopes: p.slopes,
            domain_max: p.domain_max,
        }
    }
}

/// One linear piece of a PLF as seen by the encoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    /// Utility at `left` (post-jump).
    pub value: f64,
    pub slope: f64,
    /// True when the piece ends just before a jump at `right`.
    pub open_right: bool,
}

impl Piece {
    pub fn at(&self, x: f64) -> f64 {
        self.value + self.slope * (x - self.left)
    }

    pub fn end_value(&self) -> f64 {
        self.at(self.right)
    }
}

impl PiecewiseLinearUtility {
    /// Validates and builds a PLF. A jump placed at output 0 is folded into the
    /// anchor so that `anchor` always equals `u(0)`.
    pub fn new(
        anchor: f64,
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        domain_max: f64,
    ) -> Result<Self, UtilityError> {
        let invalid = |msg: String| Err(UtilityError::InvalidPlf(msg));
        if !(domain_max.is_finite() && domain_max > 0.0) {
            return invalid(format!("domain_max must be positive, got {domain_max}"));
        }
        if !anchor.is_finite() {
            return invalid("anchor must be finite".into());
        }
        if slopes.len() != breakpoints.len() + 1 {
            return invalid(format!(
                "expected {} slopes for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                slopes.len()
            ));
        }
        if let Some(s) = slopes.iter().find(|s| !s.is_finite()) {
            return invalid(format!("slope {s} is not finite"));
        }
        let tol = BREAKPOINT_TOL * domain_max;
        let mut bps = breakpoints;
        for (i, b) in bps.iter_mut().enumerate() {
            if !b.is_finite() || *b < -tol || *b > domain_max + tol {
                return invalid(format!(
                    "breakpoint {i} = {b} outside [0, {domain_max}]"
                ));
            }
            *b = b.clamp(0.0, domain_max);
        }
        for i in 1..bps.len() {
            if bps[i] < bps[i - 1] {
                return invalid(format!("breakpoints decrease at index {i}"));
            }
            if i >= 2 && bps[i] == bps[i - 1] && bps[i - 1] == bps[i - 2] {
                return invalid(format!(
                    "more than two equal breakpoints at {}",
                    bps[i]
                ));
            }
        }
        let mut plf = PiecewiseLinearUtility {
            anchor,
            breakpoints: bps,
            slopes,
            domain_max,
        };
        // Fold a jump at zero into the anchor.
        if plf.breakpoints.len() >= 2 && plf.breakpoints[0] == 0.0 && plf.breakpoints[1] == 0.0 {
            plf.anchor += plf.slopes[1];
            plf.breakpoints.drain(0..2);
            plf.slopes.drain(0..2);
        }
        Ok(plf)
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    fn interval(&self, i: usize) -> (f64, f64) {
        let k = self.breakpoints.len();
        let l = if i == 0 { 0.0 } else { self.breakpoints[i - 1] };
        let r = if i == k { self.domain_max } else { self.breakpoints[i] };
        (l, r)
    }

    fn is_jump_entry(&self, i: usize) -> bool {
        i >= 1 && i < self.breakpoints.len() && self.breakpoints[i - 1] == self.breakpoints[i]
    }

    /// Utility at `n`; errors outside `[0, domain_max]` (with a small tolerance).
    pub fn evaluate(&self, n: f64) -> Result<f64, UtilityError> {
        let tol = BREAKPOINT_TOL * self.domain_max;
        if !n.is_finite() || n < -tol || n > self.domain_max + tol {
            return Err(UtilityError::OutOfDomain {
                value: n,
                domain_max: self.domain_max,
            });
        }
        Ok(self.evaluate_clamped(n))
    }

    /// Utility at `n` clamped into the domain.
    pub fn evaluate_clamped(&self, n: f64) -> f64 {
        let n = n.clamp(0.0, self.domain_max);
        let mut u = self.anchor;
        for (i, &s) in self.slopes.iter().enumerate() {
            let (l, r) = self.interval(i);
            if self.is_jump_entry(i) {
                if n >= l {
                    u += s;
                }
            } else if n > l {
                u += s * (n.min(r) - l);
            } else {
                break;
            }
        }
        u
    }

    /// `(position, height)` of every jump.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        (0..self.slopes.len())
            .filter(|&i| self.is_jump_entry(i))
            .map(|i| (self.breakpoints[i], self.slopes[i]))
            .collect()
    }

    pub fn has_jumps(&self) -> bool {
        self.jumps().iter().any(|&(_, h)| h != 0.0)
    }

    /// Linear pieces in order. Zero-width intervals are skipped, except the
    /// single point left after a jump at `domain_max`.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut out: Vec<Piece> = Vec::new();
        let mut u = self.anchor;
        let mut after_jump = false;
        for (i, &s) in self.slopes.iter().enumerate() {
            let (l, r) = self.interval(i);
            if self.is_jump_entry(i) {
                if s != 0.0 {
                    if let Some(last) = out.last_mut() {
                        last.open_right = true;
                    }
                    after_jump = true;
                }
                u += s;
                continue;
            }
            if r > l || (after_jump && i == self.breakpoints.len()) {
                out.push(Piece {
                    left: l,
                    right: r,
                    value: u,
                    slope: s,
                    open_right: false,
                });
                u += s * (r - l);
            }
            after_jump = false;
        }
        out
    }

    /// True iff the function has no jumps and nonincreasing slopes.
    pub fn is_concave(&self) -> bool {
        if self.has_jumps() {
            return false;
        }
        self.pieces()
            .windows(2)
            .all(|w| w[1].slope <= w[0].slope + 1e-12 * w[0].slope.abs().max(1.0))
    }

    /// True iff the function never decreases on its domain.
    pub fn is_nondecreasing(&self) -> bool {
        self.pieces().iter().all(|p| p.slope >= 0.0)
            && self.jumps().iter().all(|&(_, h)| h >= 0.0)
    }

    /// Infimum and supremum over the domain (one-sided limits included).
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self.pieces() {
            for v in [p.value, p.end_value()] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            (self.anchor, self.anchor)
        } else {
            (lo, hi)
        }
    }

    /// `points` evenly spaced `(n, u(n))` samples including both ends.
    pub fn sample(&self, points: usize) -> Vec<(f64, f64)> {
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let n = if i + 1 == points {
                    self.domain_max
                } else {
                    self.domain_max * i as f64 / (points - 1) as f64
                };
                (n, self.evaluate_clamped(n))
            })
            .collect()
    }
}
