use serde::{Deserialize, Serialize};

use super::{PiecewiseLinearUtility, UtilityError};

pub const DEFAULT_POINTS: usize = 30;

/// Closed-form utility curves that are sampled into PLFs.
///
/// Thresholds are absolute outputs; `zeta` is a fraction of the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case")]
pub enum NonlinearCurve {
    /// `e^(ln(101) n / n_max) - 1`.
    Uf1Exp,
    /// `100 (n / n_max)^alpha`.
    Uf1Power { alpha: f64 },
    /// `100 (1 - (1 - n / n_max)^beta)`.
    Uf1ComplementPower { beta: f64 },
    /// `d (e^((n / n_max)^alpha) - 1)` with `d = 100 / (e - 1)`.
    Uf1CalibratedExp { alpha: f64 },
    /// `100 (max(n - nI, 0) / (n_max - nI))^alpha`.
    Uf2Power { indifference: f64, alpha: f64 },
    /// `100 (min(n, nA) / nA)^alpha`.
    Uf3Power { aspiration: f64, alpha: f64 },
    /// `d (n / n_max)^alpha (1 - n / n_max)^beta`, `d` set so the sampled maximum is 100.
    Uf6Beta { alpha: f64, beta: f64 },
    /// `100 / (1 + e^(-steepness (n / n_max - zeta)))`.
    Uf7Sigmoid { steepness: f64, zeta: f64 },
}

impl NonlinearCurve {
    fn check(&self, upper: f64) -> Result<(), UtilityError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(UtilityError::InvalidParam(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            NonlinearCurve::Uf1Exp => Ok(()),
            NonlinearCurve::Uf1Power { alpha } | NonlinearCurve::Uf1CalibratedExp { alpha } => {
                positive("alpha", alpha)
            }
            NonlinearCurve::Uf1ComplementPower { beta } => positive("beta", beta),
            NonlinearCurve::Uf2Power {
                indifference,
                alpha,
            } => {
                positive("alpha", alpha)?;
                if !(0.0..upper).contains(&indifference) {
                    return Err(UtilityError::InvalidParam(format!(
                        "indifference {indifference} must lie in [0, {upper})"
                    )));
                }
                Ok(())
            }
            NonlinearCurve::Uf3Power { aspiration, alpha } => {
                positive("alpha", alpha)?;
                positive("aspiration", aspiration)?;
                if aspiration > upper {
                    return Err(UtilityError::AspirationAboveBound {
                        aspiration,
                        bound: upper,
                    });
                }
                Ok(())
            }
            NonlinearCurve::Uf6Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
            NonlinearCurve::Uf7Sigmoid { steepness, zeta } => {
                positive("steepness", steepness)?;
                if !(0.0..=1.0).contains(&zeta) {
                    return Err(UtilityError::InvalidParam(format!(
                        "reference fraction {zeta} outside [0, 1]"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Uncalibrated closed form at output `n` for upper bound `upper`.
    pub fn value(&self, n: f64, upper: f64) -> f64 {
        let x = n / upper;
        match *self {
            NonlinearCurve::Uf1Exp => (101f64.ln() * x).exp() - 1.0,
            NonlinearCurve::Uf1Power { alpha } => 100.0 * x.powf(alpha),
            NonlinearCurve::Uf1ComplementPower { beta } => 100.0 * (1.0 - (1.0 - x).powf(beta)),
            NonlinearCurve::Uf1CalibratedExp { alpha } => {
                100.0 / (std::f64::consts::E - 1.0) * (x.powf(alpha).exp() - 1.0)
            }
            NonlinearCurve::Uf2Power {
                indifference,
                alpha,
            } => 100.0 * ((n - indifference).max(0.0) / (upper - indifference)).powf(alpha),
            NonlinearCurve::Uf3Power { aspiration, alpha } => {
                100.0 * (n.min(aspiration) / aspiration).powf(alpha)
            }
            NonlinearCurve::Uf6Beta { alpha, beta } => x.powf(alpha) * (1.0 - x).powf(beta),
            NonlinearCurve::Uf7Sigmoid { steepness, zeta } => {
                100.0 / (1.0 + (-steepness * (x - zeta)).exp())
            }
        }
    }
}

/// Samples `curve` at `num_points` evenly spaced outputs on `[0, upper]` and
/// joins them with chords.
pub fn sample_nonlinear(
    curve: &NonlinearCurve,
    upper: f64,
    num_points: usize,
) -> Result<PiecewiseLinearUtility, UtilityError> {
    if num_points < 2 {
        return Err(UtilityError::InvalidParam(format!(
            "at least 2 sample points are required, got {num_points}"
        )));
    }
    if !(upper.is_finite() && upper > 0.0) {
        return Err(UtilityError::InvalidParam(format!(
            "upper bound must be positive, got {upper}"
        )));
    }
    curve.check(upper)?;
    let delta = upper / (num_points - 1) as f64;
    let xs: Vec<f64> = (0..num_points)
        .map(|i| if i + 1 == num_points { upper } else { delta * i as f64 })
        .collect();
    let mut us = Vec::with_capacity(num_points);
    for &x in &xs {
        let u = curve.value(x, upper);
        if !u.is_finite() {
            return Err(UtilityError::CurveUndefined { at: x });
        }
        us.push(u);
    }
    if let NonlinearCurve::Uf6Beta { .. } = curve {
        let peak = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(peak > 0.0) {
            return Err(UtilityError::CurveUndefined { at: upper });
        }
        for u in &mut us {
            *u *= 100.0 / peak;
        }
    }
    let breakpoints = xs[1..].to_vec();
    let mut slopes: Vec<f64> = xs
        .windows(2)
        .zip(us.windows(2))
        .map(|(x, u)| (u[1] - u[0]) / (x[1] - x[0]))
        .collect();
    slopes.push(0.0);
    PiecewiseLinearUtility::new(us[0], breakpoints, slopes, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn power_one_is_linear() {
        let p = sample_nonlinear(&NonlinearCurve::Uf1Power { alpha: 1.0 }, 250.0, 30).unwrap();
        for &s in &p.slopes()[..29] {
            assert_abs_diff_eq!(s, 100.0 / 250.0, epsilon = 1e-12);
        }
        for k in 0..=100 {
            let n = 2.5 * k as f64;
            assert_abs_diff_eq!(p.evaluate(n).unwrap(), 100.0 * n / 250.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exp_endpoint_hits_one_hundred() {
        let p = sample_nonlinear(&NonlinearCurve::Uf1Exp, 1234.5, 30).unwrap();
        assert_abs_diff_eq!(p.anchor(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.evaluate(1234.5).unwrap(), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn sigmoid_midpoint() {
        let c = NonlinearCurve::Uf7Sigmoid {
            steepness: 20.0,
            zeta: 0.5,
        };
        let p = sample_nonlinear(&c, 1000.0, 30).unwrap();
        assert!((p.evaluate(500.0).unwrap() - 50.0).abs() <= 0.5);
    }

    #[test]
    fn beta_shape_is_calibrated_to_one_hundred() {
        let c = NonlinearCurve::Uf6Beta {
            alpha: 2.0,
            beta: 3.0,
        };
        let p = sample_nonlinear(&c, 100.0, 30).unwrap();
        let (lo, hi) = p.range();
        assert_abs_diff_eq!(hi, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn breakpoints_follow_uniform_grid() {
        let p = sample_nonlinear(&NonlinearCurve::Uf1CalibratedExp { alpha: 2.0 }, 29.0, 30).unwrap();
        assert_eq!(p.breakpoints().len(), 29);
        for (i, &b) in p.breakpoints().iter().enumerate() {
            assert_abs_diff_eq!(b, (i + 1) as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(p.evaluate(29.0).unwrap(), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(sample_nonlinear(&NonlinearCurve::Uf1Power { alpha: 0.0 }, 10.0, 30).is_err());
        assert!(sample_nonlinear(&NonlinearCurve::Uf1Exp, 10.0, 1).is_err());
        let c = NonlinearCurve::Uf3Power {
            aspiration: 20.0,
            alpha: 1.0,
        };
        assert!(matches!(
            sample_nonlinear(&c, 10.0, 30),
            Err(UtilityError::AspirationAboveBound { .. })
        ));
    }
}
