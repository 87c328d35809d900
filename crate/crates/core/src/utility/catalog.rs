use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::nonlinear::{sample_nonlinear, NonlinearCurve, DEFAULT_POINTS};
use super::{PiecewiseLinearUtility, UtilityError};

/// Half-width of the UF10 payoff band as a fraction of the upper bound.
pub const PAYOFF_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UfTemplate {
    #[serde(rename = "UF1")]
    Uf1,
    #[serde(rename = "UF2")]
    Uf2,
    #[serde(rename = "UF3")]
    Uf3,
    #[serde(rename = "UF4")]
    Uf4,
    #[serde(rename = "UF5")]
    Uf5,
    #[serde(rename = "UF6")]
    Uf6,
    #[serde(rename = "UF7")]
    Uf7,
    #[serde(rename = "UF8")]
    Uf8,
    #[serde(rename = "UF9")]
    Uf9,
    #[serde(rename = "UF10")]
    Uf10,
    #[serde(rename = "UF11")]
    Uf11,
    #[serde(rename = "UF12")]
    Uf12,
    #[serde(rename = "UF13")]
    Uf13,
    #[serde(rename = "UF14")]
    Uf14,
}

impl UfTemplate {
    pub const ALL: [UfTemplate; 14] = [
        UfTemplate::Uf1,
        UfTemplate::Uf2,
        UfTemplate::Uf3,
        UfTemplate::Uf4,
        UfTemplate::Uf5,
        UfTemplate::Uf6,
        UfTemplate::Uf7,
        UfTemplate::Uf8,
        UfTemplate::Uf9,
        UfTemplate::Uf10,
        UfTemplate::Uf11,
        UfTemplate::Uf12,
        UfTemplate::Uf13,
        UfTemplate::Uf14,
    ];

    pub fn number(self) -> usize {
        UfTemplate::ALL.iter().position(|&t| t == self).unwrap() + 1
    }

    pub fn description(self) -> &'static str {
        match self {
            UfTemplate::Uf1 => "Linear increasing",
            UfTemplate::Uf2 => "Linear increasing with point of indifference",
            UfTemplate::Uf3 => "Linear increasing with plateau at aspiration",
            UfTemplate::Uf4 => "Linear increasing between indifference and aspiration",
            UfTemplate::Uf5 => "Linear increasing with negative start",
            UfTemplate::Uf6 => "Triangular peaking at aspiration",
            UfTemplate::Uf7 => "S-shaped around a reference point",
            UfTemplate::Uf8 => "Step: one tier",
            UfTemplate::Uf9 => "Step: two tiers",
            UfTemplate::Uf10 => "Single payoff at aspiration",
            UfTemplate::Uf11 => "Linear income with regret below a target",
            UfTemplate::Uf12 => "Reward with jump at a target",
            UfTemplate::Uf13 => "Penalty below a target, reward with jump above",
            UfTemplate::Uf14 => "Penalty below a target only",
        }
    }

    /// Parameters that must be supplied (alternatives separated by `|`).
    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            UfTemplate::Uf1 => &[],
            UfTemplate::Uf2 | UfTemplate::Uf5 => &["indifference"],
            UfTemplate::Uf3 | UfTemplate::Uf6 | UfTemplate::Uf10 => &["aspiration"],
            UfTemplate::Uf4 => &["indifference", "aspiration"],
            UfTemplate::Uf7 => &["reference", "steepness"],
            UfTemplate::Uf8 => &["indifference|aspiration"],
            UfTemplate::Uf9 => &["indifference", "aspiration", "tier_utility"],
            UfTemplate::Uf11 => &["aspiration|reference"],
            UfTemplate::Uf12 | UfTemplate::Uf13 | UfTemplate::Uf14 => &["indifference|reference"],
        }
    }

    pub fn optional_params(self) -> &'static [&'static str] {
        match self {
            UfTemplate::Uf1 => &["variant", "alpha", "beta", "points"],
            UfTemplate::Uf2 | UfTemplate::Uf3 => &["alpha", "points"],
            UfTemplate::Uf6 => &["variant", "alpha", "beta", "points"],
            UfTemplate::Uf7 => &["points"],
            UfTemplate::Uf11 => &["income", "penalty"],
            UfTemplate::Uf12 => &["reward"],
            UfTemplate::Uf13 => &["reward", "penalty"],
            UfTemplate::Uf14 => &["penalty"],
            _ => &[],
        }
    }

    /// Templates whose utility never decreases in output.
    pub fn is_monotone(self) -> bool {
        !matches!(self, UfTemplate::Uf6 | UfTemplate::Uf10)
    }
}

impl fmt::Display for UfTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UF{}", self.number())
    }
}

impl FromStr for UfTemplate {
    type Err = UtilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t
            .strip_prefix("UF")
            .or_else(|| t.strip_prefix("uf"))
            .or_else(|| t.strip_prefix("Uf"))
            .unwrap_or(t);
        digits
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=14).contains(n))
            .map(|n| UfTemplate::ALL[n - 1])
            .ok_or_else(|| UtilityError::UnknownTemplate(s.to_string()))
    }
}

/// An output threshold given either absolutely or as a fraction of the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Absolute(f64),
    Fraction(f64),
}

impl Quantity {
    pub fn resolve(self, upper: f64) -> f64 {
        match self {
            Quantity::Absolute(v) => v,
            Quantity::Fraction(f) => f * upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveVariant {
    Linear,
    Exp,
    Power,
    ComplementPower,
    CalibratedExp,
    Beta,
}

impl FromStr for CurveVariant {
    type Err = UtilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| UtilityError::InvalidParam(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UfParams {
    pub indifference: Option<Quantity>,
    pub aspiration: Option<Quantity>,
    pub reference: Option<Quantity>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub steepness: Option<f64>,
    pub tier_utility: Option<f64>,
    pub reward: Option<f64>,
    pub income: Option<f64>,
    pub penalty: Option<f64>,
    pub variant: Option<CurveVariant>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UfSpec {
    pub template: UfTemplate,
    #[serde(default)]
    pub params: UfParams,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl UfSpec {
    pub fn new(template: UfTemplate) -> Self {
        UfSpec {
            template,
            params: UfParams::default(),
            weight: 1.0,
        }
    }

    pub fn with_params(template: UfTemplate, params: UfParams) -> Self {
        UfSpec {
            template,
            params,
            weight: 1.0,
        }
    }
}

fn resolve(name: &str, q: Quantity, upper: f64) -> Result<f64, UtilityError> {
    if let Quantity::Fraction(f) = q {
        if !(0.0..=1.0).contains(&f) {
            return Err(UtilityError::InvalidParam(format!(
                "{name} fraction {f} outside [0, 1]"
            )));
        }
    }
    let v = q.resolve(upper);
    if !v.is_finite() || v < 0.0 {
        return Err(UtilityError::InvalidParam(format!(
            "{name} must be a nonnegative output, got {v}"
        )));
    }
    if v > upper * (1.0 + 1e-12) {
        return Err(if name == "aspiration" {
            UtilityError::AspirationAboveBound {
                aspiration: v,
                bound: upper,
            }
        } else {
            UtilityError::InvalidParam(format!("{name} {v} exceeds the upper bound {upper}"))
        });
    }
    Ok(v.min(upper))
}

struct Resolved {
    indifference: Option<f64>,
    aspiration: Option<f64>,
    reference: Option<f64>,
}

fn need(v: Option<f64>, what: &str, t: UfTemplate) -> Result<f64, UtilityError> {
    v.ok_or_else(|| UtilityError::MissingParam {
        template: t,
        param: what.to_string(),
    })
}

fn finite(name: &str, v: f64) -> Result<f64, UtilityError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(UtilityError::InvalidParam(format!("{name} must be finite")))
    }
}

/// Builds the PLF for `spec` on the domain `[0, upper]`.
pub fn instantiate(spec: &UfSpec, upper: f64) -> Result<PiecewiseLinearUtility, UtilityError> {
    if !(upper.is_finite() && upper > 0.0) {
        return Err(UtilityError::InvalidParam(format!(
            "upper bound must be positive, got {upper}"
        )));
    }
    if !(spec.weight.is_finite() && spec.weight > 0.0) {
        return Err(UtilityError::InvalidParam(format!(
            "weight must be positive, got {}",
            spec.weight
        )));
    }
    let p = &spec.params;
    let t = spec.template;
    let r = Resolved {
        indifference: p.indifference.map(|q| resolve("indifference", q, upper)).transpose()?,
        aspiration: p.aspiration.map(|q| resolve("aspiration", q, upper)).transpose()?,
        reference: p.reference.map(|q| resolve("reference", q, upper)).transpose()?,
    };
    let points = p.points.unwrap_or(DEFAULT_POINTS);
    let alpha = p.alpha.map(|a| finite("alpha", a)).transpose()?;
    let default_rate = 100.0 / upper;
    let plf = |anchor: f64, b: Vec<f64>, s: Vec<f64>| PiecewiseLinearUtility::new(anchor, b, s, upper);
    let ordered = |lo: f64, hi: f64| {
        if lo < hi {
            Ok(())
        } else {
            Err(UtilityError::InvalidParam(format!(
                "indifference {lo} must be below aspiration {hi}"
            )))
        }
    };

    match t {
        UfTemplate::Uf1 => {
            let curve = match p.variant {
                None | Some(CurveVariant::Linear) => match alpha {
                    Some(a) if a != 1.0 => Some(NonlinearCurve::Uf1Power { alpha: a }),
                    _ => None,
                },
                Some(CurveVariant::Power) => Some(NonlinearCurve::Uf1Power {
                    alpha: alpha.unwrap_or(1.0),
                }),
                Some(CurveVariant::ComplementPower) => Some(NonlinearCurve::Uf1ComplementPower {
                    beta: need(p.beta, "beta", t)?,
                }),
                Some(CurveVariant::Exp) => Some(NonlinearCurve::Uf1Exp),
                Some(CurveVariant::CalibratedExp) => Some(NonlinearCurve::Uf1CalibratedExp {
                    alpha: need(alpha, "alpha", t)?,
                }),
                Some(v) => {
                    return Err(UtilityError::InvalidParam(format!(
                        "variant {v:?} is not available for UF1"
                    )))
                }
            };
            match curve {
                Some(c) => sample_nonlinear(&c, upper, points),
                None => plf(0.0, vec![upper], vec![default_rate, 0.0]),
            }
        }
        UfTemplate::Uf2 => {
            let ni = need(r.indifference, "indifference", t)?;
            if ni >= upper {
                return Err(UtilityError::InvalidParam(format!(
                    "indifference {ni} must be below the upper bound {upper}"
                )));
            }
            match alpha {
                Some(a) if a != 1.0 => sample_nonlinear(
                    &NonlinearCurve::Uf2Power {
                        indifference: ni,
                        alpha: a,
                    },
                    upper,
                    points,
                ),
                _ => plf(0.0, vec![ni], vec![0.0, 100.0 / (upper - ni)]),
            }
        }
        UfTemplate::Uf3 => {
            let na = need(r.aspiration, "aspiration", t)?;
            if na <= 0.0 {
                return Err(UtilityError::InvalidParam("aspiration must be positive".into()));
            }
            match alpha {
                Some(a) if a != 1.0 => sample_nonlinear(
                    &NonlinearCurve::Uf3Power {
                        aspiration: na,
                        alpha: a,
                    },
                    upper,
                    points,
                ),
                _ => plf(0.0, vec![na], vec![100.0 / na, 0.0]),
            }
        }
        UfTemplate::Uf4 => {
            let ni = need(r.indifference, "indifference", t)?;
            let na = need(r.aspiration, "aspiration", t)?;
            ordered(ni, na)?;
            plf(0.0, vec![ni, na], vec![0.0, 100.0 / (na - ni), 0.0])
        }
        UfTemplate::Uf5 => {
            let ni = need(r.indifference, "indifference", t)?;
            if ni >= upper {
                return Err(UtilityError::InvalidParam(format!(
                    "intercept {ni} must be below the upper bound {upper}"
                )));
            }
            let rate = 100.0 / (upper - ni);
            plf(-rate * ni, vec![upper], vec![rate, 0.0])
        }
        UfTemplate::Uf6 => {
            if p.variant == Some(CurveVariant::Beta) {
                return sample_nonlinear(
                    &NonlinearCurve::Uf6Beta {
                        alpha: need(alpha, "alpha", t)?,
                        beta: need(p.beta, "beta", t)?,
                    },
                    upper,
                    points,
                );
            }
            let na = need(r.aspiration, "aspiration", t)?;
            if na <= 0.0 {
                return Err(UtilityError::InvalidParam("aspiration must be positive".into()));
            }
            if na >= upper {
                plf(0.0, vec![upper], vec![100.0 / upper, 0.0])
            } else {
                plf(0.0, vec![na], vec![100.0 / na, -100.0 / (upper - na)])
            }
        }
        UfTemplate::Uf7 => {
            let nr = need(r.reference, "reference", t)?;
            let steepness = need(p.steepness.or(alpha), "steepness", t)?;
            sample_nonlinear(
                &NonlinearCurve::Uf7Sigmoid {
                    steepness,
                    zeta: nr / upper,
                },
                upper,
                points,
            )
        }
        UfTemplate::Uf8 => {
            let ni = need(r.indifference.or(r.aspiration), "indifference|aspiration", t)?;
            plf(0.0, vec![ni, ni], vec![0.0, 100.0, 0.0])
        }
        UfTemplate::Uf9 => {
            let ni = need(r.indifference, "indifference", t)?;
            let na = need(r.aspiration, "aspiration", t)?;
            let tier = finite("tier_utility", need(p.tier_utility, "tier_utility", t)?)?;
            ordered(ni, na)?;
            plf(
                0.0,
                vec![ni, ni, na, na],
                vec![0.0, tier, 0.0, 100.0 - tier, 0.0],
            )
        }
        UfTemplate::Uf10 => {
            let na = need(r.aspiration, "aspiration", t)?;
            let eps = PAYOFF_BAND * upper;
            let (lo, hi) = (na - eps, na + eps);
            let mut anchor = 0.0;
            let mut b = Vec::new();
            let mut s = vec![0.0];
            if lo > 0.0 {
                b.extend([lo, lo]);
                s.extend([100.0, 0.0]);
            } else {
                anchor = 100.0;
            }
            if hi < upper {
                b.extend([hi, hi]);
                s.extend([-100.0, 0.0]);
            }
            plf(anchor, b, s)
        }
        UfTemplate::Uf11 => {
            let target = need(r.aspiration.or(r.reference), "aspiration|reference", t)?;
            let f = finite("income", p.income.unwrap_or(default_rate))?;
            let g = finite("penalty", p.penalty.unwrap_or(default_rate))?;
            plf(-g * target, vec![target], vec![f + g, f])
        }
        UfTemplate::Uf12 => {
            let target = need(r.indifference.or(r.reference), "indifference|reference", t)?;
            let w = finite("reward", p.reward.unwrap_or(default_rate))?;
            plf(0.0, vec![target, target], vec![0.0, w * target, w])
        }
        UfTemplate::Uf13 => {
            let target = need(r.indifference.or(r.reference), "indifference|reference", t)?;
            let w = finite("reward", p.reward.unwrap_or(default_rate))?;
            let g = finite("penalty", p.penalty.unwrap_or(default_rate))?;
            plf(-g * target, vec![target, target], vec![g, w * target, w])
        }
        UfTemplate::Uf14 => {
            let target = need(r.indifference.or(r.reference), "indifference|reference", t)?;
            let g = finite("penalty", p.penalty.unwrap_or(default_rate))?;
            plf(-g * target, vec![target], vec![g, 0.0])
        }
    }
}
