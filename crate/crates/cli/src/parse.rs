//! Argument value parsers.

use std::path::Path;

use casemix_core::io::{load_uf_config, UfConfig};
use casemix_core::scalarize::GamWeights;
use casemix_core::RepairStrategy;
use serde_json::{Map, Value};

/// Sweep values as one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

pub fn sweep_values(s: &str) -> Result<Values, String> {
    values(s).map(Values)
}

/// `lo:hi:step` (inclusive) or a comma-separated list.
pub fn values(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (number(lo)?, number(hi)?, number(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(format!("range {s:?} needs lo <= hi and a positive step"));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| lo + step * i as f64).collect()
        }
        [_] => s.split(',').map(number).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("expected lo:hi:step or a comma list, got {s:?}")),
    };
    if out.is_empty() {
        return Err("no values given".into());
    }
    Ok(out)
}

fn number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{t:?} is not a number"))
}

/// `preference:GROUP`, `sum-overachieve` or `tradeoff:EPS_PLUS:EPS_MINUS`.
pub fn repair(s: &str) -> Result<RepairStrategy, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["preference", g] if !g.is_empty() => Ok(RepairStrategy::Preference { group: g.to_string() }),
        ["sum-overachieve"] => Ok(RepairStrategy::sum_overachieve()),
        ["tradeoff", p, m] => Ok(RepairStrategy::Tradeoff {
            eps_plus: number(p)?,
            eps_minus: number(m)?,
            over_weights: Vec::new(),
            under_weights: Vec::new(),
        }),
        _ => Err(format!(
            "unknown repair {s:?} (expected preference:GROUP, sum-overachieve or tradeoff:E+:E-)"
        )),
    }
}

/// `relative`, `absolute` or a comma list of signed per-group weights.
pub fn gam_weights(s: &str) -> Result<GamWeights, String> {
    match s {
        "relative" => Ok(GamWeights::Relative),
        "absolute" => Ok(GamWeights::Absolute),
        list => Ok(GamWeights::Custom(
            list.split(',').map(number).collect::<Result<_, _>>().map_err(|e| {
                format!("{e} (expected relative, absolute or a comma list of weights)")
            })?,
        )),
    }
}

/// A configuration file, or an inline spec applied to every group:
/// `UF3` or `UF3:aspiration_pct=40,weight=2`.
pub fn uf_config(s: &str) -> Result<UfConfig, casemix_core::Error> {
    if Path::new(s).is_file() {
        return load_uf_config(s);
    }
    let (template, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut entry = Map::new();
    entry.insert("template".into(), Value::String(template.to_ascii_uppercase()));
    for kv in rest.split(',').filter(|kv| !kv.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            casemix_core::Error::validation("/default", format!("expected key=value, got {kv:?}"))
        })?;
        let v = if let Ok(x) = v.parse::<u64>() {
            serde_json::json!(x)
        } else if let Ok(x) = v.parse::<f64>() {
            serde_json::json!(x)
        } else {
            Value::String(v.to_string())
        };
        entry.insert(k.trim().to_string(), v);
    }
    UfConfig::from_value(serde_json::json!({ "default": entry }))
}

/// A comma list of numbers, or `None` when `s` does not look like one.
pub fn number_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|p| number(p).ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(values("10:90:10").unwrap().len(), 9);
        assert_eq!(values("10:90:10").unwrap()[8], 90.0);
        assert_eq!(values("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(values("5, 10,20").unwrap(), vec![5.0, 10.0, 20.0]);
        assert!(values("10:5:1").is_err());
        assert!(values("1:2:0").is_err());
        assert!(values("a,b").is_err());
    }

    #[test]
    fn repair_forms() {
        assert_eq!(
            repair("preference:CARD").unwrap(),
            RepairStrategy::Preference { group: "CARD".into() }
        );
        assert_eq!(repair("sum-overachieve").unwrap(), RepairStrategy::sum_overachieve());
        assert!(matches!(repair("tradeoff:1:1000").unwrap(), RepairStrategy::Tradeoff { eps_minus, .. } if eps_minus == 1000.0));
        assert!(repair("preference").is_err());
        assert!(repair("greedy").is_err());
    }

    #[test]
    fn inline_uf_config() {
        let cfg = uf_config("uf3:aspiration_pct=40").unwrap();
        let d = cfg.default.unwrap();
        assert_eq!(d.aspiration_pct, Some(40.0));
        assert!(uf_config("UF3:aspiration_pct").is_err());
        assert!(uf_config("UF3:nonsense=1").is_err());
        assert!(uf_config("UF99").is_err());
    }

    #[test]
    fn gam_weight_forms() {
        assert_eq!(gam_weights("absolute").unwrap(), GamWeights::Absolute);
        assert_eq!(gam_weights("1,-2").unwrap(), GamWeights::Custom(vec![1.0, -2.0]));
        assert!(gam_weights("heavy").is_err());
    }
}
