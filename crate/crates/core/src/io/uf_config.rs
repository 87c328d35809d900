//! Per-group utility configuration files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "default": { "template": "UF3", "aspiration_pct": 40 },
//!   "CARD": { "template": "UF1" }
//! }
//! ```
//!
//! Threshold parameters are given either absolutely (`aspiration`) or in
//! percent of the group's treatment limit (`aspiration_pct`), never both.

use std::collections::BTreeMap;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::instance::parse_json;
use crate::model::HospitalInstance;
use crate::utility::{
    instantiate, CurveVariant, PiecewiseLinearUtility, Quantity, UfParams, UfSpec, UfTemplate,
    UtilityError,
};
use crate::Error;

pub const UF_CONFIG_SCHEMA_VERSION: u32 = 1;

/// One group's entry in flat form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UfEntry {
    pub template: Option<UfTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "intercept")]
    pub indifference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "intercept_pct")]
    pub indifference_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspiration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspiration_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steepness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier_utility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub income: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<CurveVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

fn threshold(
    name: &str,
    abs: Option<f64>,
    pct: Option<f64>,
) -> Result<Option<Quantity>, (String, String)> {
    match (abs, pct) {
        (Some(_), Some(_)) => Err((
            name.to_string(),
            format!("give either {name} or {name}_pct, not both"),
        )),
        (Some(v), None) => Ok(Some(Quantity::Absolute(v))),
        (None, Some(p)) => Ok(Some(Quantity::Fraction(p / 100.0))),
        (None, None) => Ok(None),
    }
}

fn split(q: Option<Quantity>) -> (Option<f64>, Option<f64>) {
    match q {
        Some(Quantity::Absolute(v)) => (Some(v), None),
        Some(Quantity::Fraction(f)) => (None, Some(f * 100.0)),
        None => (None, None),
    }
}

impl UfEntry {
    /// Converts to a spec; errors name the offending field.
    pub fn to_spec(&self) -> Result<UfSpec, (String, String)> {
        let template = self
            .template
            .ok_or_else(|| ("template".to_string(), "missing field `template`".to_string()))?;
        let weight = self.weight.unwrap_or(1.0);
        if !(weight.is_finite() && weight > 0.0) {
            return Err(("weight".into(), "must be positive".into()));
        }
        Ok(UfSpec {
            template,
            weight,
            params: UfParams {
                indifference: threshold("indifference", self.indifference, self.indifference_pct)?,
                aspiration: threshold("aspiration", self.aspiration, self.aspiration_pct)?,
                reference: threshold("reference", self.reference, self.reference_pct)?,
                alpha: self.alpha,
                beta: self.beta,
                steepness: self.steepness,
                tier_utility: self.tier_utility,
                reward: self.reward,
                income: self.income,
                penalty: self.penalty,
                variant: self.variant,
                points: self.points,
            },
        })
    }

    pub fn from_spec(spec: &UfSpec) -> UfEntry {
        let p = &spec.params;
        let (indifference, indifference_pct) = split(p.indifference);
        let (aspiration, aspiration_pct) = split(p.aspiration);
        let (reference, reference_pct) = split(p.reference);
        UfEntry {
            template: Some(spec.template),
            weight: (spec.weight != 1.0).then_some(spec.weight),
            indifference,
            indifference_pct,
            aspiration,
            aspiration_pct,
            reference,
            reference_pct,
            alpha: p.alpha,
            beta: p.beta,
            steepness: p.steepness,
            tier_utility: p.tier_utility,
            reward: p.reward,
            income: p.income,
            penalty: p.penalty,
            variant: p.variant,
            points: p.points,
        }
    }
}

/// Utility configuration: an optional default plus per-group overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct UfConfig {
    pub default: Option<UfEntry>,
    pub groups: BTreeMap<String, UfEntry>,
}

impl UfConfig {
    /// The same spec for every group.
    pub fn uniform(spec: &UfSpec) -> UfConfig {
        UfConfig {
            default: Some(UfEntry::from_spec(spec)),
            groups: BTreeMap::new(),
        }
    }

    pub fn from_value(value: serde_json::Value) -> Result<UfConfig, Error> {
        let serde_json::Value::Object(map) = value else {
            return Err(Error::validation("/", "expected a JSON object"));
        };
        let mut cfg = UfConfig {
            default: None,
            groups: BTreeMap::new(),
        };
        for (key, v) in map {
            if key == "schema_version" {
                match v.as_u64() {
                    Some(1) => continue,
                    _ => {
                        return Err(Error::validation(
                            "/schema_version",
                            format!("unsupported version {v} (expected {UF_CONFIG_SCHEMA_VERSION})"),
                        ))
                    }
                }
            }
            let entry: UfEntry = serde_path_to_error::deserialize(v).map_err(|e| {
                let inner = e.path().to_string();
                let path = if inner == "." {
                    format!("/{key}")
                } else {
                    format!("/{key}/{inner}")
                };
                Error::validation(path, e.into_inner().to_string())
            })?;
            entry
                .to_spec()
                .map_err(|(field, msg)| Error::validation(format!("/{key}/{field}"), msg))?;
            if key == "default" {
                cfg.default = Some(entry);
            } else {
                cfg.groups.insert(key, entry);
            }
        }
        Ok(cfg)
    }

    pub fn from_str(text: &str, origin: &str) -> Result<UfConfig, Error> {
        UfConfig::from_value(parse_json(text, origin)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// One spec per instance group, in instance order.
    pub fn specs(&self, inst: &HospitalInstance) -> Result<Vec<(String, UfSpec)>, Error> {
        for key in self.groups.keys() {
            if inst.group_index(key).is_none() {
                return Err(Error::validation(format!("/{key}"), "unknown patient group"));
            }
        }
        inst.groups
            .iter()
            .map(|g| {
                let (key, entry) = match (self.groups.get(&g.id), &self.default) {
                    (Some(e), _) => (g.id.clone(), e),
                    (None, Some(d)) => ("default".to_string(), d),
                    (None, None) => {
                        return Err(Error::validation(
                            format!("/{}", g.id),
                            "no utility function for this group and no default",
                        ))
                    }
                };
                let spec = entry
                    .to_spec()
                    .map_err(|(field, msg)| Error::validation(format!("/{key}/{field}"), msg))?;
                Ok((key, spec))
            })
            .collect()
    }

    /// Instantiates every group's utility over `[0, bound]`.
    ///
    /// Thresholds above a group's limit are rejected here, before any solve.
    pub fn resolve(
        &self,
        inst: &HospitalInstance,
        bounds: &[f64],
    ) -> Result<Vec<PiecewiseLinearUtility>, Error> {
        if bounds.len() != inst.groups.len() {
            return Err(Error::validation("/bounds", "one bound per group is required"));
        }
        self.specs(inst)?
            .into_iter()
            .zip(&inst.groups)
            .zip(bounds)
            .map(|(((key, spec), g), &b)| {
                instantiate(&spec, b).map_err(|e| {
                    let field = match e {
                        UtilityError::AspirationAboveBound { .. } => "/aspiration",
                        _ => "",
                    };
                    Error::validation(format!("/{key}{field}"), format!("group {}: {e}", g.id))
                })
            })
            .collect()
    }

    /// Per-group ASF weights, in instance order.
    pub fn weights(&self, inst: &HospitalInstance) -> Result<Vec<f64>, Error> {
        Ok(self.specs(inst)?.into_iter().map(|(_, s)| s.weight).collect())
    }
}

impl Serialize for UfConfig {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("schema_version", &UF_CONFIG_SCHEMA_VERSION)?;
        if let Some(d) = &self.default {
            m.serialize_entry("default", d)?;
        }
        for (k, v) in &self.groups {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for UfConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        UfConfig::from_value(v).map_err(serde::de::Error::custom)
    }
}

pub fn load_uf_config(path: impl AsRef<Path>) -> Result<UfConfig, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    UfConfig::from_str(&text, &path.display().to_string())
}

pub fn save_uf_config(cfg: &UfConfig, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, cfg.to_json()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::bundled_toy;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_expands_to_every_group() {
        let inst = bundled_toy();
        let cfg = UfConfig::from_str(r#"{"default": {"template": "UF3", "aspiration_pct": 40}}"#, "t")
            .unwrap();
        let plfs = cfg.resolve(&inst, &[100.0, 50.0]).unwrap();
        assert_abs_diff_eq!(plfs[0].evaluate(40.0).unwrap(), 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(plfs[1].evaluate(20.0).unwrap(), 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(plfs[1].evaluate(10.0).unwrap(), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn aspiration_above_limit_names_the_group() {
        let inst = bundled_toy();
        let cfg = UfConfig::from_str(
            r#"{"default": {"template": "UF1"}, "B": {"template": "UF3", "aspiration": 999999}}"#,
            "t",
        )
        .unwrap();
        let e = cfg.resolve(&inst, &[100.0, 50.0]).unwrap_err().to_string();
        assert!(e.starts_with("/B/aspiration: group B"), "{e}");
        assert!(e.contains("treatment limit"), "{e}");
    }

    #[test]
    fn shape_errors_carry_paths() {
        let cases = [
            (r#"{"A": {"template": "UF3", "aspirashun": 1}}"#, "/A"),
            (r#"{"A": {"template": "UF99"}}"#, "/A/template"),
            (r#"{"A": {"template": "UF3", "aspiration": 1, "aspiration_pct": 2}}"#, "/A/aspiration"),
            (r#"{"schema_version": 7}"#, "/schema_version"),
        ];
        for (text, path) in cases {
            let e = UfConfig::from_str(text, "t").unwrap_err().to_string();
            assert!(e.starts_with(path), "{text}: {e}");
        }
        let inst = bundled_toy();
        let e = UfConfig::from_str(r#"{"Z": {"template": "UF1"}}"#, "t")
            .unwrap()
            .specs(&inst)
            .unwrap_err();
        assert!(e.to_string().starts_with("/Z"));
        let e = UfConfig::from_str(r#"{"A": {"template": "UF1"}}"#, "t")
            .unwrap()
            .specs(&inst)
            .unwrap_err();
        assert!(e.to_string().starts_with("/B"));
    }

    #[test]
    fn intercept_is_an_alias() {
        let cfg = UfConfig::from_str(r#"{"default": {"template": "UF5", "intercept_pct": 10}}"#, "t")
            .unwrap();
        let spec = cfg.default.unwrap().to_spec().unwrap();
        assert_eq!(spec.params.indifference, Some(Quantity::Fraction(0.1)));
    }

    #[test]
    fn write_then_load_is_a_fixpoint() {
        let text = r#"{"default": {"template": "UF3", "aspiration_pct": 33.3, "weight": 2},
                       "A": {"template": "UF7", "reference": 12.5, "steepness": 0.3}}"#;
        let cfg = UfConfig::from_str(text, "t").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("uf.json");
        save_uf_config(&cfg, &p).unwrap();
        let again = load_uf_config(&p).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_json(), again.to_json());
    }
}
