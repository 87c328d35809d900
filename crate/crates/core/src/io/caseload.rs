use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::instance::parse_json;
use crate::engine::SolveOutcome;
use crate::model::{Caseload, HospitalInstance};
use crate::Error;

#[derive(Deserialize)]
#[serde(untagged)]
enum CaseloadFile {
    Outcome(Box<SolveOutcome>),
    Caseload(Caseload),
    Totals(BTreeMap<String, f64>),
}

/// Reads per-group totals, aligned with `inst.groups`, from a solve result,
/// a caseload, or a plain `{"GROUP": patients}` object.
pub fn caseload_totals_from_str(
    text: &str,
    origin: &str,
    inst: &HospitalInstance,
) -> Result<Vec<f64>, Error> {
    let file: CaseloadFile = parse_json(text, origin).map_err(|e| match e {
        Error::Validation { .. } => Error::validation(
            "/",
            "expected a solve result, a caseload or an object of group totals",
        ),
        e => e,
    })?;
    match file {
        CaseloadFile::Outcome(o) => o.result.caseload.totals_for(inst),
        CaseloadFile::Caseload(c) => c.totals_for(inst),
        CaseloadFile::Totals(m) => {
            for (k, v) in &m {
                if inst.group_index(k).is_none() {
                    return Err(Error::validation(format!("/{k}"), "unknown patient group"));
                }
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::validation(format!("/{k}"), "must be nonnegative"));
                }
            }
            Ok(inst
                .groups
                .iter()
                .map(|g| m.get(&g.id).copied().unwrap_or(0.0))
                .collect())
        }
    }
}

pub fn load_caseload_totals(path: impl AsRef<Path>, inst: &HospitalInstance) -> Result<Vec<f64>, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    caseload_totals_from_str(&text, &path.display().to_string(), inst)
}
