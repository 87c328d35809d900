use std::path::Path;

use crate::model::HospitalInstance;
use crate::Error;

const CASE_STUDY: &str = include_str!("../../data/princess_alexandra.json");
const TOY: &str = include_str!("../../data/toy.json");

/// Parses and validates an instance from JSON text.
pub fn instance_from_str(text: &str, origin: &str) -> Result<HospitalInstance, Error> {
    let inst: HospitalInstance = parse_json(text, origin)?;
    inst.validate()?;
    Ok(inst)
}

/// Deserializes JSON, reporting shape errors with a JSON-pointer path.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, Error> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let source = e.into_inner();
        if path == "." || source.is_syntax() || source.is_eof() {
            Error::Json {
                path: origin.to_string(),
                source,
            }
        } else {
            Error::Validation {
                path: format!("/{}", path.replace('.', "/").replace('[', "/").replace(']', "")),
                message: source.to_string(),
            }
        }
    })?;
    de.end().map_err(|source| Error::Json {
        path: origin.to_string(),
        source,
    })?;
    Ok(value)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<HospitalInstance, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    instance_from_str(&text, &path.display().to_string())
}

pub fn save_instance(inst: &HospitalInstance, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(inst).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The bundled 19-group teaching-hospital instance.
pub fn bundled_case_study() -> HospitalInstance {
    instance_from_str(CASE_STUDY, "princess_alexandra.json").expect("bundled instance is valid")
}

/// Two groups sharing one 100-hour theatre (1 h and 2 h per patient).
pub fn bundled_toy() -> HospitalInstance {
    instance_from_str(TOY, "toy.json").expect("bundled toy is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ResourceKind;

    #[test]
    fn case_study_totals() {
        let inst = bundled_case_study();
        assert_eq!(inst.groups.len(), 19);
        assert_eq!(inst.horizon_weeks, 52);
        let count = |k| inst.resources.iter().filter(|r| r.kind == k).count();
        let beds = |k| -> u32 {
            inst.resources
                .iter()
                .filter(|r| r.kind == k)
                .map(|r| r.bed_count)
                .sum()
        };
        assert_eq!(count(ResourceKind::Theatre), 19);
        assert_eq!(count(ResourceKind::Ward), 22);
        assert_eq!(beds(ResourceKind::Ward), 522);
        assert_eq!(beds(ResourceKind::Icu), 26);
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.json");
        let inst = bundled_case_study();
        save_instance(&inst, &p).unwrap();
        let again = load_instance(&p).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn bad_mix_reports_group_path() {
        let text = TOY.replacen("\"mix_fraction\": 1.0", "\"mix_fraction\": 0.9", 1);
        let e = instance_from_str(&text, "t").unwrap_err().to_string();
        assert!(e.starts_with("/groups/0/subtypes"), "{e}");
    }

    #[test]
    fn missing_field_is_named() {
        let e = instance_from_str(r#"{"resources": [], "groups": []}"#, "t").unwrap_err();
        assert!(e.to_string().contains("horizon_weeks"), "{e}");
    }
}
