//! End-to-end use of the public API on the bundled instances.

use std::sync::Arc;

use casemix_core::engine::SolveMethod;
use casemix_core::io::{
    bundled_case_study, bundled_toy, load_instance, load_uf_config, save_instance, save_uf_config,
    write_result, Format, UfConfig,
};
use casemix_core::sensitivity::{Objective, SweepSpec};
use casemix_core::utility::{Quantity, UfParams};
use casemix_core::{Engine, SimplexBackend, SolveRequest, UfSpec, UfTemplate};
use serde_json::Value;

fn schema(name: &str) -> Value {
    let path = format!("{}/../../docs/schema/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every key of `doc` is declared by `schema` and every required key is present.
fn conforms(doc: &Value, schema: &Value, root: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return conforms(doc, &root["$defs"][name], root, path);
    }
    match doc {
        Value::Object(map) => {
            let props = schema.get("properties").and_then(Value::as_object);
            for req in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
                if !map.contains_key(req.as_str().unwrap()) {
                    return Err(format!("{path}: missing {req}"));
                }
            }
            for (k, v) in map {
                let sub = match props.and_then(|p| p.get(k)) {
                    Some(s) => s,
                    None => match schema.get("additionalProperties") {
                        Some(Value::Bool(false)) | None => return Err(format!("{path}/{k}: not in schema")),
                        Some(s) => s,
                    },
                };
                conforms(v, sub, root, &format!("{path}/{k}"))?;
            }
            Ok(())
        }
        Value::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| conforms(v, &schema["items"], root, &format!("{path}/{i}"))),
        _ => Ok(()),
    }
}

#[test]
fn bundled_instances_follow_the_schema() {
    let s = schema("instance.schema.json");
    for inst in [bundled_case_study(), bundled_toy()] {
        conforms(&serde_json::to_value(&inst).unwrap(), &s, &s, "").unwrap();
    }
}

#[test]
fn uf_config_files_follow_the_schema() {
    let s = schema("uf-config.schema.json");
    let mut cfg = UfConfig::uniform(&UfSpec::with_params(
        UfTemplate::Uf4,
        UfParams {
            indifference: Some(Quantity::Fraction(0.1)),
            aspiration: Some(Quantity::Absolute(900.0)),
            ..Default::default()
        },
    ));
    cfg.groups.insert("CARD".into(), UfConfig::uniform(&UfSpec::new(UfTemplate::Uf1)).default.unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uf.json");
    save_uf_config(&cfg, &path).unwrap();
    let text: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    conforms(&text, &s, &s, "").unwrap();
    assert_eq!(load_uf_config(&path).unwrap(), cfg);
}

#[test]
fn instance_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hospital.json");
    let inst = bundled_case_study();
    save_instance(&inst, &path).unwrap();
    assert_eq!(load_instance(&path).unwrap(), inst);
    assert_eq!(inst.groups.len(), 19);
}

#[test]
fn engine_plans_the_case_study() {
    let engine = Engine::new(bundled_case_study(), Arc::new(SimplexBackend::default())).unwrap();
    let total: f64 = engine.bounds().iter().sum();
    assert!((total - 54077.91).abs() < 0.01, "{total}");

    let out = engine.solve(None, &SolveRequest::default()).unwrap();
    assert!(!out.result.zeroed);
    assert!(out.result.caseload.check(engine.instance()).is_ok());
    let audit = engine.pareto(&out.result.patients()).unwrap();
    assert!(audit.corrected_throughput >= audit.base_throughput - 1e-6);

    let gpm = SolveRequest { method: SolveMethod::Gpm, ..Default::default() };
    let r = engine.solve(None, &gpm).unwrap().result;
    let g = r.goal.clone().unwrap();
    assert_eq!(g.goals, engine.bounds());
    assert!(g.over.iter().all(|&o| o.abs() < 1e-6), "goals at the limits leave no room above");

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    write_result(&r, &csv, Format::Csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 19);
}

#[test]
fn sweep_over_the_toy() {
    let engine = Engine::new(bundled_toy(), Arc::new(SimplexBackend::default())).unwrap();
    let spec = SweepSpec::new(UfTemplate::Uf3, "aspiration", vec![20.0, 40.0, 60.0])
        .with_objectives(vec![Objective::Mmu]);
    let report = engine.sweep(&spec, Some(2)).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows.iter().all(|r| r.error.is_none() && r.summary.is_some()));
    assert_eq!(report.case_mix.len(), 1);
}
