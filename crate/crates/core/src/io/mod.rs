//! Serialization of instances, utility configurations and reports.

mod caseload;
mod instance;
pub mod report;
mod uf_config;

pub use caseload::{caseload_totals_from_str, load_caseload_totals};
pub use instance::{bundled_case_study, bundled_toy, instance_from_str, load_instance, save_instance};
pub use report::{write_bounds, write_json, write_pareto, write_result, write_sweep_csv, Format};
pub use uf_config::{load_uf_config, save_uf_config, UfConfig, UfEntry, UF_CONFIG_SCHEMA_VERSION};
