//! Versioned JSON schema for every document the runner writes.

use feller_core::coupling::CouplingDiagnostics;
use feller_core::criteria::{CriterionReport, MomentDecayFit};
use schemars::schema_for;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, CONFIG_SCHEMA_VERSION};
use crate::run::{CrosscheckOutput, OracleOutput, ReachabilityOutput, RunManifest, MANIFEST_FILE, RESOLVED_CONFIG_FILE};

/// Repository path of the shipped schema, relative to this crate.
pub const SHIPPED_SCHEMA: &str = "schema/feller.schema.json";

/// Schema of each document kind, keyed by name.
pub fn documents() -> Vec<(&'static str, Value)> {
    let v = |s: schemars::Schema| s.to_value();
    vec![
        ("config", v(schema_for!(ExperimentConfig))),
        ("manifest", v(schema_for!(RunManifest))),
        ("criterion_report", v(schema_for!(CriterionReport))),
        ("coupling", v(schema_for!(CouplingDiagnostics))),
        ("reachability", v(schema_for!(ReachabilityOutput))),
        ("moment_decay", v(schema_for!(MomentDecayFit))),
        ("chain_oracle", v(schema_for!(OracleOutput))),
        ("oracle_crosscheck", v(schema_for!(CrosscheckOutput))),
    ]
}

/// All document schemas in one JSON object.
pub fn bundle() -> Value {
    let docs: Map<String, Value> = documents().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    json!({
        "title": "feller output schemas",
        "schema_version": CONFIG_SCHEMA_VERSION,
        "documents": docs,
    })
}

pub fn bundle_text() -> String {
    let mut s = serde_json::to_string_pretty(&bundle()).expect("schema serializes");
    s.push('\n');
    s
}

/// Document kind of an emitted JSON file, by file name.
pub fn document_for_file(file_name: &str) -> Option<&'static str> {
    Some(match file_name {
        RESOLVED_CONFIG_FILE => "config",
        MANIFEST_FILE => "manifest",
        "defect.json" | "tv_defect.json" | "c4.json" | "c1.json" | "c2.json" => "criterion_report",
        "coupling.json" => "coupling",
        "schedule.json" => "reachability",
        "moment.json" => "moment_decay",
        "oracle.json" => "chain_oracle",
        "crosscheck.json" => "oracle_crosscheck",
        _ => return None,
    })
}
