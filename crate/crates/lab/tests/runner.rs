use std::path::Path;

use feller_lab::config::{parse_config_str, ExperimentConfig, Overrides};
use feller_lab::run::{crosscheck, output_hashes, run_experiment, CrosscheckOutput, ReachabilityOutput, Status};
use feller_lab::schema::{bundle_text, document_for_file, documents, SHIPPED_SCHEMA};
use serde_json::Value;

fn config(text: &str, out: &Path) -> ExperimentConfig {
    parse_config_str(text).unwrap().resolve(&Overrides {
        seed: None,
        out: Some(out.to_path_buf()),
    })
}

const CHAIN: &str = r#"{
    "master_seed": 42,
    "model": {"kind": "chain", "rows": [[0.9, 0.1], [0.2, 0.8]]},
    "sim": {"n_paths": 20000},
    "experiments": [
        {"kind": "oracle_crosscheck", "z": 0, "eps": 0.5, "t_grid": [1, 2, 5, 10]},
        {"kind": "chain_oracle", "z": 0, "eps": 0.5, "t_grid": [1, 5]},
        {"kind": "tv_defect", "z": 0, "x_grid": [1], "t_grid": [1, 2, 4, 8]},
        {"kind": "c4", "z": 0, "eps": 0.5, "x_grid": [0, 1], "t_grid": [2, 4, 6, 8], "n_paths": 2000}
    ]
}"#;

const POISSON: &str = r#"{
    "master_seed": 3,
    "model": {"kind": "poisson_cubic", "a": 1, "b": 1,
              "sigma": {"kind": "sinusoidal", "c0": 1, "c1": 0.25}, "m": 0.75, "M": 1.25},
    "sim": {"n_paths": 300},
    "experiments": [
        {"kind": "defect", "z": 1, "test": {"eps": 0.5}, "x_grid": [1.1, 1.3], "t_grid": [1, 2]},
        {"kind": "tv_defect", "z": 1, "x_grid": [1.3], "t_grid": [1, 2],
         "bins": {"min": -3, "max": 3, "count": 12}},
        {"kind": "c1c2", "z": 1, "eps": 0.5, "x_grid": [0, 2], "t_grid": [1, 2, 3]},
        {"kind": "coupling_bounds", "x": 1.5, "y": 1.0, "lambda": 2, "t_grid": [0.5, 1, 2]},
        {"kind": "moment_decay", "x": 5, "t_grid": [0.5, 1, 5]},
        {"name": "reach", "kind": "reachability", "delta": 0.1, "eps": 0.5, "r": 3, "n_paths": 200}
    ]
}"#;

const REACH: &str = r#"{
    "master_seed": 1,
    "model": {"kind": "poisson_cubic", "a": 1, "b": 1,
              "sigma": {"kind": "sinusoidal", "c0": 0.875, "c1": 0.3}, "m": 0.5, "M": 1.25},
    "experiments": [{"kind": "reachability", "delta": 0.1, "eps": 0.5, "r": 3}]
}"#;

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn chain_crosscheck_is_within_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(CHAIN, dir.path());
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.experiments);
    let cc = &m.experiments[0];
    assert!(cc.files.iter().any(|f| f.path.ends_with("crosscheck.json")));
    assert!(cc.files.iter().any(|f| f.path.ends_with("crosscheck.csv")));
    let out: CrosscheckOutput = serde_json::from_value(read_json(&dir.path().join("00_oracle_crosscheck/crosscheck.json"))).unwrap();
    assert!(out.all_within, "{:?}", out.rows);
    assert_eq!(out.rows.len(), 2 * 4);
    assert!(out.invariant_max_error.unwrap() < 0.01);
    let csv = std::fs::read_to_string(dir.path().join("00_oracle_crosscheck/crosscheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    // Chain oracle verdicts land in the manifest.
    assert_eq!(m.experiments[1].verdicts.len(), 3);
}

#[test]
fn crosscheck_detects_a_wrong_chain() {
    // Estimates from one chain against exact values of another.
    let good = feller_core::chain_oracle::FiniteChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let out = crosscheck(&good, 0, 0.5, &[1, 2], 5000, 0.99, 1).unwrap();
    assert!(out.all_within);
    for r in &out.rows {
        assert!(r.ci_low <= r.exact && r.exact <= r.ci_high);
    }
}

#[test]
fn reachability_schedule_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(REACH, dir.path())).unwrap();
    assert!(m.succeeded());
    let f = &m.experiments[0].files;
    assert!(f.iter().any(|f| f.path == "00_reachability/schedule.json"));
    let out: ReachabilityOutput = serde_json::from_value(read_json(&dir.path().join("00_reachability/schedule.json"))).unwrap();
    assert_eq!(out.schedule.n, 5);
    assert!(out.empirical.is_empty());
}

#[test]
fn poisson_suite_rows_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(POISSON, dir.path())).unwrap();
    assert!(m.succeeded(), "{:?}", m.experiments.iter().map(|e| &e.error).collect::<Vec<_>>());
    let root = dir.path();
    let lines = |p: &str| std::fs::read_to_string(root.join(p)).unwrap().lines().map(str::to_string).collect::<Vec<_>>();

    let d = lines("00_defect/defect.csv");
    assert_eq!(d[0], "x,t,defect,ci_low,ci_high");
    assert_eq!(d.len(), 1 + 2 * 2);
    assert_eq!(lines("00_defect/defect_curve_00.csv").len(), 1 + 2);
    assert_eq!(lines("01_tv_defect/tv_defect.csv").len(), 1 + 2);
    assert_eq!(lines("02_c1c2/c1.csv").len(), 1 + 2 * 3);
    // The return condition is only evaluated from z.
    assert_eq!(lines("02_c1c2/c2.csv").len(), 1 + 3);

    let c = lines("03_coupling_bounds/coupling.csv");
    assert!(c[0].starts_with("t,e_z2,se_z2,bound_z2"), "{}", c[0]);
    assert_eq!(c.len(), 1 + 3);
    assert_eq!(lines("03_coupling_bounds/coupling_z2.csv")[0], "t,value,se,bound");

    let mo = lines("04_moment_decay/moment.csv");
    assert_eq!(mo.len(), 1 + 3);
    let r = lines("reach/empirical.csv");
    assert_eq!(r[0], "case,x,t,estimate,se,bound,ok");
    assert_eq!(r.len(), 1 + 3 * 3);

    // Every file the manifest lists exists with the recorded hash and size.
    for e in &m.experiments {
        assert_eq!(e.status, Status::Ok);
        for f in &e.files {
            let bytes = std::fs::read(root.join(&f.path)).unwrap();
            assert_eq!(bytes.len() as u64, f.bytes);
            assert_eq!(feller_lab::emit::sha256_hex(&bytes), f.sha256);
            if let Some(rows) = f.rows {
                assert_eq!(bytes.iter().filter(|b| **b == b'\n').count() as u64, rows + 1);
            }
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_experiment(&config(POISSON, a.path())).unwrap();
    let mb = run_experiment(&config(POISSON, b.path())).unwrap();
    let (ha, hb) = (output_hashes(a.path(), &ma), output_hashes(b.path(), &mb));
    // The resolved configs differ only in output_dir.
    let strip = |v: Vec<(String, String)>| v.into_iter().filter(|(p, _)| p != "config.resolved.json").collect::<Vec<_>>();
    assert_eq!(strip(ha.clone()), strip(hb));
    assert!(ha.len() > 20);

    let c = tempfile::tempdir().unwrap();
    let mut other = config(POISSON, c.path());
    other.master_seed = Some(4);
    let mc = run_experiment(&other).unwrap();
    assert_ne!(strip(ha), strip(output_hashes(c.path(), &mc)));
}

#[test]
fn config_hash_matches_resolved_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(REACH, dir.path())).unwrap();
    let bytes = std::fs::read(dir.path().join(&m.config_file)).unwrap();
    assert_eq!(feller_lab::emit::sha256_hex(&bytes), m.config_sha256);
    // The resolved config parses back to itself.
    let back = parse_config_str(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(back, config(REACH, dir.path()));
}

#[test]
fn operational_errors_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHAIN.replace(r#"{"kind": "chain_oracle""#, r#"{"name": "blocked", "kind": "chain_oracle""#);
    std::fs::write(dir.path().join("blocked"), "x").unwrap();
    let m = run_experiment(&config(&text, dir.path())).unwrap();
    assert!(!m.succeeded());
    assert_eq!(m.experiments[0].status, Status::Ok);
    assert_eq!(m.experiments[1].status, Status::Error);
    assert!(m.experiments[1].files.is_empty());
    // Later experiments still run.
    assert_eq!(m.experiments[2].status, Status::Ok);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn shipped_schema_is_current() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(SHIPPED_SCHEMA);
    let shipped = std::fs::read_to_string(&path).unwrap();
    assert_eq!(shipped, bundle_text(), "regenerate with `feller schema --print > {SHIPPED_SCHEMA}`");
}

#[test]
fn emitted_json_validates_against_schema() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(POISSON, dir.path())).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    run_experiment(&config(CHAIN, dir2.path())).unwrap();
    let validators: Vec<(&str, jsonschema::Validator)> = documents()
        .into_iter()
        .map(|(k, s)| (k, jsonschema::validator_for(&s).unwrap()))
        .collect();
    let mut checked = std::collections::BTreeSet::new();
    for root in [dir.path(), dir2.path()] {
        for entry in walk(root) {
            let name = entry.file_name().unwrap().to_str().unwrap().to_string();
            if !name.ends_with(".json") {
                continue;
            }
            let kind = document_for_file(&name).unwrap_or_else(|| panic!("no schema for {name}"));
            let v = &validators.iter().find(|(k, _)| *k == kind).unwrap().1;
            let doc = read_json(&entry);
            let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{}: {errors:?}", entry.display());
            checked.insert(kind);
        }
    }
    assert_eq!(checked.len(), documents().len());
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn unwritable_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(run_experiment(&config(REACH, &blocker.join("out"))).is_err());
}
