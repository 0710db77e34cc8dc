use std::process::Command;

fn feller() -> Command {
    Command::new(env!("CARGO_BIN_EXE_feller"))
}

const GOOD: &str = r#"{
    "model": {"kind": "chain", "rows": [[0.9, 0.1], [0.2, 0.8]]},
    "experiments": [{"kind": "chain_oracle", "z": 0, "eps": 0.5, "t_grid": [1, 2]}]
}"#;

#[test]
fn run_with_seed_override_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, GOOD).unwrap();
    // No master_seed in the file: validation fails without the override.
    let o = feller().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("master_seed"));

    let out = dir.path().join("env-out");
    let o = feller()
        .args(["run", "--seed", "9", "--threads", "2", "--config"])
        .arg(&cfg)
        .env("FELLER_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 9);
    assert!(out.join("00_chain_oracle/oracle.json").exists());
}

#[test]
fn failed_experiment_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, GOOD.replace("\"model\"", "\"master_seed\": 1, \"model\"")).unwrap();
    let out = dir.path().join("o");
    std::fs::create_dir_all(&out).unwrap();
    // A plain file where the experiment directory should go.
    std::fs::write(out.join("00_chain_oracle"), "x").unwrap();
    let o = feller().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ERROR"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn validate_reports_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, GOOD.replace("\"model\"", "\"master_seed\": 1, \"colour\": 2, \"model\"")).unwrap();
    let o = feller().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn validate_echoes_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, GOOD.replace("\"model\"", "\"master_seed\": 1, \"model\"")).unwrap();
    let o = feller().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sim"]["n_paths"], 10000);
    assert_eq!(v["formats"], serde_json::json!(["json", "csv", "plot"]));
}

#[test]
fn schema_print_is_json() {
    let o = feller().args(["schema", "--print"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["documents"]["config"].is_object());
    assert!(v["documents"]["manifest"].is_object());
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            let o = feller().args(["validate", "--config"]).arg(&p).output().unwrap();
            assert!(o.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"master_seed": 5,
            "model": {"kind": "poisson_cubic", "a": 1, "b": 1, "sigma": {"kind": "constant", "c": 1},
                      "m": 0.5, "M": 1.5},
            "sim": {"n_paths": 3000},
            "experiments": [
                {"kind": "defect", "z": 1, "test": {"eps": 0.5}, "x_grid": [0.5, 1.5], "t_grid": [1, 2]},
                {"kind": "c4", "z": 1, "eps": 0.5, "x_grid": [-1, 2], "t_grid": [2, 4]}
            ]}"#,
    )
    .unwrap();
    let read = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = feller()
            .args(["run", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success());
        ["00_defect/defect.csv", "00_defect/defect.json", "01_c4/c4.csv", "01_c4/c4.json"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(read("1"), read("4"));
}
