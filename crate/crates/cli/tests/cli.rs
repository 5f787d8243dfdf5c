use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_abstraction"));
    c.env_remove("ABSTRACTION_OUT");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(kind: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(kind)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn solve_boltzmann_recovers_unit_multiplier() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run("solve", &config("solve_boltzmann.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("report.json"));
    // target e^-1/(1+e^-1) makes λ = 1 exactly
    let lambda = r["result"]["solution"]["multipliers"][0].as_f64().unwrap();
    assert!((lambda - 1.0).abs() < 1e-6, "λ = {lambda}");
    let csv = fs::read_to_string(out.join("distribution.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "ground");
    let p: f64 = row[1].parse().unwrap();
    assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-9);
}

#[test]
fn eval_fixed_point_has_zero_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run("eval", &config("eval_fixed_point.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let total = read_json(&out.join("report.json"))["result"]["loss"]["total"].as_f64().unwrap();
    assert!(total.abs() < 1e-8, "loss {total}");
}

#[test]
fn malformed_config_writes_only_error_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"system":{"weights":[0.5,0.6]},"abstraction":{"features":[{"kind":"indicator","state":0}]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("run");
    let o = run("eval", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(listing(&out), vec!["error.json"]);
    let e = read_json(&out.join("error.json"));
    assert_eq!(e["error"], "config_invalid");
    assert!(e["diagnostics"][0].as_str().unwrap().contains("system.weights"));
}

#[test]
fn unparsable_and_missing_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("broken.json");
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(run("solve", &cfg, &tmp.path().join("a"), &[]).status.code(), Some(2));
    let missing = tmp.path().join("nowhere.json");
    let o = run("solve", &missing, &tmp.path().join("b"), &[]);
    assert_eq!(o.status.code(), Some(6));
    assert_eq!(listing(&tmp.path().join("b")), vec!["error.json"]);
}

#[test]
fn module_errors_map_to_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let infeasible = tmp.path().join("infeasible.json");
    fs::write(
        &infeasible,
        r#"{"system":{"n_states":2},"constraints":{"features":[{"kind":"table","name":"E","values":[0,1]}],"targets":[1.5]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("inf");
    let o = run("solve", &infeasible, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(listing(&out), vec!["error.json", "manifest.json"]);
    assert_eq!(read_json(&out.join("error.json"))["error"], "infeasible_constraints");

    let starved = tmp.path().join("starved.json");
    fs::write(
        &starved,
        r#"{"system":{"n_states":3},"solver":{"max_iters":1},
            "constraints":{"features":[{"kind":"table","name":"E","values":[0,1,3]}],"targets":[0.3]}}"#,
    )
    .unwrap();
    assert_eq!(run("solve", &starved, &tmp.path().join("nc"), &[]).status.code(), Some(4));

    let too_big = tmp.path().join("big.json");
    fs::write(
        &too_big,
        r#"{"system":{"weights":[0.125,0.125,0.125,0.125,0.125,0.125,0.25]},"mi":{"infomax_alphabet":2}}"#,
    )
    .unwrap();
    let out = tmp.path().join("big");
    assert_eq!(run("mi", &too_big, &out, &[]).status.code(), Some(5));
    assert_eq!(read_json(&out.join("error.json"))["error"], "enumeration_too_large");
}

#[test]
fn identical_config_and_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["learn_targets.json", "abstractability_bimodal.json", "dynamics_two_state.json"] {
        let kind = name.split('_').next().unwrap();
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        for dir in [&a, &b] {
            let o = run(kind, &config(name), dir, &["--seed", "11"]);
            assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        }
        for file in listing(&a) {
            if file == "manifest.json" {
                continue;
            }
            assert_eq!(fs::read(a.join(&file)).unwrap(), fs::read(b.join(&file)).unwrap(), "{name}/{file}");
        }
        assert_eq!(read_json(&a.join("report.json"))["seed"], 11);
    }
}

#[test]
fn manifest_lists_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    for (kind, name) in [
        ("solve", "solve_boltzmann.json"),
        ("eval", "eval_fixed_point.json"),
        ("learn", "learn_targets.json"),
        ("dynamics", "dynamics_two_state.json"),
        ("abstractability", "abstractability_bimodal.json"),
        ("mi", "mi_checks.json"),
    ] {
        let out = tmp.path().join(kind);
        let cfg = config(name);
        let o = run(kind, &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        let m = read_json(&out.join("manifest.json"));
        let mut listed: Vec<String> = m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f["path"].as_str().unwrap().to_string())
            .collect();
        listed.push("manifest.json".into());
        listed.sort();
        assert_eq!(listed, listing(&out), "{kind}");
        for f in m["outputs"].as_array().unwrap() {
            let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
            assert_eq!(f["sha256"], abstraction_cli::run::sha256_hex(&bytes));
        }
        let cfg_bytes = fs::read(&cfg).unwrap();
        assert_eq!(m["config_hash"], abstraction_cli::run::sha256_hex(&cfg_bytes));
        assert_eq!(m["inputs"][0]["sha256"], m["config_hash"]);
        assert_eq!(m["kind"], kind);
        assert_eq!(m["passed"], true);
        assert_eq!(m["tool_version"], env!("CARGO_PKG_VERSION"));
        assert!(m["timestamp"].as_str().unwrap().ends_with('Z'));
    }
}

#[test]
fn abstractability_reads_csv_targets_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,density\n");
    for i in 0..=80 {
        let x = -4.0 + 0.1 * i as f64;
        csv.push_str(&format!("{x},{}\n", (-x * x / 2.0f64).exp()));
    }
    fs::write(tmp.path().join("normal.csv"), csv).unwrap();
    let cfg = tmp.path().join("a.json");
    fs::write(&cfg, r#"{"abstractability":{"target":{"kind":"csv","path":"normal.csv"}}}"#).unwrap();
    let out = tmp.path().join("run");
    let o = run("abstractability", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let score = read_json(&out.join("report.json"))["result"]["report"]["score"].as_f64().unwrap();
    assert!(score < 0.05);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn default_output_root_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .env("ABSTRACTION_OUT", tmp.path())
        .args(["solve", "--config"])
        .arg(config("solve_boltzmann.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let dirs = listing(tmp.path());
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].starts_with("solve-"));
    assert!(tmp.path().join(&dirs[0]).join("report.json").exists());
}

#[test]
fn subcommand_must_match_config_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("eval", &config("solve_boltzmann.json"), &tmp.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_suite_passes_and_detects_injected_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let o = bin().args(["verify", "--profile", "strict", "--out"]).arg(&ok).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 12);
    let r = read_json(&ok.join("report.json"));
    assert_eq!(r["result"]["profile"], "strict");
    for c in r["result"]["checks"].as_array().unwrap() {
        for m in c["metrics"].as_array().unwrap() {
            assert!(m["margin"].as_f64().unwrap() >= 0.0, "{m}");
        }
    }

    let bad = tmp.path().join("bad");
    let o = bin()
        .args(["verify", "--inject-fault", "gaussian-multiplier", "--out"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let fails: Vec<&str> = stdout.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(fails.len(), 1, "{stdout}");
    assert!(fails[0].contains("Gaussian"));
    // partial results are still persisted
    assert!(bad.join("verify.csv").exists());
    assert_eq!(read_json(&bad.join("manifest.json"))["passed"], false);
}

fn schema(name: &str) -> Value {
    read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name))
}

fn keys(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

#[test]
fn published_schemas_match_emitted_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ok");
    assert_eq!(run("solve", &config("solve_boltzmann.json"), &out, &[]).status.code(), Some(0));
    let manifest = schema("run_manifest.schema.json");
    assert_eq!(keys(&read_json(&out.join("manifest.json"))), keys(&manifest["properties"]));
    assert_eq!(keys(&read_json(&out.join("report.json"))), keys(&schema("report.schema.json")["properties"]));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "[]").unwrap();
    let err_dir = tmp.path().join("err");
    run("solve", &bad, &err_dir, &[]);
    let errors = schema("error_report.schema.json");
    let e = read_json(&err_dir.join("error.json"));
    assert_eq!(keys(&e), keys(&errors["properties"]));
    assert!(errors["properties"]["error"]["enum"].as_array().unwrap().contains(&e["error"]));

    // every example config only uses fields the schema documents
    let documented = keys(&schema("experiment_config.schema.json")["properties"]);
    for entry in fs::read_dir(config("")).unwrap() {
        let cfg = read_json(&entry.unwrap().path());
        for k in keys(&cfg) {
            assert!(documented.contains(&k), "{k}");
        }
    }
}
