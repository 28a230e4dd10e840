//! End-to-end runs of the batch driver: determinism across reruns and
//! worker counts, exit codes, fault injection and resume.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_horseshoe")
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        r#"
path = [0]
seed = 7

[family]
lambda_s = 0.284
eps0 = 0.01
nonlinearity = 0.0

[family.fold]
x_c = 0.5
y_c = 0.5
kappa_u = 0.02
kappa_s = 0.02
n0 = 2
tongue_w = 0.25

[constants]
eps0 = 0.01
eta = 0.05
tau = 0.25
beta = 1.3

[budgets]
n_max = 14
width_floor = 1e-6

[truncation]
m_trunc = 6
w_min = 1e-6
base_y = 0.5

[parabolic]
b = 0.05
pc2_factor = 0.5
degree = 16
"#,
    )
    .unwrap();
    path
}

fn run(cfg: &Path, out: &Path, threads: Option<&str>, args: &[&str]) -> std::process::Output {
    let mut cmd = Command::new(bin());
    cmd.arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(args);
    if let Some(t) = threads {
        cmd.env("HORSESHOE_THREADS", t);
    }
    cmd.output().expect("spawn horseshoe")
}

#[test]
fn build_is_deterministic_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let mut dumps = Vec::new();
    for (i, threads) in ["1", "4", "8", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let status = run(&cfg, &out, Some(threads), &["build"]);
        assert!(status.status.success(), "{status:?}");
        let dump = std::fs::read(out.join("class_level1.jsonl")).unwrap();
        let geo = std::fs::read(out.join("geometry.csv")).unwrap();
        dumps.push((dump, geo));
    }
    for w in dumps.windows(2) {
        assert_eq!(w[0].0, w[1].0, "class dumps differ");
        assert_eq!(w[0].1, w[1].1, "geometry differs");
    }
}

#[test]
fn dimension_is_deterministic_and_reports_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "8"].iter().enumerate() {
        let out = tmp.path().join(format!("dim{i}"));
        let status = run(&cfg, &out, Some(threads), &["dimension"]);
        assert!(status.status.success());
        outputs.push(std::fs::read(out.join("dimension.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let doc: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(doc["schema"], "horseshoe/dimension/v1");
    let d = doc["d_s"].as_f64().unwrap();
    let expect = 2f64.ln() / (1.0f64 / 0.284).ln();
    assert!((d - expect).abs() < 1e-3, "d_s = {d}");
}

#[test]
fn verify_passes_clean_and_fails_on_injection() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("verify");
    let res = run(&cfg, &out, None, &["verify", "--pairs", "8"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "horseshoe/verify/v1");
    assert_eq!(report["all_pass"], true);

    let res = run(
        &cfg,
        &out,
        None,
        &[
            "verify",
            "--pairs",
            "4",
            "--inject-fault",
            "determinant_formula",
        ],
    );
    assert_eq!(res.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, vec!["determinant_formula"]);
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "family = 3").unwrap();
    let res = run(&bad, &tmp.path().join("o"), None, &["build"]);
    assert_eq!(res.status.code(), Some(2));
    // Invalid family parameters are config errors too.
    let cfg = write_config(tmp.path());
    let res = Command::new(bin())
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o2"))
        .arg("--lambda-s")
        .arg("0.9")
        .arg("build")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn exponent_and_h4_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("exp");
    let res = run(
        &cfg,
        &out,
        None,
        &["exponents", "--ds", "0.55", "--du", "0.55"],
    );
    assert!(res.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("exponents.json")).unwrap())
            .unwrap();
    assert_eq!(doc["schema"], "horseshoe/exponents/v1");
    assert!((doc["beta_max"].as_f64().unwrap() - 1.38462).abs() < 1e-5);
    assert!((doc["x_cr_exponent"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let res = run(&cfg, &out, None, &["h4-region", "--grid", "12"]);
    assert!(res.status.success());
    let csv = std::fs::read_to_string(out.join("h4_region.csv")).unwrap();
    assert!(csv.lines().count() == 12 * 12 + 1);
    // H4 truth and beta_max > 1 agree on every grid point that has one.
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let h4: u8 = cols[2].parse().unwrap();
        let beta: f64 = cols[3].parse().unwrap();
        if beta.is_finite() {
            assert_eq!(h4 == 1, beta > 1.0, "{line}");
        }
    }
}

#[test]
fn seed_does_not_change_build_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out1 = tmp.path().join("s1");
    let out2 = tmp.path().join("s2");
    assert!(run(&cfg, &out1, None, &["build"]).status.success());
    assert!(Command::new(bin())
        .args(["--config"])
        .arg(&cfg)
        .args(["--seed", "99", "--out"])
        .arg(&out2)
        .arg("build")
        .output()
        .unwrap()
        .status
        .success());
    assert_eq!(
        std::fs::read(out1.join("class_level1.jsonl")).unwrap(),
        std::fs::read(out2.join("class_level1.jsonl")).unwrap()
    );
}

#[test]
fn load_resumes_from_a_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out1 = tmp.path().join("first");
    assert!(run(&cfg, &out1, None, &["build"]).status.success());
    let out2 = tmp.path().join("second");
    let res = Command::new(bin())
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out2)
        .arg("build")
        .arg("--load")
        .arg(out1.join("class_level0.jsonl"))
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(
        std::fs::read(out1.join("class_level1.jsonl")).unwrap(),
        std::fs::read(out2.join("class_level1.jsonl")).unwrap()
    );
}

#[test]
fn tangency_and_geometry_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("dumps");
    assert!(run(&cfg, &out, None, &["dump-tangency", "--grid", "9"])
        .status
        .success());
    let csv = std::fs::read_to_string(out.join("tangency.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9 * 9 + 1);
    assert!(run(&cfg, &out, None, &["dump-geometry"]).status.success());
    let geo = std::fs::read_to_string(out.join("geometry.csv")).unwrap();
    assert!(geo.contains("tongue_u") && geo.contains("rectangle"));

    let res = run(&cfg, &out, None, &["gibbs"]);
    assert!(res.status.success());
    let gibbs = std::fs::read_to_string(out.join("gibbs.csv")).unwrap();
    assert!(gibbs.lines().count() > 10);
}

/// Minimal draft-07 checker covering the constructs the shipped schemas use.
fn validate(doc: &serde_json::Value, schema: &serde_json::Value) -> Result<(), String> {
    if let Some(c) = schema.get("const") {
        if doc != c {
            return Err(format!("expected const {c}, got {doc}"));
        }
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            serde_json::Value::String(s) => vec![s.as_str()],
            serde_json::Value::Array(a) => a.iter().filter_map(|v| v.as_str()).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => doc.is_object(),
            "array" => doc.is_array(),
            "string" => doc.is_string(),
            "number" => doc.is_number(),
            "integer" => doc.is_i64() || doc.is_u64(),
            "boolean" => doc.is_boolean(),
            "null" => doc.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("type mismatch: wanted {types:?}, got {doc}"));
        }
    }
    if let Some(req) = schema.get("required").and_then(|r| r.as_array()) {
        for key in req.iter().filter_map(|k| k.as_str()) {
            if doc.get(key).is_none() {
                return Err(format!("missing required key {key}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(|p| p.as_object()) {
        for (key, sub) in props {
            if let Some(v) = doc.get(key) {
                validate(v, sub).map_err(|e| format!("{key}: {e}"))?;
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = doc.as_array() {
            for (i, v) in arr.iter().enumerate() {
                validate(v, items).map_err(|e| format!("[{i}]: {e}"))?;
            }
        }
    }
    Ok(())
}

#[test]
fn emitted_documents_validate_against_shipped_schemas() {
    let schema_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    let load = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(schema_dir.join(name)).unwrap()).unwrap()
    };
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("schemas");

    assert!(run(&cfg, &out, None, &["verify", "--pairs", "4"]).status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    validate(&doc, &load("verify.schema.json")).unwrap();

    assert!(run(&cfg, &out, None, &["dimension"]).status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dimension.json")).unwrap())
            .unwrap();
    validate(&doc, &load("dimension.schema.json")).unwrap();

    assert!(run(&cfg, &out, None, &["exponents", "--ds", "0.6", "--du", "0.5"])
        .status
        .success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("exponents.json")).unwrap())
            .unwrap();
    validate(&doc, &load("exponents.schema.json")).unwrap();

    assert!(run(&cfg, &out, None, &["build"]).status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("build_summary.json")).unwrap())
            .unwrap();
    validate(&doc, &load("build-summary.schema.json")).unwrap();
    let dump_schema = load("class-dump.schema.json");
    let dump = std::fs::read_to_string(out.join("class_level1.jsonl")).unwrap();
    for line in dump.lines().take(200) {
        let doc: serde_json::Value = serde_json::from_str(line).unwrap();
        validate(&doc, &dump_schema).unwrap();
    }
}
