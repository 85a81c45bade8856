use std::path::Path;
use std::process::{Command, Output};

fn archforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_archforge"))
        .args(args)
        .env_remove("ARCHFORGE_SUMMARIZER_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Synthesizes the ML training query into `dir` and returns the design path.
fn ml_design(dir: &Path) -> String {
    let out = dir.join("ml.design.json").display().to_string();
    let o = archforge(&["synthesize", "-c", "bundled:dc", "-q", "bundled:ml_training", "--output", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

#[test]
fn validate_empty_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "empty.catalog.json", r#"{"kepler-spec": 1}"#);
    let o = archforge(&["validate", "-c", &c]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 violations"));
}

#[test]
fn validate_reports_violations_with_positions() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "dup.catalog.json",
        "{\n  \"roles\": [\n    {\"id\": \"r\", \"activation_condition\": {\"op\": \"bool\", \"value\": true}},\n    {\"id\": \"r\", \"activation_condition\": {\"op\": \"bool\", \"value\": true}}\n  ]\n}\n",
    );
    let o = archforge(&["validate", "-c", &c]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("dup.catalog.json:4:5") && out.contains("1 violations"), "{out}");
    let o = archforge(&["validate", "-c", &c, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["violations"][0]["code"], "duplicate_id");
}

#[test]
fn parse_errors_and_bad_usage_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "broken.catalog.json", "{\"roles\": [,]}");
    assert_eq!(archforge(&["validate", "-c", &c]).status.code(), Some(2));
    assert_eq!(archforge(&["synthesize", "-q", "bundled:ml_training"]).status.code(), Some(2));
    assert_eq!(archforge(&["synthesize", "-c", "bundled:nope", "-q", "x"]).status.code(), Some(2));
    assert_eq!(archforge(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn synthesize_ml_training_report() {
    let o = archforge(&["synthesize", "-c", "bundled:dc", "-q", "bundled:ml_training"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("** Systems deployed **\nML_Training -\n"), "{out}");
    for line in [
        "cpu_sched role: ZygOS",
        "cca role: DCQCN",
        "virtual_switch role: ANDROMEDA",
        "transport role: RDMA",
        "load_balancer role: PLB",
        "Monitor role: Sonata",
    ] {
        assert!(out.contains(line), "missing {line:?} in\n{out}");
    }
    assert!(out.contains("** Hardware assignments **") && out.contains("Total cost = "));
}

#[test]
fn output_is_deterministic_and_canonical() {
    let args = ["synthesize", "-c", "bundled:dc", "-q", "bundled:inference", "--format", "json", "--seed", "7"];
    let a = archforge(&args);
    let b = archforge(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inf.design.json");
    let mut with_out = args.to_vec();
    let p = out.display().to_string();
    with_out.extend(["--output", &p]);
    let c = archforge(&with_out);
    assert_eq!(std::fs::read(&out).unwrap(), c.stdout);
    assert_eq!(c.stdout, a.stdout);
}

#[test]
fn infeasible_query_exits_1_with_core() {
    let dir = tempfile::tempdir().unwrap();
    let mut q: serde_json::Value =
        serde_json::from_str(archforge_core_query("ml_training").as_str()).unwrap();
    q["excluded_systems"] = serde_json::json!(["PLB", "PacketSpray", "CONGA", "ECMP"]);
    let path = write(dir.path(), "no_lb.query.json", &q.to_string());
    let o = archforge(&["synthesize", "-c", "bundled:dc", "-q", &path]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("** No feasible design **"));
    let o = archforge(&["synthesize", "-c", "bundled:dc", "-q", &path, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "INFEASIBLE");
    assert!(!v["core"].as_array().unwrap().is_empty());
}

fn archforge_core_query(name: &str) -> String {
    let o = archforge(&["catalog", "list", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["queries"].as_array().unwrap().iter().any(|q| q == &format!("bundled:{name}")));
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/data/query_{name}.json")),
    )
    .unwrap()
}

#[test]
fn zero_budget_times_out_with_exit_3() {
    let o = archforge(&["synthesize", "-c", "bundled:dc", "-q", "bundled:inference", "--budget-seconds", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn check_accepts_synthesized_and_rejects_edited_designs() {
    let dir = tempfile::tempdir().unwrap();
    let design = ml_design(dir.path());
    let o = archforge(&["check", "-c", "bundled:dc", "-q", "bundled:ml_training", "--design", &design]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let edited = std::fs::read_to_string(&design).unwrap().replace("\"PLB\"", "\"PacketSpray\"");
    let bad = write(dir.path(), "edited.design.json", &edited);
    let o = archforge(&["check", "-c", "bundled:dc", "-q", "bundled:ml_training", "--design", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("PacketSpray"), "{}", stdout(&o));
}

#[test]
fn explain_conflict_exits_1_with_table() {
    let dir = tempfile::tempdir().unwrap();
    let design = ml_design(dir.path());
    let base = [
        "explain", "-c", "bundled:dc", "-q", "bundled:ml_training", "--design", &design, "--workload", "ML_Training",
        "--role", "load_balancer", "--prefer", "PacketSpray",
    ];
    let o = archforge(&base);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("Why PacketSpray is not selected"), "{out}");
    for row in ["\nRDMA: ", "\nPacketSpray: ", "\nHardware: ", "\nResult: RDMA ∧ PacketSpray is unsatisfiable"] {
        assert!(out.contains(row), "missing {row:?} in\n{out}");
    }

    let mut flex = base.to_vec();
    flex.extend(["--flex", "transport", "--format", "json"]);
    let o = archforge(&flex);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["outcome"]["kind"], "ALTERNATIVE");

    let mut same = base.to_vec();
    same[12] = "PLB";
    let o = archforge(&same);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn explain_rejects_unknown_flexible_entries() {
    let dir = tempfile::tempdir().unwrap();
    let design = ml_design(dir.path());
    let o = archforge(&[
        "explain", "-c", "bundled:dc", "-q", "bundled:ml_training", "--design", &design, "--workload", "ML_Training",
        "--role", "load_balancer", "--prefer", "PacketSpray", "--flex", "warp_drive",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warp_drive"));
}

#[test]
fn summarizer_failure_falls_back_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let design = ml_design(dir.path());
    let args = [
        "explain", "-c", "bundled:dc", "-q", "bundled:ml_training", "--design", &design, "--workload", "ML_Training",
        "--role", "load_balancer", "--prefer", "PacketSpray",
    ];
    let plain = archforge(&args);
    let mut with = args.to_vec();
    with.push("--summarizer");
    let o = Command::new(env!("CARGO_BIN_EXE_archforge"))
        .args(&with)
        .env("ARCHFORGE_SUMMARIZER_URL", "http://127.0.0.1:9/")
        .env("ARCHFORGE_SUMMARIZER_TOKEN", "t")
        .output()
        .unwrap();
    assert_eq!(o.stdout, plain.stdout);
    assert!(stderr(&o).contains("summarizer unavailable"), "{}", stderr(&o));
}

#[test]
fn catalog_list_and_show() {
    let o = archforge(&["catalog", "list", "-c", "bundled:dc"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("** Systems (") && out.contains("PacketSpray [load_balancer]"), "{out}");
    let o = archforge(&["catalog", "show", "TofinoV1Switch", "-c", "bundled:dc"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["id"], "TofinoV1Switch");
    assert_eq!(archforge(&["catalog", "show", "Nope", "-c", "bundled:dc"]).status.code(), Some(1));
}
