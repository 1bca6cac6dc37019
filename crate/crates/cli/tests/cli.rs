use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn aagen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aagen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn f(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

#[test]
fn generate_writes_both_profiles() {
    let out = tempfile::tempdir().unwrap();
    let o = aagen(&[
        "generate",
        "--session",
        &f("sessions/phpmailer-train/manifest.json"),
        "--mode",
        "3",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = fs::read_to_string(out.path().join("container.profile")).unwrap();
    let h = fs::read_to_string(out.path().join("host.profile")).unwrap();
    assert_eq!(
        c,
        fs::read_to_string(f("profiles/generated/lic-sec-phpmailer/container.profile")).unwrap()
    );
    assert!(h.starts_with("profile docker-host {"));
    assert!(stdout(&o).contains("deny-shell: added"));
}

#[test]
fn compat_flag_and_base_profile() {
    let out = tempfile::tempdir().unwrap();
    let o = aagen(&[
        "--docker-sec-compat",
        "generate",
        "--session",
        &f("sessions/dind-train/manifest.json"),
        "--base-container",
        &f("profiles/docker-default.profile"),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let c = fs::read_to_string(out.path().join("container.profile")).unwrap();
    assert_eq!(
        c,
        fs::read_to_string(f("profiles/generated/docker-sec-dind/container.profile")).unwrap()
    );
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = aagen(&[
            "generate",
            "--session",
            &f("sessions/db2-train/manifest.json"),
            "--mode",
            "1",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    for name in ["container.profile", "host.profile"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn missing_marker_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("sessions/phpmailer-train");
    fs::copy(src.join("trace.tsv"), dir.path().join("trace.tsv")).unwrap();
    fs::copy(src.join("audit.log"), dir.path().join("audit.log")).unwrap();
    fs::write(
        dir.path().join("manifest.json"),
        r#"{"trace":"trace.tsv","audit":"audit.log","markers":[{"event":"train_start","index":16}]}"#,
    )
    .unwrap();
    let m = dir.path().join("manifest.json");
    let o = aagen(&["generate", "--session", m.to_str().unwrap(), "--mode", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("daemon_start"));
}

#[test]
fn malformed_trace_exits_3_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("sessions/phpmailer-train");
    let mut trace = fs::read_to_string(src.join("trace.tsv")).unwrap();
    trace.push_str("not a trace line\n");
    fs::write(dir.path().join("trace.tsv"), trace).unwrap();
    fs::copy(src.join("audit.log"), dir.path().join("audit.log")).unwrap();
    fs::write(
        dir.path().join("manifest.json"),
        r#"{"trace":"trace.tsv","audit":"audit.log","markers":[{"event":"container_start","index":10}]}"#,
    )
    .unwrap();
    let m = dir.path().join("manifest.json");
    let out = dir.path().join("out");
    let args = [
        "generate",
        "--session",
        m.to_str().unwrap(),
        "--mode",
        "2",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&aagen(&args)), 3);
    let mut lenient = vec!["--lenient"];
    lenient.extend(args);
    assert_eq!(code(&aagen(&lenient)), 0);
}

#[test]
fn bad_mode_is_usage_error() {
    let o = aagen(&[
        "generate",
        "--session",
        &f("sessions/phpmailer-train/manifest.json"),
        "--mode",
        "7",
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&aagen(&["frobnicate"])), 2);
}

#[test]
fn evaluate_matrix_text_and_json() {
    let o = aagen(&[
        "evaluate",
        "--scenarios",
        &f("scenarios/kernel"),
        "--profile-sets",
        &f("profiles/profile-sets.json"),
        "--labels",
        "docker-sec-dind,lic-sec-dind",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(
        v["labels"],
        serde_json::json!(["docker-sec-dind", "lic-sec-dind"])
    );
    let mut priv_blocked = [0, 0];
    for row in v["rows"].as_array().unwrap() {
        if row["class"]["impact"] == "gain_privilege" {
            priv_blocked[0] += row["cells"]["docker-sec-dind"]["blocked"].as_u64().unwrap();
            priv_blocked[1] += row["cells"]["lic-sec-dind"]["blocked"].as_u64().unwrap();
        }
    }
    assert_eq!(priv_blocked, [0, 8]);

    let o = aagen(&[
        "evaluate",
        "--scenarios",
        &f("scenarios/kernel"),
        "--profile-sets",
        &f("profiles/profile-sets.json"),
    ]);
    assert!(stdout(&o).contains("Kernel / Gain Privilege (Container Escape)"));
}

#[test]
fn evaluate_unknown_label_exits_2() {
    let o = aagen(&[
        "evaluate",
        "--scenarios",
        &f("scenarios/kernel"),
        "--profile-sets",
        &f("profiles/profile-sets.json"),
        "--labels",
        "nope",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_empty_dir_and_malformed_scenario() {
    let empty = tempfile::tempdir().unwrap();
    let sets = f("profiles/profile-sets.json");
    let o = aagen(&[
        "evaluate",
        "--scenarios",
        empty.path().to_str().unwrap(),
        "--profile-sets",
        &sets,
    ]);
    assert_eq!(code(&o), 0);

    let bad = tempfile::tempdir().unwrap();
    fs::write(bad.path().join("x.json"), "{\"id\": 1}").unwrap();
    let o = aagen(&[
        "evaluate",
        "--scenarios",
        bad.path().to_str().unwrap(),
        "--profile-sets",
        &sets,
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_exit_codes() {
    let lic = f("profiles/generated/lic-sec-dind/container.profile");
    let o = aagen(&["simulate", "--profile", &lic, "exec:/bin/sh"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("deny: explicit deny (deny /bin/sh mrwklx)"));

    let o = aagen(&["simulate", "--profile", &lic, "capability:sys_admin"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("matched (capability sys_admin)"));

    let o = aagen(&["simulate", "--profile", "unconfined", "exec:/bin/sh"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("unconfined"));

    let o = aagen(&["simulate", "--profile", &lic, "teleport:/x"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_matched_capability() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.profile");
    fs::write(&p, "profile t {\n  capability net_raw,\n}\n").unwrap();
    let o = aagen(&[
        "simulate",
        "--profile",
        p.to_str().unwrap(),
        "capability:net_raw",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "allow: matched (capability net_raw)");
}

#[test]
fn classify_report_and_invariant() {
    let o = aagen(&[
        "classify",
        &f("scenarios/kernel"),
        &f("scenarios/userspace"),
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let row = text
        .lines()
        .find(|l| l.starts_with("Gain Privilege (Inside Container)"))
        .unwrap();
    assert!(row.trim_end().ends_with('4'));

    let bad = tempfile::tempdir().unwrap();
    fs::write(
        bad.path().join("x.json"),
        r#"{"id":"x","target":"kernel","category":"dos","effective_range":"container_escape","steps":[]}"#,
    )
    .unwrap();
    assert_eq!(code(&aagen(&["classify", bad.path().to_str().unwrap()])), 3);
}

#[test]
fn session_inspection() {
    let o = aagen(&["session", &f("sessions/phpmailer-train/manifest.json")]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("marker train_start at record 16 (audit 2)"));
    assert!(text.contains("mode 3: records 16..30"));
}
