use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn dptqfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dptqfi")).args(args).current_dir(root()).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn without_timestamp(s: &str) -> String {
    s.lines().filter(|l| !l.starts_with("# generated_unix:")).collect::<Vec<_>>().join("\n")
}

fn result_value(csv: &str, key: &str) -> f64 {
    let prefix = format!("# result.{key}: ");
    let line = csv.lines().find(|l| l.starts_with(&prefix)).unwrap_or_else(|| panic!("no {key}"));
    line[prefix.len()..].parse().unwrap()
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dptqfi-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn golden_outputs_regenerate_identically() {
    let manifest = std::fs::read_to_string(root().join("golden/manifest.tsv")).unwrap();
    let mut checked = 0;
    for line in manifest.lines().filter(|l| !l.trim().is_empty()) {
        let (name, command) = line.split_once('\t').unwrap();
        let config = format!("golden/configs/{name}.json");
        let out = dptqfi(&[command, "--config", &config]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        let expected = std::fs::read_to_string(root().join(format!("golden/{name}.csv"))).unwrap();
        assert_eq!(without_timestamp(&stdout(&out)), without_timestamp(&expected), "{name} drifted from its golden CSV");
        checked += 1;
    }
    assert!(checked >= 9);
}

#[test]
fn thread_count_does_not_change_output() {
    let one = dptqfi(&["traj", "--config", "golden/configs/blockcat_traj.json", "--threads", "1"]);
    let many = dptqfi(&["traj", "--config", "golden/configs/blockcat_traj.json", "--threads", "4"]);
    assert!(one.status.success() && many.status.success());
    assert_eq!(without_timestamp(&stdout(&one)), without_timestamp(&stdout(&many)));
    let q1 = dptqfi(&["qfi", "--config", "golden/configs/blockcat_qfi.json", "--threads", "1"]);
    let q4 = dptqfi(&["qfi", "--config", "golden/configs/blockcat_qfi.json", "--threads", "3"]);
    assert_eq!(without_timestamp(&stdout(&q1)), without_timestamp(&stdout(&q4)));
}

#[test]
fn timestamp_is_a_single_header_line() {
    let out = dptqfi(&["spectrum"]);
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.contains("generated_unix")).count(), 1);
    assert!(text.lines().any(|l| l.starts_with("# config_sha256: ")));
    assert!(text.lines().any(|l| l.starts_with("# tolerance.stencil.h: ")));
}

#[test]
fn empty_time_grid_is_a_config_error() {
    let out = dptqfi(&["qfi", "--t", "1:100:0:log"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));
    assert_eq!(dptqfi(&["qfi", "--t", "5:1:3"]).status.code(), Some(2));
    assert_eq!(dptqfi(&["qfi"]).status.code(), Some(2));
}

#[test]
fn malformed_configs_are_config_errors() {
    let unknown = write_config("unknown.json", r#"{"model": {"kind": "builtin", "name": "blockcat"}, "colour": 1}"#);
    assert_eq!(dptqfi(&["spectrum", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));
    let bad_chi = write_config("chi.json", r#"{"model": {"kind": "builtin", "name": "damping"}, "chi": [[1,0],[1,0]]}"#);
    let out = dptqfi(&["phases", "--config", bad_chi.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("normalized"));
    let bad_param = write_config("param.json", r#"{"model": {"kind": "builtin", "name": "rabi", "parameters": {"omegaa": 1}}}"#);
    assert_eq!(dptqfi(&["spectrum", "--config", bad_param.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn nearly_normalized_chi_is_repaired_with_a_warning() {
    let cfg = write_config(
        "near.json",
        r#"{"model": {"kind": "builtin", "name": "damping"}, "chi": [[0.7071068, 0], [0.7071068, 0]], "t_grid": {"start": 1, "stop": 2, "count": 2}}"#,
    );
    let out = dptqfi(&["qfi", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("renormalized"));
}

#[test]
fn degenerate_stationary_state_is_a_precondition_failure() {
    let cfg = write_config(
        "degenerate.json",
        r#"{"model": {"kind": "builtin", "name": "blockcat"}, "methods": ["asymptotic_linearization"], "t_grid": {"start": 1, "stop": 2, "count": 2}}"#,
    );
    let out = dptqfi(&["qfi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn blockcat_cgf_has_a_kink_of_the_rate_difference() {
    let out = dptqfi(&["cgf", "--s", "-1:1:41:lin"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let kink = result_value(&text, "kink_at_0");
    assert!((kink - 0.9).abs() <= 0.01 * 0.9, "kink {kink}");
}

#[test]
fn blockcat_qfi_columns_and_exact_quadratic_coefficient() {
    let out = dptqfi(&["qfi", "--config", "golden/configs/blockcat_qfi.json"]);
    let text = stdout(&out);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("t,F_fd,F_quadratic_model,F_fd_per_t2,h_fd"), "{header}");
    assert!((result_value(&text, "quadratic_coefficient") - 0.81).abs() < 1e-9);
    // F/t² − c₂ is the exact linear correction 2(μ_A + μ_I)/t
    for row in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cells: Vec<f64> = row.split(',').take(4).map(|c| c.parse().unwrap()).collect();
        let (t, per_t2) = (cells[0], cells[3]);
        assert!((per_t2 - 0.81 - 2.2 / t).abs() < 1e-6, "t={t}: {per_t2}");
    }
}

#[test]
fn json_output_mirrors_csv() {
    let csv = stdout(&dptqfi(&["oracle", "--config", "golden/configs/damping_oracle.json"]));
    let json = stdout(&dptqfi(&["oracle", "--config", "golden/configs/damping_oracle.json", "--format", "json"]));
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let csv_rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), csv_rows.len());
    let first_error: f64 = csv_rows[0].split(',').nth(8).unwrap().parse().unwrap();
    assert_eq!(rows[0][8].as_f64().unwrap(), first_error);
    assert_eq!(doc["command"], "oracle");
    assert!(doc["tolerances"]["oracle_path_agreement"].is_string());
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("dptqfi-out-{}.csv", std::process::id()));
    let out = dptqfi(&["spectrum", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().contains("eigenvalue_re"));
}
