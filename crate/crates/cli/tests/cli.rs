use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const V_C: [f64; 3] = [0.43296, 0.69515, 1.0];

fn opdyn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opdyn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run_config(cmd: &str, name: &str, body: &str) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, name, body);
    let out = opdyn(
        &[cmd, "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    (out, dir)
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn analyze_example2_reports_both_certificates() {
    let (o, _d) = run_config("analyze", "a.toml", "input = { fixture = \"example2\" }\n");
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = json(&o);
    assert!((s["rho_C"].as_f64().unwrap() - 1.5817).abs() <= 5e-4);
    assert_eq!(s["regime"], "CriticalA2");
    assert_eq!(s["stability"]["valid"], true);
    assert_eq!(s["stability"]["rank_H"], 2);
    assert!(max_diff(&floats(&s["spectral"]["v_right"]), &V_C) < 5e-4);
}

#[test]
fn analyze_accepts_an_explicit_gamma_in_json() {
    let body = r#"{"input": {"fixture": "example2"}, "gamma": [4.2681, 8.1972, 11.5733]}"#;
    let (o, _d) = run_config("analyze", "a.json", body);
    assert_eq!(o.status.code(), Some(0));
    let s = json(&o);
    assert_eq!(s["stability"]["method"], "UserSupplied");
    assert_eq!(s["stability"]["valid"], true);
}

#[test]
fn analyze_ones_matrix_with_scalar_sigma() {
    let body = "input = { csv = \"1,1\\n1,1\" }\nsigma_mode = { mode = \"scalar\", sigma = 2.0 }\n";
    let (o, _d) = run_config("analyze", "a.toml", body);
    assert_eq!(o.status.code(), Some(0));
    let s = json(&o);
    assert!(max_diff(&floats(&s["spectral"]["v_right"]), &[1.0, 1.0]) < 1e-12);
    assert_eq!(s["stability"]["valid"], true);
}

#[test]
fn analyze_rejects_non_square_csv() {
    let (o, _d) = run_config("analyze", "a.toml", "input = { csv = \"1,2,3\\n4,5,6\" }\n");
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "parse_error");
}

#[test]
fn analyze_without_certificates_exits_3_with_a_reason() {
    let (o, _d) = run_config("analyze", "a.toml", "input = { csv = \"0,0\\n0,0\" }\n");
    assert_eq!(o.status.code(), Some(3));
    let s = json(&o);
    assert!(s["stability"].is_null());
    assert!(s["reason"]
        .as_str()
        .unwrap()
        .contains("not eventually positive"));
}

#[test]
fn config_errors_exit_2() {
    for body in [
        "input = { fixture = \"example2\", csv = \"0\" }\n",
        "input = { fixture = \"nowhere\" }\n",
        "input = { fixture = \"example2\" }\n[run]\nspan_tol = -1.0\n",
        "input = { fixture = \"example2\" }\nunknown = 1\n",
    ] {
        let (o, _d) = run_config("analyze", "a.toml", body);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
}

#[test]
fn edge_list_paths_resolve_against_the_config() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("g.edges"), "n 3\n1 2 1\n2 3 1\n3 1 1\n").unwrap();
    let cfg = config(&dir, "a.toml", "input = { edge_list = \"g.edges\" }\n");
    let o = opdyn(
        &["analyze", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(json(&o)["n"], 3);
}

#[test]
fn simulate_pinned_extremist_reaches_v_c() {
    let body = "input = { fixture = \"example2\" }\nscenario = \"extremists\"\n[run]\nx0 = \"0.1,0.1,1\"\n";
    let (o, d) = run_config("simulate", "s.toml", body);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = json(&o);
    assert!(max_diff(&floats(&s["final_state"]), &V_C) <= 1e-3);
    assert_eq!(s["prediction"]["theorem_id"], "T3.3");
    assert_eq!(s["assessment"]["pass"], true);
    let out = d.path().join("out");
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3\n"));
    let svg = std::fs::read_to_string(out.join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(out.join("summary.json").exists());
}

#[test]
fn simulate_from_an_equilibrium_has_no_transient() {
    let body = "input = { fixture = \"example2\" }\nscenario = \"extremists\"\n[run]\nx0 = [0.0, 0.0, 0.0]\n";
    let (o, _d) = run_config("simulate", "s.toml", body);
    let s = json(&o);
    assert_eq!(s["terminated_by"], "Converged");
    assert_eq!(s["steps"], 0);
    assert_eq!(s["final_time"], 0.0);
}

#[test]
fn simulate_mixed_neutrals_decay_to_zero() {
    let body = "input = { fixture = \"example2\" }\nscenario = \"neutrals\"\n[run]\nx0 = [0.6, -0.4, 0.3]\n";
    let (o, _d) = run_config("simulate", "s.toml", body);
    let s = json(&o);
    assert!(floats(&s["final_state"]).iter().all(|v| v.abs() <= 1e-3));
    assert_eq!(s["prediction"]["theorem_id"], "T2.mixed");
}

#[test]
fn simulate_csv_format_prints_the_trajectory() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "s.toml",
        "input = { fixture = \"example2\" }\nscenario = \"extremists\"\n[run]\nx0 = [0.2, 0.1, -0.3]\n",
    );
    let o = opdyn(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "csv",
        ],
        &dir.path().join("out"),
    );
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        text,
        std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap()
    );
}

#[test]
fn simulate_rejects_states_outside_the_box() {
    let body = "input = { fixture = \"example2\" }\nscenario = \"extremists\"\n[run]\nx0 = [2.0, 0.0, 0.0]\n";
    let (o, _d) = run_config("simulate", "s.toml", body);
    assert_eq!(o.status.code(), Some(2));
}

const VERIFY_T3_1: &str = "input = { fixture = \"example2\" }\nscenario = \"extremists\"\n[run]\nsamples = 8\nseed = 11\nclause = \"T3.1\"\n";

#[test]
fn verify_interior_extremists_passes() {
    let (o, _d) = run_config("verify", "v.toml", VERIFY_T3_1);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = json(&o);
    assert_eq!(s["report"]["all_passed"], true);
    assert_eq!(s["report"]["samples"].as_array().unwrap().len(), 8);
}

#[test]
fn verify_failures_exit_4() {
    let body = format!("{VERIFY_T3_1}t_max = 0.05\n");
    let (o, _d) = run_config("verify", "v.toml", &body);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&o)["report"]["all_passed"], false);
}

#[test]
fn verify_clause_mismatch_exits_2() {
    let body = VERIFY_T3_1.replace("T3.1", "T3.3");
    let (o, _d) = run_config("verify", "v.toml", &body);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_without_a_certificate_exits_3() {
    let body =
        "input = { fixture = \"example2\" }\nscenario = \"extremists\"\ngamma = [1.0, 1.0, 1.0]\n";
    let (o, _d) = run_config("verify", "v.toml", body);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn seed_flag_changes_the_sample() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "v.toml", VERIFY_T3_1);
    let c = cfg.to_str().unwrap();
    let a = json(&opdyn(&["verify", "--config", c], &dir.path().join("a")));
    let b = json(&opdyn(
        &["verify", "--config", c, "--seed", "12"],
        &dir.path().join("b"),
    ));
    assert_ne!(
        a["report"]["samples"][0]["x0"],
        b["report"]["samples"][0]["x0"]
    );
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = opdyn(&["reproduce", "2", "--seed", "4"], &dir.path().join("a"));
    let b = opdyn(&["reproduce", "2", "--seed", "4"], &dir.path().join("b"));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(tree(&dir.path().join("a")), tree(&dir.path().join("b")));

    let cfg = config(&dir, "v.toml", VERIFY_T3_1);
    let c = cfg.to_str().unwrap();
    let a = opdyn(&["verify", "--config", c], &dir.path().join("va"));
    let b = opdyn(&["verify", "--config", c], &dir.path().join("vb"));
    assert_eq!(a.stdout, b.stdout);
}

fn panel<'a>(summary: &'a Value, name: &str) -> &'a Value {
    summary["panels"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["panel"] == name)
        .unwrap()
}

#[test]
fn reproduce_example2_writes_nine_panels() {
    let dir = TempDir::new().unwrap();
    let o = opdyn(&["reproduce", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csvs = tree(dir.path())
        .iter()
        .filter(|(n, _)| n.ends_with(".csv"))
        .count();
    let svgs = tree(dir.path())
        .iter()
        .filter(|(n, _)| n.ends_with(".svg"))
        .count();
    assert_eq!((csvs, svgs), (9, 9));
    let s = json(&o);
    let p9b = panel(&s, "9b");
    assert!(max_diff(&floats(&p9b["final_state"]), &V_C) <= 1e-3);
    assert_eq!(panel(&s, "9d")["classification"], "unsupported");
    assert_eq!(panel(&s, "9d")["pinned_constant"], true);
    assert_eq!(s["supported_passed"], s["supported_panels"]);
}

#[test]
fn reproduce_example1_records_the_sigma_path() {
    let dir = TempDir::new().unwrap();
    let o = opdyn(&["reproduce", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = json(&o);
    assert_eq!(s["system"]["sigma"]["path"], "rho_B");
    assert_eq!(s["system"]["sigma"]["b_eventually_positive"], true);
    assert_eq!(s["panels"].as_array().unwrap().len(), 11);
    let p5b = panel(&s, "5b");
    assert!(floats(&p5b["final_state"]).iter().all(|v| v.abs() <= 1e-3));
    assert_eq!(panel(&s, "6d")["pinned_constant"], true);
}

#[test]
fn reproduce_example1_opposite_extremes_are_unsupported() {
    let dir = TempDir::new().unwrap();
    let s = json(&opdyn(&["reproduce", "1"], dir.path()));
    let p = panel(&s, "6d");
    assert_eq!(
        p["classification"], "unsupported",
        "6d classified as {} ({})",
        p["classification"], p["theorem_id"]
    );
}

#[test]
fn unknown_example_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        opdyn(&["reproduce", "3"], dir.path()).status.code(),
        Some(2)
    );
}
