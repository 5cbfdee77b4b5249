use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spherical(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spherical"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn header(csv: &str) -> Value {
    let first = csv.lines().next().unwrap();
    serde_json::from_str(first.strip_prefix("# ").unwrap()).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

const KERNEL: &[&str] = &["kernel", "--M", "101", "--alpha", "0.2", "--Kperp", "1.0", "--K", "0.3", "--d", "1"];

#[test]
fn kernel_table_has_m_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let mut args = KERNEL.to_vec();
        args.extend(["-o", path.to_str().unwrap()]);
        assert!(spherical(&args).status.success());
    }
    let text = read(&a);
    assert_eq!(text, read(&b));
    assert_eq!(text.lines().nth(1).unwrap(), "nu,kappa,S_exact,S_asymptotic,lambda");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[50][0], "0");
    // 17 significant digits survive the round trip
    let s0: f64 = rows[50][2].parse().unwrap();
    assert_eq!(s0, spherical_core::kernel::s_exact(0, 101));
    assert_eq!(rows[50][2].split('e').next().unwrap().replace('.', "").len(), 17);
    assert_eq!(header(&text)["config"]["classical"]["M"], 101);

    let report: Value = serde_json::from_str(&read(&dir.path().join("a_asymptotics.json"))).unwrap();
    for row in report["rows"].as_array().unwrap() {
        for r in row["ratio_per_doubling"].as_array().unwrap() {
            let r = r.as_f64().unwrap();
            assert!((3.2..=4.8).contains(&r), "{r}");
        }
    }
}

#[test]
fn even_slice_count_is_a_validation_error() {
    let mut args = KERNEL.to_vec();
    args[2] = "100";
    let o = spherical(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("M must be odd"));
}

#[test]
fn quantum_and_classical_flags_are_exclusive() {
    let o = spherical(&["saddle", "--A", "1", "--K", "0.3", "--M", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn saddle_json_fields() {
    let o = spherical(&["saddle", "--M", "11", "--alpha", "0.2", "--Kperp", "1", "--K", "0.3"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["z", "u", "phase", "m", "H_at_Kc_over_2", "residual"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["phase"], "paramagnetic");
    assert_eq!(v["H_at_Kc_over_2"], "divergent");
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn quantum_config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"quantum": {"A": 1.0, "B": 1.0, "J0": 0.5, "h0": 0.0, "beta": 10.1, "M": 101}, "d": 1, "alpha": 0.2}"#,
    )
    .unwrap();
    let from_file = spherical(&["saddle", "--config", cfg.to_str().unwrap()]);
    let from_flags = spherical(&[
        "saddle", "--A", "1", "--B", "1", "--J0", "0.5", "--beta", "10.1", "--M", "101", "--alpha", "0.2", "--d", "1",
    ]);
    assert!(from_file.status.success() && from_flags.status.success());
    let a: Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    let b: Value = serde_json::from_str(&stdout(&from_flags)).unwrap();
    assert_eq!(a["u"], b["u"]);
    assert_eq!(a["meta"]["config"]["classical"], b["meta"]["config"]["classical"]);
    assert_eq!(a["meta"]["config"]["classical"]["K"], 0.05);
}

#[test]
fn config_with_both_blocks_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"quantum": {"A": 1.0}, "classical": {"K": 0.1}}"#).unwrap();
    assert_eq!(spherical(&["saddle", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(spherical(&["saddle", "--config", "/nonexistent/run.json"]).status.code(), Some(4));
}

#[test]
fn phase_boundary_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pb.csv");
    let o = spherical(&[
        "phase-boundary", "--d", "1", "--Kperp", "2.0", "--alpha-sweep", "0.5:4.0:8", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = read(&out);
    assert_eq!(text.lines().nth(1).unwrap(), "alpha,K_c,G_c,ln_Gc");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 8);
    let g: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    let fit: Value = serde_json::from_str(&read(&dir.path().join("pb_fit.json"))).unwrap();
    assert!(fit["C_d"].as_f64().unwrap() > 0.0);
    assert_eq!(fit["fit"]["n_points"], 8);
}

#[test]
fn exponents_closed_form_in_one_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = spherical(&["exponents", "--d", "1", "-o", &format!("{}/", dir.path().display())]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&read(&dir.path().join("exponents.json"))).unwrap();
    let c = &v["closed_form"];
    let got: Vec<f64> = ["alpha_sh", "beta_m", "gamma", "delta", "nu", "eta", "z_dyn"]
        .iter()
        .map(|k| c[k].as_f64().unwrap())
        .collect();
    assert_eq!(got, vec![-1.0, 0.5, 2.0, 5.0, 1.0, 0.0, 2.0]);
    assert_eq!(v["fits"].as_array().unwrap().len(), 4);
    let points = read(&dir.path().join("exponents_points.csv"));
    assert_eq!(points.lines().nth(1).unwrap(), "g,u,xi,chi,m");
    assert_eq!(data_rows(&points).len(), 24);
}

#[test]
fn oracle_check_passes_on_defaults() {
    let o = spherical(&["oracle-check"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 8);
    assert!(checks.iter().all(|c| c["residual"].as_f64().unwrap() <= c["threshold"].as_f64().unwrap()));
}

#[test]
fn correlator_obeys_the_constraint() {
    let o = spherical(&[
        "correlator", "--M", "11", "--alpha", "0.2", "--Kperp", "1", "--K", "0.3", "--r-range", "0:2", "--rho-range", "0:3",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1).unwrap(), "r,rho,G,engine");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 12);
    let g00: f64 = rows[0][2].parse().unwrap();
    assert!((g00 - 1.0).abs() < 1e-8);
}

#[test]
fn ordered_phase_has_no_propagator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = spherical(&[
        "correlator", "--engine", "continuum", "--alpha", "0.3", "--Kperp", "1", "--K", "0.05", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let report: Value = serde_json::from_str(&read(&dir.path().join("g_failure.json"))).unwrap();
    assert_eq!(report["kind"], "solver");
    assert!(!out.exists());
}

#[test]
fn tail_table_columns() {
    let o = spherical(&["tail", "--alpha", "0.1", "--Kperp", "0.2", "--K", "1e-6", "--rho-range", "100:109"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1).unwrap(), "rho,G,leading,refined,plateau_ratio");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let g: f64 = r[1].parse().unwrap();
        let refined: f64 = r[3].parse().unwrap();
        assert!(((g - refined) / g).abs() < 1e-3);
    }
    assert_eq!(spherical(&["tail", "--alpha", "0", "--Kperp", "0.2", "--K", "0.1"]).status.code(), Some(2));
}
