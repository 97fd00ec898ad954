use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_circuit-cooling");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_conf(conf: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", conf.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

/// Writes the default config with some lines replaced or dropped.
fn variant(dir: &tempfile::TempDir, name: &str, edits: &[(&str, Option<&str>)]) -> PathBuf {
    let base = std::fs::read_to_string(configs().join("default.conf")).unwrap();
    let mut lines: Vec<String> = Vec::new();
    for line in base.lines() {
        let key = line.split('=').next().unwrap().trim();
        match edits.iter().find(|(k, _)| *k == key) {
            Some((_, Some(v))) => lines.push(format!("{key} = {v}")),
            Some((_, None)) => {}
            None => lines.push(line.to_string()),
        }
    }
    for (k, v) in edits {
        if let Some(v) = v {
            if !base.lines().any(|l| l.split('=').next().unwrap().trim() == *k) {
                lines.push(format!("{k} = {v}"));
            }
        }
    }
    let path = dir.path().join(name);
    std::fs::write(&path, lines.join("\n")).unwrap();
    path
}

#[test]
fn dressed_reports_caption_ratios() {
    let o = run_conf(&configs().join("default.conf"), &["dressed"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!((value(&s, "f") - 16.0).abs() < 1e-9);
    assert!((value(&s, "gamma_perp_over_gamma") - 1.32).abs() < 1e-9);
}

#[test]
fn dressed_rejects_detuning_out_of_range() {
    let o = run_conf(&configs().join("default.conf"), &["--detuning", "1.2", "dressed"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = variant(&dir, "missing.conf", &[("qubit.gamma_hz", None)]);
    assert_eq!(run_conf(&missing, &["dressed"]).status.code(), Some(2));
    let unknown = variant(&dir, "unknown.conf", &[("qubit.colour", Some("blue"))]);
    assert_eq!(run_conf(&unknown, &["dressed"]).status.code(), Some(2));
    let absent = dir.path().join("nope.conf");
    assert_eq!(run_conf(&absent, &["dressed"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["dressed"]).status.code(), Some(1));
    assert_eq!(run_conf(&configs().join("default.conf"), &["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let one = variant(&dir, "steps.conf", &[("sweep.steps", Some("1"))]);
    assert_eq!(run_conf(&one, &["sweep"]).status.code(), Some(1));
}

#[test]
fn steady_at_reference_point() {
    let o = run_conf(&configs().join("default.conf"), &["steady"]);
    assert_eq!(o.status.code(), Some(0));
    let n = value(&stdout(&o), "n_mean");
    assert!((n - 0.351012074245926).abs() / 0.351012074245926 < 1e-8);
}

#[test]
fn steady_without_coupling_is_thermal() {
    let dir = tempfile::tempdir().unwrap();
    let c = variant(&dir, "g0.conf", &[("coupling.g_hz", Some("0"))]);
    let o = run_conf(&c, &["steady"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((value(&stdout(&o), "n_mean") - 4.0).abs() < 1e-12);
}

#[test]
fn steady_above_threshold_is_not_an_error() {
    let o = run_conf(&configs().join("default.conf"), &["--detuning", "-0.6", "steady"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("above_threshold = 1"));
    assert!(s.contains("AboveThreshold"));
}

#[test]
fn sweep_fig2_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2.csv");
    let o = run_conf(&configs().join("fig2.conf"), &["--out", out.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 96);
    assert!(text.starts_with("mode,"));
}

#[test]
fn sweep_fig3_varies_kappa() {
    let o = run_conf(&configs().join("fig3.conf"), &["sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rows = text.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "kappa_hz").unwrap();
    let mut kappas: Vec<f64> = rows
        .map(|r| r.split(',').nth(col).unwrap().parse::<f64>().unwrap())
        .collect();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();
    assert_eq!(kappas.len(), 2);
    assert!((kappas[0] - 1e2).abs() < 1e-6 && (kappas[1] - 1e3).abs() < 1e-6);
}

#[test]
fn validate_single_qubit_passes() {
    let o = run_conf(&configs().join("validate.conf"), &["validate"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate: PASS"), "{}", stdout(&o));
}

// The tolerance bounds the top Fock population; moments need it well below 1e-8.
#[test]
fn validate_uncoupled_matches_tightly() {
    let dir = tempfile::tempdir().unwrap();
    let c = variant(
        &dir,
        "g0.conf",
        &[
            ("coupling.g_hz", Some("0")),
            ("ensemble.n", Some("1")),
            ("oracle.tolerance", Some("1e-12")),
        ],
    );
    let o = run_conf(&c, &["validate"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate: PASS"), "{}", stdout(&o));
}

#[test]
fn validate_too_many_independent_qubits() {
    let o = run_conf(&configs().join("validate.conf"), &["--n", "60", "validate"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn dist_is_geometric() {
    let dir = tempfile::tempdir().unwrap();
    let c = variant(
        &dir,
        "g0.conf",
        &[("coupling.g_hz", Some("0")), ("oscillator.nbar", Some("1"))],
    );
    let o = run_conf(&c, &["dist"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let p: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.25).abs() < 1e-9);

    let o = run_conf(&configs().join("default.conf"), &["dist"]);
    let p: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(p.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn dist_above_threshold_reports() {
    let o = run_conf(&configs().join("default.conf"), &["--detuning", "-0.6", "dist"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("AboveThreshold"));
}
