use std::path::Path;
use std::process::{Command, Output};

fn bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balancegauge"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("BALANCEGAUGE_THREADS")
        .output()
        .expect("binary runs")
}

fn simulate(out: &Path, scenario: &str, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--scenario", scenario, "--n", "600", "--reps", "3", "--truth-size", "5000", "--ps-spec", "simple"];
    args.extend_from_slice(extra);
    bin(out, &args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(simulate(out, "42", &[]).status.code(), Some(2));
    assert_eq!(simulate(out, "1", &["--reps", "0"]).status.code(), Some(2));
    assert_eq!(bin(out, &["--jobs", "0", "report", "."]).status.code(), Some(2));
    let empty = tempfile::tempdir().unwrap();
    let o = bin(out, &["evaluate", empty.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let panel = out.join("bad.csv");
    std::fs::write(&panel, "id,time,censored,treatment,x\n1,0,0,7,0.1\n").unwrap();
    let o = bin(out, &["balance", panel.to_str().unwrap(), "--unweighted"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_filtered_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = simulate(out, "1", &["--metrics", "mhb,smd", "--write-panel"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let archive = std::fs::read_to_string(out.join("archive_1.csv")).unwrap();
    let mut metrics: Vec<&str> = archive.lines().skip(1).filter_map(|l| l.split(',').find(|f| ["MHB", "SMD", "KS", "D", "OVL", "CS"].contains(f))).collect();
    metrics.sort();
    metrics.dedup();
    assert_eq!(metrics, ["MHB", "SMD"]);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 42);
    assert!(manifest["outputs"].as_array().unwrap().len() >= 3);
    assert!(out.join("panel.csv").exists() && out.join("truth_1.json").exists());
}

#[test]
fn evaluate_reports_one_block_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for s in ["1", "4"] {
        let o = simulate(out, s, &["--metrics", "mhb,smd"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let eval_out = out.join("eval");
    let o = bin(&eval_out, &["evaluate", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(eval_out.join("evaluation.csv")).unwrap();
    let scenarios: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(scenarios.into_iter().collect::<Vec<_>>(), ["1", "4"]);
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn incomplete_archive_lists_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(simulate(out, "1", &["--metrics", "mhb"]).status.success());
    let path = out.join("archive_1.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    std::fs::write(&path, kept.join("\n") + "\n").unwrap();
    let o = bin(&out.join("e"), &["evaluate", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("rep 2"), "{}", stderr(&o));
    let o = bin(&out.join("e"), &["evaluate", out.to_str().unwrap(), "--allow-incomplete"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn weights_then_balance_on_a_written_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(simulate(out, "censored_base", &["--metrics", "smd", "--write-panel"]).status.success());
    let (panel, outcome) = (out.join("panel.csv"), out.join("outcome.csv"));
    let w = out.join("w");
    let o = bin(&w, &["weights", panel.to_str().unwrap(), "--outcome", outcome.to_str().unwrap(), "--family", "WAC"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = out.join("b");
    let o = bin(
        &b,
        &["balance", panel.to_str().unwrap(), "--weights", w.join("weights.csv").to_str().unwrap(), "--metrics", "smd,mhb", "--plot", "1,0"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["balance.csv", "balance.json", "summary.json", "plot_t1_k0.csv", "manifest.json"] {
        assert!(b.join(f).exists(), "{f}");
    }
    let o = bin(&out.join("sw"), &["balance", panel.to_str().unwrap(), "--family", "SW", "--metrics", "smd"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}
