use std::fs;

use ensemble_lab::harness::{read_summary, read_traces, run, summarize, ExperimentConfig};

fn config(dir: &std::path::Path, body: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(body).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn rerunning_a_config_reproduces_every_byte() {
    let body = "experiment = regret\nenv.d = 3\nalgorithm.m = 6\nrun.n = 120\nrun.reps = 3\nrun.master_seed = 9\ndiag.every = 40\ndiag.net_size = 32\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&config(a.path(), body)).unwrap();
    run(&config(b.path(), body)).unwrap();
    for name in ["summary.csv", "band.csv", "trace.csv", "manifest.txt"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
        assert!(!x.contains(&b'\r'));
    }
    let traces = read_traces(&a.path().join("trace.csv")).unwrap();
    assert_eq!(traces.len(), 3 * 120);
    let band = summarize(a.path().join("trace.csv").to_str().unwrap()).unwrap();
    assert_eq!(band.reps, 3);
    assert_eq!(band.band.len(), 120);
}

#[test]
fn lowerbound_summary_reports_fractions_and_per_rep_slack() {
    let dir = tempfile::tempdir().unwrap();
    let body = "experiment = lowerbound\nenv.d = 8\nalgorithm.m = 4\nalgorithm.precision = extended\nrun.n = 300\nrun.reps = 6\n";
    let report = run(&config(dir.path(), body)).unwrap();
    let rows = read_summary(&dir.path().join("summary.csv")).unwrap();
    let pooled: Vec<_> = rows.iter().filter(|r| r.rep.is_none()).map(|r| r.statistic.as_str()).collect();
    for name in ["mean_proj_sq_le_half", "mean_regret_ge_quarter", "mean_span_residual"] {
        assert!(pooled.contains(&name), "{name}");
    }
    let slack: Vec<f64> = rows.iter().filter(|r| r.statistic == "bound_slack").map(|r| r.value).collect();
    assert_eq!(slack.len(), 6);
    assert!(slack.iter().all(|s| *s >= -1e-6));
    let frac = report.pooled("mean_proj_sq_le_half").unwrap();
    assert!((0.0..=1.0).contains(&frac));
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains(&report.config_hash));
    assert!(manifest.contains("algorithm.precision = extended"));
}
