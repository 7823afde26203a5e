use std::fs;
use std::process::Command;

use nlasso::commands::{self, Axis, RunInputs};
use nlasso::config::{LossConfig, Runtime};
use nlasso::formats;
use nlasso::ExperimentConfig;

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.graph.cluster_sizes = vec![20, 20];
    c.graph.p_out = 0.02;
    c.training.size = 8;
    c.solver.lambda = 0.1;
    c.solver.iterations = 60;
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlasso"))
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config();
    let a = commands::cmd_generate(&c, &dir.path().join("a")).unwrap();
    let b = commands::cmd_generate(&c, &dir.path().join("b")).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let meta = fs::read_to_string(dir.path().join("a/generate.meta.json")).unwrap();
    assert!(meta.contains("\"seed\""));
}

#[test]
fn default_generation_has_expected_shape() {
    let problem = commands::build_problem(&ExperimentConfig::default()).unwrap();
    let ds = &problem.dataset;
    assert_eq!(ds.graph().node_count(), 300);
    assert!(ds.nodes().iter().all(|d| d.len() == 5 && d.n_features() == 2));
    assert_eq!(ds.training_set().len(), 30);
}

#[test]
fn zero_probabilities_give_an_edgeless_graph() {
    let mut c = small_config();
    c.graph.p_in = 0.0;
    c.graph.p_out = 0.0;
    assert_eq!(commands::build_problem(&c).unwrap().dataset.graph().edge_count(), 0);
}

#[test]
fn zero_iterations_report_the_initial_error() {
    let mut c = ExperimentConfig::default();
    c.solver.iterations = 0;
    let problem = commands::build_problem(&c).unwrap();
    let out = commands::run_solver(&c, &problem).unwrap();
    assert!(out.weights.as_flat().iter().all(|&w| w == 0.0));
    let mse = out.report.weight_mse.unwrap();
    assert!((mse - 8.0 * 270.0 / 300.0).abs() <= 1e-12, "{mse}");
    assert!(out.trace.is_empty());
}

#[test]
fn runtimes_give_the_same_report() {
    let c = small_config();
    let problem = commands::build_problem(&c).unwrap();
    let central = commands::run_solver(&c, &problem).unwrap();
    let mut mp_config = c.clone();
    mp_config.solver.runtime = Runtime::Mp;
    let mp = commands::run_solver(&mp_config, &problem).unwrap();
    let a = &central.report;
    let b = &mp.report;
    assert!((a.weight_mse.unwrap() - b.weight_mse.unwrap()).abs() <= 1e-10);
    assert!((a.train_prediction_mse - b.train_prediction_mse).abs() <= 1e-10);
    assert!((a.test_prediction_mse.unwrap() - b.test_prediction_mse.unwrap()).abs() <= 1e-10);
    let edges = problem.dataset.graph().edge_count();
    assert_eq!(mp.messages.unwrap().messages, 4 * edges * 60);
}

#[test]
fn single_value_sweep_equals_run() {
    let c = small_config();
    let problem = commands::build_problem(&c).unwrap();
    let run = commands::run_solver(&c, &problem).unwrap();
    let rows = commands::run_sweep(&c, Axis::Lambda, &[c.solver.lambda]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].weight_mse, run.report.weight_mse.unwrap());
}

#[test]
fn iteration_sweep_does_not_get_worse() {
    let c = small_config();
    let rows = commands::run_sweep(&c, Axis::Iterations, &[1.0, 10.0, 100.0, 500.0]).unwrap();
    assert!(rows[3].weight_mse <= rows[0].weight_mse);
    assert!(commands::run_sweep(&c, Axis::Iterations, &[2.5]).is_err());
    assert!(commands::run_sweep(&c, Axis::Iterations, &[]).is_err());
}

#[test]
fn weaker_cross_cluster_coupling_helps() {
    let mut c = ExperimentConfig::default();
    c.solver.lambda = 0.1;
    let rows = commands::run_sweep(&c, Axis::POut, &[1e-3, 1e-1]).unwrap();
    assert!(rows[0].weight_mse <= rows[1].weight_mse, "{rows:?}");
}

#[test]
fn baseline_is_exact_for_one_shared_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.data.cluster_weights = vec![vec![1.0, -2.0], vec![1.0, -2.0]];
    let (report, table) = commands::cmd_baseline(&c, dir.path()).unwrap();
    assert!(report.train_prediction_mse <= 1e-20);
    assert!(report.test_prediction_mse.unwrap() <= 1e-20);
    assert!(table.starts_with("method"));
    assert!(dir.path().join("baseline.json").exists());
}

#[test]
fn parse_values_accepts_comma_lists() {
    assert_eq!(commands::parse_values("1, 1e-3,0.5").unwrap(), vec![1.0, 1e-3, 0.5]);
    assert!(commands::parse_values("1,x").is_err());
    assert!(commands::parse_values("").is_err());
}

#[test]
fn run_from_files_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config();
    let files = commands::cmd_generate(&c, dir.path()).unwrap();
    let inputs = RunInputs {
        graph: Some(files[0].clone()),
        dataset: Some(files[1].clone()),
        truth: Some(files[2].clone()),
    };
    let (from_files, table) = commands::cmd_run(&c, &inputs, &dir.path().join("run")).unwrap();
    let (in_memory, _) = commands::cmd_run(&c, &RunInputs::default(), &dir.path().join("mem")).unwrap();
    assert_eq!(from_files.weights, in_memory.weights);
    assert!(table.contains("network Lasso"));
    for name in ["report.json", "weights.json", "trace.csv", "trace.meta.json"] {
        assert!(dir.path().join("run").join(name).exists(), "{name} missing");
    }
    let mem_trace = fs::read(dir.path().join("mem/trace.csv")).unwrap();
    assert_eq!(fs::read(dir.path().join("run/trace.csv")).unwrap(), mem_trace);
}

#[test]
fn message_log_is_written_for_mp_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.solver.iterations = 2;
    c.solver.runtime = Runtime::Mp;
    c.output.message_log = true;
    let (out, _) = commands::cmd_run(&c, &RunInputs::default(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("messages.jsonl")).unwrap();
    let lines: Vec<formats::MessageLine> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), out.messages.unwrap().messages);
    assert!(lines.iter().all(|l| l.payload.is_none()));
    assert!(lines[0].sender.starts_with("edge:") && lines[0].receiver.starts_with("node:"));
}

#[test]
fn soft_failure_threshold_sets_exit_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.solver.loss = LossConfig::Lasso { lambda_local: 0.05 };
    c.solver.inner_tolerance = 1e-30;
    c.solver.inner_max_iterations = 1;
    c.solver.iterations = 3;
    c.solver.max_soft_failures = Some(0);
    let err = commands::cmd_run(&c, &RunInputs::default(), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, formats::to_json(&small_config())).unwrap();
    let out = dir.path().join("out");

    let ok = bin()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let run = bin()
        .args(["run", "--runtime", "mp", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--graph")
        .arg(out.join("graph.json"))
        .arg("--dataset")
        .arg(out.join("dataset.json"))
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("messages"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"solver": {"lambda": -1}}"#).unwrap();
    let invalid = bin()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(invalid.status.code(), Some(1));

    let missing = bin()
        .args(["baseline", "--config", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let usage = bin()
        .args(["sweep", "--axis", "nope", "--values", "1"])
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(1));

    let sweep = bin()
        .args([
            "sweep",
            "--axis",
            "p_out",
            "--values",
            "0.001,0.01",
            "--seed-override",
            "4",
            "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(sweep.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("sweep_p_out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("p_out,weight_mse"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_p_out.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["graph"]["seed"], 4);
    assert_eq!(meta["config"]["training"]["seed"], 6);
}
