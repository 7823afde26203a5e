//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nlasso::commands::{build_problem, run_baseline, Problem};
use nlasso::ExperimentConfig;
use nlasso_core::graph::EmpiricalGraph;
use nlasso_core::loss::{logistic_prox_gradient, prox_lasso, prox_squared};
use nlasso_core::{
    pooled_linear_regression, solve, weight_mse, InProcessTransport, InnerSolver, LocalDataset, LossModel, Network,
    NetworkedDataset, PrimalDual, SolverConfig, SolverState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

/// Largest dual excess over every iteration of every run.
#[derive(Default)]
struct DualLedger {
    worst: f64,
    runs: usize,
}

impl DualLedger {
    fn new() -> Self {
        Self {
            worst: f64::NEG_INFINITY,
            runs: 0,
        }
    }

    fn note(&mut self, excess: f64) {
        self.worst = self.worst.max(excess);
        self.runs += 1;
    }
}

fn default_problem(seed: u64) -> (ExperimentConfig, Problem) {
    let config = ExperimentConfig::default().with_seed(seed);
    let problem = build_problem(&config).expect("default config is valid");
    (config, problem)
}

fn fixed(lambda: f64, iterations: usize) -> SolverConfig {
    SolverConfig {
        lambda,
        max_iterations: iterations,
        stop_tolerance: 0.0,
        trace_every: 0,
    }
}

fn eps(problem: &Problem, state: &SolverState) -> f64 {
    let ds = &problem.dataset;
    let truth = problem.truth.as_ref().unwrap();
    weight_mse(&state.w, truth, ds.training_set(), ds.graph().node_count()).unwrap()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn default_method(duals: &mut DualLedger) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let (config, problem) = default_problem(seed);
        let state = solve(&problem.dataset, &LossModel::squared(), &fixed(1e-3, 500)).unwrap();
        duals.note(state.max_dual_excess);
        let mse = eps(&problem, &state);
        let (_, baseline) = run_baseline(&config, &problem).unwrap();
        let ratio = mse / baseline.weight_mse.unwrap();
        worst = worst.max(mse);
        worst_ratio = worst_ratio.max(ratio);
        per_seed.push(format!("{mse:.3e}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-3 && worst_ratio <= 1e-3 && elapsed < 60.0,
        detail: format!(
            "weight MSE per seed [{}] (need <= 1e-3), worst MSE/baseline {worst_ratio:.3e} (need <= 1e-3), {elapsed:.1}s",
            per_seed.join(", ")
        ),
    }
}

fn default_baseline() -> Outcome {
    let mut values = Vec::new();
    for seed in SEEDS {
        let (config, problem) = default_problem(seed);
        let (_, r) = run_baseline(&config, &problem).unwrap();
        values.push((r.train_prediction_mse, r.test_prediction_mse.unwrap()));
    }
    let pass = values
        .iter()
        .all(|&(a, b)| (3.0..=5.5).contains(&a) && (3.0..=5.5).contains(&b));
    let shown: Vec<String> = values.iter().map(|(a, b)| format!("{a:.2}/{b:.2}")).collect();
    Outcome {
        pass,
        detail: format!(
            "train/test prediction MSE [{}] (need each in [3.0, 5.5])",
            shown.join(", ")
        ),
    }
}

fn distributed_equivalence(duals: &mut DualLedger) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    let loss = LossModel::squared();
    for seed in 0..3 {
        let (_, problem) = default_problem(seed);
        let ds = &problem.dataset;
        let central = solve(ds, &loss, &fixed(1e-3, 500)).unwrap();
        duals.note(central.max_dual_excess);
        let pd = PrimalDual::new(ds, &loss, 1e-3).unwrap();
        let mut network = Network::new(&pd);
        let mut transport = InProcessTransport::new();
        let expected = 4 * ds.graph().edge_count();
        let mut excess = f64::NEG_INFINITY;
        for _ in 0..500 {
            let report = network.run_round(&mut transport).unwrap();
            counts_ok &= report.messages == expected;
            excess = excess.max(nlasso_core::solver::dual_excess(&network.duals(), 1e-3, ds.graph()));
        }
        duals.note(excess);
        worst = worst.max(network.weights().max_abs_diff(&central.w));
    }
    Outcome {
        pass: worst <= 1e-10 && counts_ok,
        detail: format!("max |w_mp - w_central| = {worst:.1e} (need <= 1e-10), 4|E| messages every round: {counts_ok}"),
    }
}

fn two_node_grid(duals: &mut DualLedger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let instances = 20;
    for _ in 0..instances {
        let lambda = rng.random_range(0.05..2.0);
        let a_e = rng.random_range(0.5..2.0);
        let node = |rng: &mut ChaCha8Rng| {
            let m = rng.random_range(1..=4);
            let w = rng.random_range(-3.0..3.0);
            let xs: Vec<[f64; 1]> = (0..m).map(|_| [rng.random_range(0.3..2.0)]).collect();
            let ys: Vec<f64> = xs.iter().map(|x| x[0] * w + rng.random_range(-0.3..0.3)).collect();
            LocalDataset::from_rows(&xs, &ys).unwrap()
        };
        let d0 = node(&mut rng);
        let d1 = node(&mut rng);
        let g = EmpiricalGraph::new(2, [(0, 1, a_e)]).unwrap();
        let ds = NetworkedDataset::new(g, vec![d0.clone(), d1.clone()], vec![0, 1]).unwrap();
        let config = SolverConfig {
            lambda,
            max_iterations: 1_000_000,
            stop_tolerance: 1e-14,
            trace_every: 0,
        };
        let state = solve(&ds, &LossModel::squared(), &config).unwrap();
        duals.note(state.max_dual_excess);
        let (g0, g1) = grid_minimizer(&d0, &d1, lambda * a_e);
        worst = worst
            .max((state.w.block(0)[0] - g0).abs())
            .max((state.w.block(1)[0] - g1).abs());
    }
    Outcome {
        pass: worst <= 2e-3,
        detail: format!("{instances} instances, max |w - grid| = {worst:.2e} (need <= 2e-3)"),
    }
}

/// Exhaustive search of the objective over `[-5, 5]²` at step 1e-3.
fn grid_minimizer(d0: &LocalDataset, d1: &LocalDataset, coupling: f64) -> (f64, f64) {
    let coefficients = |d: &LocalDataset| {
        let m = d.len() as f64;
        let xx: f64 = d.features().iter().map(|x| x * x).sum();
        let xy: f64 = d.features().iter().zip(d.labels().iter()).map(|(x, y)| x * y).sum();
        let yy: f64 = d.labels().iter().map(|y| y * y).sum();
        (xx / m, -2.0 * xy / m, yy / m)
    };
    let (a0, b0, c0) = coefficients(d0);
    let (a1, b1, c1) = coefficients(d1);
    let grid: Vec<f64> = (-5000..=5000).map(|k| k as f64 * 1e-3).collect();
    let f1: Vec<f64> = grid.iter().map(|w| a1 * w * w + b1 * w + c1).collect();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &w0 in &grid {
        let f0 = a0 * w0 * w0 + b0 * w0 + c0;
        for (&w1, &f) in grid.iter().zip(&f1) {
            let value = f0 + f + coupling * (w0 - w1).abs();
            if value < best.0 {
                best = (value, w0, w1);
            }
        }
    }
    (best.1, best.2)
}

struct ProxInstance {
    data: LocalDataset,
    binary: LocalDataset,
    v: Vec<f64>,
    v2: Vec<f64>,
    tau: f64,
}

fn prox_instance(rng: &mut ChaCha8Rng) -> ProxInstance {
    let m = rng.random_range(1..=8);
    let n = rng.random_range(1..=4);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
    let bits: Vec<f64> = (0..m).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
    let vec = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<f64>>();
    ProxInstance {
        data: LocalDataset::from_rows(&rows, &y).unwrap(),
        binary: LocalDataset::from_rows(&rows, &bits).unwrap(),
        v: vec(rng),
        v2: vec(rng),
        tau: 10f64.powf(rng.random_range(-2.0..1.0)),
    }
}

fn prox_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let models = [
        ("squared", LossModel::squared()),
        ("lasso", LossModel::lasso(0.3)),
        ("logistic", LossModel::logistic()),
    ];
    let instances = 100;
    let mut failures: Vec<String> = Vec::new();
    let mut soft = 0;
    let mut worst_d: f64 = 0.0;
    for k in 0..instances {
        let inst = prox_instance(&mut rng);
        for (name, model) in &models {
            let data = if *name == "logistic" { &inst.binary } else { &inst.data };
            let id = model.prox(data, &inst.v, 1e-12).unwrap();
            if dist(&id.z, &inst.v) > 1e-6 * (1.0 + norm(&inst.v)) {
                failures.push(format!("(a) {name} #{k}"));
            }
            let a = model.prox(data, &inst.v, inst.tau).unwrap();
            let b = model.prox(data, &inst.v2, inst.tau).unwrap();
            for r in [&a, &b] {
                if !r.converged {
                    soft += 1;
                } else if r.residual > 1e-8 {
                    failures.push(format!("(b) {name} #{k}"));
                }
            }
            if dist(&a.z, &b.z) > dist(&inst.v, &inst.v2) + 2.0 * model.inner.tolerance {
                failures.push(format!("(c) {name} #{k}"));
            }
        }
        let tau = 10f64.powf(rng.random_range(-2.0..0.0));
        let exact = prox_squared(&inst.data, &inst.v, tau).unwrap();
        let lasso = prox_lasso(&inst.data, &inst.v, tau, 0.0, &InnerSolver::default()).unwrap();
        let d = dist(&exact, &lasso.z);
        worst_d = worst_d.max(d);
        if d > 1e-8 {
            failures.push(format!("(d) #{k}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{instances} instances x 3 operators, (a)-(c) failures {}, soft failures {soft}, (d) max gap {worst_d:.1e}{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(" first: {}", failures[0]) }
        ),
    }
}

fn dual_feasibility(duals: &DualLedger) -> Outcome {
    Outcome {
        pass: duals.worst <= 0.0,
        detail: format!(
            "max over {} runs and all iterations of |u| - lambda*A_e = {:.3e} (need <= 0)",
            duals.runs, duals.worst
        ),
    }
}

fn large_lambda_consensus(duals: &mut DualLedger) -> Outcome {
    let seed = SEEDS
        .into_iter()
        .find(|&s| default_problem(s).1.dataset.graph().is_connected())
        .expect("a connected default graph");
    let (_, problem) = default_problem(seed);
    let ds = &problem.dataset;
    let state = solve(ds, &LossModel::squared(), &fixed(1e6, 2000)).unwrap();
    duals.note(state.max_dual_excess);
    let pooled = pooled_linear_regression(ds).unwrap();
    let blocks: Vec<&[f64]> = state.w.blocks().collect();
    let mut spread: f64 = 0.0;
    for a in &blocks {
        for b in &blocks {
            spread = spread.max(dist(a, b));
        }
    }
    let deviation = blocks.iter().map(|w| dist(w, &pooled)).fold(0.0, f64::max);
    Outcome {
        pass: spread <= 1e-4 && deviation <= 1e-3,
        detail: format!(
            "seed {seed}: max pairwise distance {spread:.3e} (need <= 1e-4), max distance to pooled LS {deviation:.3e} (need <= 1e-3)"
        ),
    }
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = LossModel::logistic();
    let h = 1e-6;
    let instances = 50;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = prox_instance(&mut rng);
        let z: Vec<f64> = inst.v.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = logistic_prox_gradient(&inst.binary, &inst.v, inst.tau, &z).unwrap();
        let fd: Vec<f64> = (0..z.len())
            .map(|j| {
                let mut plus = z.clone();
                let mut minus = z.clone();
                plus[j] += h;
                minus[j] -= h;
                let f = |p: &[f64]| model.prox_objective(&inst.binary, &inst.v, inst.tau, p).unwrap();
                (f(&plus) - f(&minus)) / (2.0 * h)
            })
            .collect();
        worst = worst.max(dist(&fd, &g) / norm(&g).max(f64::MIN_POSITIVE));
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("{instances} instances, max relative error {worst:.2e} (need <= 1e-4)"),
    }
}

fn iteration_trend(duals: &mut DualLedger) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut shown = Vec::new();
    for seed in SEEDS {
        let (_, problem) = default_problem(seed);
        let early = solve(&problem.dataset, &LossModel::squared(), &fixed(1e-3, 10)).unwrap();
        let late = solve(&problem.dataset, &LossModel::squared(), &fixed(1e-3, 500)).unwrap();
        duals.note(early.max_dual_excess);
        duals.note(late.max_dual_excess);
        let ratio = eps(&problem, &late) / eps(&problem, &early);
        worst = worst.max(ratio);
        shown.push(format!("{ratio:.3}"));
    }
    Outcome {
        pass: worst <= 1e-2,
        detail: format!("MSE@500 / MSE@10 per seed [{}] (need <= 1e-2)", shown.join(", ")),
    }
}

/// Not a numbered criterion: `‖w_{k+1} − w_k‖` at k = 500 against k = 10.
fn residual_trend(duals: &mut DualLedger) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut shown = Vec::new();
    for seed in SEEDS {
        let (_, problem) = default_problem(seed);
        let config = SolverConfig {
            trace_every: 1,
            ..fixed(1e-3, 500)
        };
        let state = solve(&problem.dataset, &LossModel::squared(), &config).unwrap();
        duals.note(state.max_dual_excess);
        let ratio = state.trace[499].dw_norm / state.trace[9].dw_norm;
        worst = worst.max(ratio);
        shown.push(format!("{ratio:.2e}"));
    }
    Outcome {
        pass: worst <= 1e-2,
        detail: format!("|dw|@500 / |dw|@10 per seed [{}] (need <= 1e-2)", shown.join(", ")),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut duals = DualLedger::new();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "default experiment, network Lasso", default_method(&mut duals)),
        (2, "default experiment, pooled baseline", default_baseline()),
        (
            3,
            "centralized/distributed equivalence",
            distributed_equivalence(&mut duals),
        ),
        (4, "two-node grid-search oracle", two_node_grid(&mut duals)),
        (5, "prox correctness suite", prox_suite()),
    ];
    results.push((7, "large-lambda consensus", large_lambda_consensus(&mut duals)));
    results.push((8, "logistic gradient checks", gradient_checks()));
    results.push((9, "iteration sweep trend", iteration_trend(&mut duals)));
    let trend = residual_trend(&mut duals);
    results.push((6, "dual feasibility", dual_feasibility(&duals)));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, outcome) in &results {
        failed += usize::from(!outcome.pass);
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{id}] {name}: {}", outcome.detail);
    }
    let verdict = if trend.pass { "PASS" } else { "FAIL" };
    println!("{verdict} [invariant] fixed-point residual trend: {}", trend.detail);
    failed += usize::from(!trend.pass);
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        results.len() + 1 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
