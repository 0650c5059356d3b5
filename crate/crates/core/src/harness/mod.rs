//! Experiment orchestration and report emission.
//!
//! [`run`] dispatches a validated [`ExperimentConfig`] and returns a
//! [`Report`]: raw CSV tables, a summary table computed only from the raw
//! rows, and human-readable lines. Seeds run in parallel on a pool of
//! `workers` threads; results are collected in seed order, so the output
//! bytes do not depend on the worker count.

mod config;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use config::{
    AgentParams, ExperimentConfig, ExperimentKind, ExploreParams, LearnParams, MetaMethod, MetalearnParams, SeedSpec,
};

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::hybrid::{compare_budgeted, explore_seed, ComparisonConfig};
use crate::metalearn::{
    grid_search, quantum_meta_opt, unimodal_search, EvalTable, GridEvaluator, SuperposedState,
};
use crate::quantum::{oracularize, verify_equivalence, Oracle};
use crate::seed::stream_rng;

/// A named CSV table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: ExperimentKind,
    pub tables: Vec<Table>,
    pub lines: Vec<String>,
    /// False when a verification step failed.
    pub verified: bool,
    config_echo: String,
    maze_echo: String,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.name == name).map(|t| t.text.as_str())
    }

    /// Writes every table, plus `config.toml` and `maze.toml`, into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            fs::write(dir.join(&t.name), &t.text)?;
        }
        fs::write(dir.join("config.toml"), &self.config_echo)?;
        fs::write(dir.join("maze.toml"), &self.maze_echo)?;
        Ok(())
    }
}

/// Validates `config` and runs the experiment it names.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let spec = config.load_maze()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let (tables, lines, verified) = pool.install(|| match config.kind {
        ExperimentKind::VerifyOracle => run_verify(&spec),
        ExperimentKind::Explore => run_explore(config, &spec),
        ExperimentKind::Learn => run_learn(config, &spec),
        ExperimentKind::Metalearn => run_metalearn(config, &spec),
    })?;
    Ok(Report {
        kind: config.kind,
        tables,
        lines,
        verified,
        config_echo: config.to_toml()?,
        maze_echo: spec.to_toml()?,
    })
}

type Outcome = Result<(Vec<Table>, Vec<String>, bool)>;

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn csv_table(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(Table { name: name.into(), text: String::from_utf8(bytes).expect("csv output is utf-8") })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn run_verify(spec: &EnvSpec) -> Outcome {
    let oracle = oracularize(spec)?;
    let report = verify_equivalence(spec, &oracle)?;
    let n = oracle.size();
    let k = oracle.marked_count();
    let m = spec.episode_length();
    let mut rows = Vec::with_capacity(n);
    let mut lines = vec![format!("maze {}: N = {n}, k = {k}, k/N = {}", spec.name, k as f64 / n as f64)];
    for (rank, &phase) in oracle.phases().iter().enumerate() {
        let seq = crate::env::decode_sequence(rank, spec.n_actions(), m);
        let agree = !report.mismatches.contains(&rank);
        if n <= 64 {
            lines.push(format!("  {} phase {:+}", spec.format_sequence(&seq), phase));
        }
        rows.push(vec![
            rank.to_string(),
            spec.format_sequence(&seq),
            u8::from(spec.lambda(&seq)?).to_string(),
            phase.to_string(),
            u8::from(agree).to_string(),
        ]);
    }
    let verified = report.is_equivalent();
    if verified {
        lines.push(format!("EQUIVALENT, {}/{} branches, 2M={} steps/call", report.agreeing, n, 2 * m));
    } else {
        let first = report.mismatches[0];
        let seq = crate::env::decode_sequence(first, spec.n_actions(), m);
        lines.push(format!(
            "NOT EQUIVALENT, {}/{} branches agree; first failing branch {} ({})",
            report.agreeing,
            n,
            first,
            spec.format_sequence(&seq)
        ));
    }
    let l = report.ledger;
    lines.push(format!(
        "ledger: oracle_calls={} classical_epochs={} interaction_steps={}",
        l.oracle_calls(),
        l.classical_epochs(),
        l.interaction_steps()
    ));
    let raw = csv_table("verify_oracle.csv", &["branch", "sequence", "lambda", "phase", "agree"], rows)?;
    let summary = csv_table(
        "summary.csv",
        &["n", "k", "density", "branches_agreeing", "equivalent", "oracle_calls", "interaction_steps"],
        vec![vec![
            n.to_string(),
            k.to_string(),
            (k as f64 / n as f64).to_string(),
            report.agreeing.to_string(),
            u8::from(verified).to_string(),
            l.oracle_calls().to_string(),
            l.interaction_steps().to_string(),
        ]],
    )?;
    Ok((vec![raw, summary], lines, verified))
}

fn run_explore(config: &ExperimentConfig, spec: &EnvSpec) -> Outcome {
    let oracle = oracularize(spec)?;
    let n = oracle.size() as u64;
    let m = spec.episode_length() as u64;
    let budget = config.explore.budget.unwrap_or(2 * m * (8.0 * (n as f64).sqrt()).ceil() as u64);
    let cap = config.explore.classical_cap.unwrap_or(64 * n);
    let bbht = config.learn.hybrid.bbht;
    let runs = config
        .seed_list()
        .par_iter()
        .map(|&seed| explore_seed(spec, &oracle, budget, cap, bbht, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(2 * runs.len());
    for r in &runs {
        rows.push(vec![
            r.seed.to_string(),
            "quantum".into(),
            u8::from(r.quantum_found).to_string(),
            r.quantum.oracle_calls().to_string(),
            r.quantum.interaction_steps().to_string(),
        ]);
        rows.push(vec![
            r.seed.to_string(),
            "classical".into(),
            u8::from(r.classical_trials.is_some()).to_string(),
            r.classical.classical_epochs().to_string(),
            r.classical.interaction_steps().to_string(),
        ]);
    }
    let raw = csv_table("explore.csv", &["seed", "arm", "found", "queries", "interaction_steps"], rows)?;

    let q: Vec<f64> = runs.iter().map(|r| r.quantum.oracle_calls() as f64).collect();
    let c: Vec<f64> = runs.iter().map(|r| r.classical.classical_epochs() as f64).collect();
    let q_found = runs.iter().filter(|r| r.quantum_found).count() as f64 / runs.len() as f64;
    let c_found = runs.iter().filter(|r| r.classical_trials.is_some()).count() as f64 / runs.len() as f64;
    let (qm, qse) = mean_se(&q);
    let (cm, cse) = mean_se(&c);
    let summary = csv_table(
        "summary.csv",
        &["arm", "runs", "found_rate", "mean_queries", "se_queries", "n"],
        vec![
            vec!["quantum".into(), runs.len().to_string(), q_found.to_string(), qm.to_string(), qse.to_string(), n.to_string()],
            vec!["classical".into(), runs.len().to_string(), c_found.to_string(), cm.to_string(), cse.to_string(), n.to_string()],
        ],
    )?;
    let lines = vec![
        format!("maze {}: N = {n}, quantum budget {budget} steps, classical cap {cap} epochs", spec.name),
        format!("quantum: found {q_found:.3}, mean oracle calls {qm:.1} (sqrt N = {:.1})", (n as f64).sqrt()),
        format!("classical: found {c_found:.3}, mean trials {cm:.1} (N = {n})"),
    ];
    Ok((vec![raw, summary], lines, true))
}

fn run_learn(config: &ExperimentConfig, spec: &EnvSpec) -> Outcome {
    let oracle = oracularize(spec)?;
    let total_steps = match config.learn.total_steps {
        Some(b) => b,
        None => ComparisonConfig::matched_budget(spec, config.learn.exploit_epochs)?,
    };
    let cfg = ComparisonConfig {
        gamma: config.agent.gamma,
        eta: config.agent.eta,
        total_steps,
        tester: config.learn.tester,
        hybrid: config.learn.hybrid,
    };
    let report = compare_budgeted(spec, &oracle, &cfg, &config.seed_list())?;

    let mut rows = Vec::with_capacity(2 * report.runs.len());
    for r in &report.runs {
        for (arm, res) in [("classical", &r.classical), ("hybrid", &r.hybrid)] {
            res.ledger.verify()?;
            rows.push(vec![
                r.seed.to_string(),
                arm.into(),
                res.merit.to_string(),
                res.ledger.oracle_calls().to_string(),
                res.ledger.interaction_steps().to_string(),
                u8::from(res.succeeded).to_string(),
                opt(res.first_reward_epoch),
            ]);
        }
    }
    let raw = csv_table(
        "learn.csv",
        &["seed", "arm", "merit", "oracle_calls", "interaction_steps", "succeeded", "first_reward_epoch"],
        rows,
    )?;

    let mut summary_rows = Vec::new();
    let mut lines = vec![format!(
        "maze {}: budget {total_steps} steps per arm, tester {}, {} seeds",
        spec.name,
        cfg.tester,
        report.runs.len()
    )];
    for (arm, merits, success, calls, steps) in [
        (
            "classical",
            report.classical_merits(),
            report.classical_success_rate(),
            report.runs.iter().map(|r| r.classical.ledger.oracle_calls()).sum::<u64>(),
            report.runs.iter().map(|r| r.classical.ledger.interaction_steps()).sum::<u64>(),
        ),
        (
            "hybrid",
            report.hybrid_merits(),
            report.hybrid_success_rate(),
            report.runs.iter().map(|r| r.hybrid.ledger.oracle_calls()).sum::<u64>(),
            report.runs.iter().map(|r| r.hybrid.ledger.interaction_steps()).sum::<u64>(),
        ),
    ] {
        let (mean, se) = mean_se(&merits);
        summary_rows.push(vec![
            arm.into(),
            merits.len().to_string(),
            mean.to_string(),
            se.to_string(),
            (mean - 1.96 * se).to_string(),
            (mean + 1.96 * se).to_string(),
            success.to_string(),
            calls.to_string(),
            steps.to_string(),
        ]);
        lines.push(format!("{arm}: merit {mean:.4} +- {:.4} (95%), success {success:.3}", 1.96 * se));
    }
    let summary = csv_table(
        "summary.csv",
        &[
            "arm",
            "runs",
            "mean_merit",
            "se_merit",
            "ci95_low",
            "ci95_high",
            "success_rate",
            "oracle_calls",
            "interaction_steps",
        ],
        summary_rows,
    )?;
    Ok((vec![raw, summary], lines, true))
}

fn run_metalearn(config: &ExperimentConfig, spec: &EnvSpec) -> Outcome {
    let meta = &config.metalearn;
    let grid = &meta.grid;
    let evaluator = GridEvaluator { spec, grid, ctx: meta.eval };
    let values = EvalTable::new(&evaluator).fill()?;

    let mut sorted = values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let best = sorted[0];
    let third = sorted[sorted.len().min(3) - 1];

    let point = |k: usize| grid.point(k);
    let mut rows = Vec::new();
    let mut lines = vec![format!(
        "maze {}: {}x{} (gamma, eta) grid, {} replicates, {} train / {} eval epochs",
        spec.name,
        grid.gamma.len(),
        grid.eta.len(),
        meta.eval.seeds.replicates,
        meta.eval.train_epochs,
        meta.eval.eval_epochs
    )];
    let mut methods = meta.methods.clone();
    methods.sort();
    methods.dedup();
    for method in methods {
        match method {
            MetaMethod::Grid => {
                let r = grid_search(&mut EvalTable::new(&values))?;
                rows.push(meta_row(method, r.index, r.value, r.queries, 0, None, point(r.index)));
            }
            MetaMethod::Unimodal => {
                // bisection along gamma for each eta; best row wins
                let mut queries = 0;
                let mut unimodal_rows = 0;
                let mut best_k = 0;
                let mut best_v = f64::NEG_INFINITY;
                for e in 0..grid.eta.len() {
                    let axis: Vec<f64> = (0..grid.gamma.len()).map(|g| values[grid.index(g, e)]).collect();
                    let r = unimodal_search(&mut EvalTable::new(&axis), true)?;
                    queries += r.queries;
                    unimodal_rows += usize::from(r.unimodal == Some(true));
                    if r.value > best_v {
                        best_v = r.value;
                        best_k = grid.index(r.index, e);
                    }
                }
                lines.push(format!("unimodal audit: {unimodal_rows}/{} eta rows unimodal in gamma", grid.eta.len()));
                rows.push(meta_row(method, best_k, best_v, queries, 0, None, point(best_k)));
            }
            MetaMethod::Quantum => {
                let runs = config
                    .seed_list()
                    .par_iter()
                    .map(|&seed| {
                        quantum_meta_opt(&mut EvalTable::new(&values), &meta.dh, &mut stream_rng(seed, 0))
                            .map(|r| (seed, r))
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (seed, r) in runs {
                    let calls = r.ledger.oracle_calls();
                    rows.push(meta_row(method, r.index, r.value, calls as usize, calls, Some(seed), point(r.index)));
                }
            }
        }
    }
    let raw = csv_table(
        "metalearn.csv",
        &["method", "best_k", "best_eval", "queries", "oracle_calls", "seed", "gamma", "eta"],
        rows.clone(),
    )?;

    let state = SuperposedState::build(&values, meta.bins)?;
    let table_rows = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (g, e) = point(k);
            vec![k.to_string(), g.to_string(), e.to_string(), v.to_string(), crate::metalearn::eval_bin(*v, meta.bins).to_string()]
        })
        .collect();
    let eval_table = csv_table("eval_table.csv", &["k", "gamma", "eta", "eval", "bin"], table_rows)?;
    lines.push(format!(
        "superposed state: {} configurations x {} bins, top bin {} holds {:?}",
        state.n_configs(),
        state.bins(),
        state.max_bin(),
        state.preimage(state.max_bin())
    ));

    let mut summary_rows = Vec::new();
    for method in ["grid", "unimodal", "quantum"] {
        let mine: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == method).collect();
        if mine.is_empty() {
            continue;
        }
        let evals: Vec<f64> = mine.iter().map(|r| r[2].parse().expect("written above")).collect();
        let queries: Vec<f64> = mine.iter().map(|r| r[3].parse().expect("written above")).collect();
        let calls: Vec<f64> = mine.iter().map(|r| r[4].parse().expect("written above")).collect();
        let top1 = evals.iter().filter(|&&v| v >= best).count() as f64 / evals.len() as f64;
        let top3 = evals.iter().filter(|&&v| v >= third).count() as f64 / evals.len() as f64;
        let (mean_eval, _) = mean_se(&evals);
        summary_rows.push(vec![
            method.to_string(),
            mine.len().to_string(),
            mean_eval.to_string(),
            top1.to_string(),
            top3.to_string(),
            mean_se(&queries).0.to_string(),
            mean_se(&calls).0.to_string(),
        ]);
        lines.push(format!(
            "{method}: {} run(s), mean best eval {mean_eval:.4}, top-1 rate {top1:.3}, top-3 rate {top3:.3}, mean queries {:.1}",
            mine.len(),
            mean_se(&queries).0
        ));
    }
    let summary = csv_table(
        "summary.csv",
        &["method", "runs", "mean_best_eval", "top1_rate", "top3_rate", "mean_queries", "mean_oracle_calls"],
        summary_rows,
    )?;
    Ok((vec![raw, eval_table, summary], lines, true))
}

fn meta_row(
    method: MetaMethod,
    k: usize,
    value: f64,
    queries: usize,
    oracle_calls: u64,
    seed: Option<u64>,
    (gamma, eta): (f64, f64),
) -> Vec<String> {
    vec![
        method.name().into(),
        k.to_string(),
        value.to_string(),
        queries.to_string(),
        oracle_calls.to_string(),
        opt(seed),
        gamma.to_string(),
        eta.to_string(),
    ]
}
