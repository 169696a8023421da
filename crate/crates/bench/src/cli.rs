//! `lqdg` command-line front end.
//!
//! Exit codes: 0 success, 2 a run did not converge (or an expected ordering
//! did not hold), 1 usage or input error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lqdg_core::gen::{self, BallSpec};
use lqdg_core::{run_solver, Algorithm, GameInstance, PolicySet, SolverConfig};

use crate::artifacts::{self, slug, Emit};
use crate::experiments::{self, RandomBenchConfig, RunSettings, EXP_A_NPG_ETAS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "LQDG_SEED";

#[derive(Debug, Parser)]
#[command(name = "lqdg", version, about = "Nash equilibrium solvers for linear-quadratic dynamic games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more solvers on a single game.
    Solve(Args),
    /// Convergence speed on the benchmark game (r = 0.1 start).
    ExpA(Args),
    /// Sensitivity to the initial policy on the benchmark game.
    ExpB(Args),
    /// Convergence statistics over seeded random games.
    RandomBench(Args),
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// `paper` or a path to a game JSON file.
    #[arg(long, default_value = "paper")]
    pub instance: String,
    /// Algorithm(s): vi, pi, vpg, npg, gnpg. Repeatable.
    #[arg(long = "algo")]
    pub algos: Vec<Algorithm>,
    /// Step size(s); one value applies to every algorithm, otherwise paired
    /// with `--algo` in order. For exp-a these are the NPG step sizes.
    #[arg(long)]
    pub eta: Vec<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// `zero`, `ball:<r>` or a path to a policy JSON file.
    #[arg(long, default_value = "zero")]
    pub k0: String,
    /// `vi` or a path to a policy JSON file; enables normalized-error tracking.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub players: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "lqdg-out")]
    pub out: PathBuf,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, default_value = "csv,json,svg")]
    pub emit: Emit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Solve,
    ExpA,
    ExpB,
    RandomBench,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Paper,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum K0Source {
    Zero,
    Ball(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    ValueIteration,
    File(PathBuf),
}

/// Fully resolved settings of one CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub instance: InstanceSource,
    pub algorithms: Vec<Algorithm>,
    pub eta: Vec<f64>,
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    pub k0: K0Source,
    pub reference: Option<ReferenceSource>,
    pub count: usize,
    pub n: usize,
    pub m: usize,
    pub players: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit: Emit,
}

impl ExperimentConfig {
    /// `seed_override` is the value of `LQDG_SEED`, if set.
    pub fn from_args(experiment: Experiment, a: Args, seed_override: Option<&str>) -> Result<Self, String> {
        let seed = match seed_override {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| format!("{SEED_ENV} is not an unsigned integer: '{s}'"))?,
            None => a.seed,
        };
        let instance = match a.instance.as_str() {
            "paper" => InstanceSource::Paper,
            p => InstanceSource::File(PathBuf::from(p)),
        };
        let k0 = match a.k0.as_str() {
            "zero" => K0Source::Zero,
            s if s.starts_with("ball:") => {
                let r: f64 = s[5..].parse().map_err(|_| format!("bad ball radius in '{s}'"))?;
                if r.is_nan() || r <= 0.0 {
                    return Err("ball radius must be positive".into());
                }
                K0Source::Ball(r)
            }
            p => K0Source::File(PathBuf::from(p)),
        };
        let reference = a.reference.as_deref().map(|r| match r {
            "vi" => ReferenceSource::ValueIteration,
            p => ReferenceSource::File(PathBuf::from(p)),
        });
        if experiment == Experiment::RandomBench && a.count == 0 {
            return Err("--count must be at least 1".into());
        }
        if !a.eta.is_empty() && a.eta.len() != 1 && experiment != Experiment::ExpA && a.eta.len() != a.algos.len() {
            return Err("give one --eta, or one per --algo".into());
        }
        Ok(Self {
            experiment,
            instance,
            algorithms: a.algos,
            eta: a.eta,
            epsilon: a.epsilon,
            max_iterations: a.max_iters,
            k0,
            reference,
            count: a.count,
            n: a.n,
            m: a.m,
            players: a.players,
            seed,
            output_dir: a.out,
            emit: a.emit,
        })
    }

    fn eta_for(&self, index: usize) -> Option<f64> {
        match self.eta.len() {
            0 => None,
            1 => Some(self.eta[0]),
            _ => self.eta.get(index).copied(),
        }
    }

    fn settings(&self) -> RunSettings {
        let mut s = RunSettings::default();
        if let Some(e) = self.epsilon {
            s.epsilon = e;
        }
        s.max_iterations = self.max_iterations;
        s
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub fn load_instance(src: &InstanceSource) -> Result<GameInstance, String> {
    match src {
        InstanceSource::Paper => Ok(gen::paper_instance()),
        InstanceSource::File(p) => {
            GameInstance::from_json(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn load_policy(path: &Path, inst: &GameInstance) -> Result<PolicySet, String> {
    let pol = PolicySet::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    pol.check_dims(inst).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(pol)
}

fn fmt_gains(pol: &PolicySet) -> String {
    pol.gains()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let rows: Vec<String> = g
                .row_iter()
                .map(|r| r.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "))
                .collect();
            format!("K{} = [{}]", i + 1, rows.join("; "))
        })
        .collect::<Vec<_>>()
        .join("  ")
}

fn fmt_opt(e: Option<f64>) -> String {
    e.map_or_else(|| "-".into(), |e| format!("{e:.3e}"))
}

fn report_written(paths: std::io::Result<Vec<PathBuf>>) -> Result<(), String> {
    let paths = paths.map_err(|e| format!("writing artifacts: {e}"))?;
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_ERROR
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> i32 {
    match solve_inner(cfg) {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}

fn solve_inner(cfg: &ExperimentConfig) -> Result<i32, String> {
    let inst = load_instance(&cfg.instance)?;
    let algorithms = if cfg.algorithms.is_empty() {
        vec![Algorithm::ValueIteration]
    } else {
        cfg.algorithms.clone()
    };
    let vi_reference = || {
        experiments::reference_equilibrium(&inst, &RunSettings::default()).map_err(|e| e.to_string())
    };
    let reference = match &cfg.reference {
        None => None,
        Some(ReferenceSource::ValueIteration) => Some(vi_reference()?),
        Some(ReferenceSource::File(p)) => Some(load_policy(p, &inst)?),
    };
    let k0 = match &cfg.k0 {
        K0Source::Zero => gen::zero_policy(&inst),
        K0Source::File(p) => load_policy(p, &inst)?,
        K0Source::Ball(r) => {
            let center = match &reference {
                Some(r) => r.clone(),
                None => vi_reference()?,
            };
            gen::sample_policy_in_ball(&inst, &BallSpec::new(center, *r, cfg.seed)).map_err(|e| e.to_string())?
        }
    };
    let mut code = EXIT_OK;
    for (idx, &alg) in algorithms.iter().enumerate() {
        let mut sc = SolverConfig::new(alg, inst.players());
        if let Some(eta) = cfg.eta_for(idx) {
            sc = sc.with_eta(eta);
        }
        if let Some(e) = cfg.epsilon {
            sc = sc.with_epsilon(e);
        }
        if let Some(m) = cfg.max_iterations {
            sc = sc.with_max_iterations(m);
        }
        let k0_arg = (alg != Algorithm::ValueIteration).then_some(&k0);
        let res = run_solver(&inst, k0_arg, &sc, reference.as_ref()).map_err(|e| e.to_string())?;
        let label = experiments::run_label(alg, cfg.eta_for(idx).filter(|_| alg.is_policy_gradient()));
        println!(
            "{label}: status={} iterations={} e_norm={}",
            res.status,
            res.iterations,
            fmt_opt(res.final_e_norm())
        );
        println!("  {}", fmt_gains(&res.final_policies));
        if let Some(msg) = &res.message {
            println!("  note: {msg}");
        }
        report_written(artifacts::write_solve(
            &cfg.output_dir,
            &format!("solve_{}", slug(&label)),
            &res,
            cfg.emit,
        ))?;
        if !res.converged() {
            code = EXIT_NOT_CONVERGED;
        }
    }
    Ok(code)
}

pub fn cmd_exp_a(cfg: &ExperimentConfig) -> i32 {
    let etas = if cfg.eta.is_empty() { EXP_A_NPG_ETAS.to_vec() } else { cfg.eta.clone() };
    let rep = match experiments::exp_a(&cfg.settings(), &etas, 0.5) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!("reference: {}", fmt_gains(&rep.reference));
    println!("initial e_norm: {:.4}", rep.initial_e_norm);
    for run in &rep.runs {
        println!(
            "{:<16} status={:<16} iterations={:<7} e_norm={} reached={}",
            run.label,
            run.result.status.to_string(),
            run.result.iterations,
            fmt_opt(run.result.final_e_norm()),
            run.reached()
        );
    }
    let ordered = rep.pi_faster_than_gnpg();
    println!("PI fewer iterations than GNPG: {ordered}");
    if let Err(e) = report_written(artifacts::write_exp_a(&cfg.output_dir, &rep, cfg.emit)) {
        return fail(e);
    }
    if ordered {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

pub fn cmd_exp_b(cfg: &ExperimentConfig) -> i32 {
    let npg = cfg.eta.first().copied().unwrap_or(0.1);
    let rep = match experiments::exp_b(&cfg.settings(), npg, 0.5) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!("reference: {}", fmt_gains(&rep.reference));
    for case in &rep.cases {
        println!("case {} (r = {}):", case.name, case.radius);
        for run in &case.runs {
            println!(
                "  {:<16} status={:<16} iterations={:<7} e_norm={} reached={}",
                run.label,
                run.result.status.to_string(),
                run.result.iterations,
                fmt_opt(run.result.final_e_norm()),
                run.reached()
            );
        }
    }
    match report_written(artifacts::write_exp_b(&cfg.output_dir, &rep, cfg.emit)) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}

pub fn random_bench_config(cfg: &ExperimentConfig) -> RandomBenchConfig {
    let mut rb = RandomBenchConfig::new(cfg.n, cfg.m, cfg.players, cfg.count, cfg.seed);
    if !cfg.algorithms.is_empty() {
        rb.algorithms = cfg
            .algorithms
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != Algorithm::ValueIteration)
            .map(|(i, &a)| (a, cfg.eta_for(i).or(a.is_policy_gradient().then(|| a.default_eta()))))
            .collect();
    } else if let Some(eta) = cfg.eta_for(0) {
        for (a, e) in rb.algorithms.iter_mut() {
            if a.is_policy_gradient() {
                *e = Some(eta);
            }
        }
    }
    rb.settings = cfg.settings();
    rb
}

pub fn cmd_random_bench(cfg: &ExperimentConfig) -> i32 {
    let rb = random_bench_config(cfg);
    let rep = match experiments::random_bench(&rb) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let s = &rep.summary;
    println!(
        "n = {}, m_i = {}, N = {}: {} instances, {} skipped (reference VI did not converge)",
        s.n,
        s.m,
        s.players,
        s.count,
        s.skipped_instances.len()
    );
    println!("{:<6} {:>10} {:>8} {:>14}", "alg", "convergent", "total", "avg iters");
    for (name, a) in &s.algorithms {
        println!(
            "{:<6} {:>10} {:>8} {:>14}",
            name,
            a.convergent_cases,
            a.total_cases,
            a.average_iterations_over_convergent
                .map_or_else(|| "N/A".into(), |v| format!("{v:.1}"))
        );
    }
    match report_written(artifacts::write_random_bench(&cfg.output_dir, &rep, cfg.emit)) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}

/// Parses `argv`, applies `LQDG_SEED`, and runs the selected command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    let (exp, args) = match cli.command {
        Command::Solve(a) => (Experiment::Solve, a),
        Command::ExpA(a) => (Experiment::ExpA, a),
        Command::ExpB(a) => (Experiment::ExpB, a),
        Command::RandomBench(a) => (Experiment::RandomBench, a),
    };
    let cfg = match ExperimentConfig::from_args(exp, args, seed_env.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match exp {
        Experiment::Solve => cmd_solve(&cfg),
        Experiment::ExpA => cmd_exp_a(&cfg),
        Experiment::ExpB => cmd_exp_b(&cfg),
        Experiment::RandomBench => cmd_random_bench(&cfg),
    }
}
