//! Experiment runners: the two benchmark-game studies and the random-game
//! batch. Everything here is computation only; [`crate::artifacts`] writes
//! the results out.

use lqdg_core::gen::{self, GenSpec};
use lqdg_core::{
    normalized_error, run_solver, run_solver_observed, Algorithm, GameInstance, LqdgError,
    PolicySet, SolveResult, SolverConfig,
};
use rayon::prelude::*;

use crate::summary::{summarize, BenchSummary, InstanceOutcome};

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// One stopping threshold for all algorithms so iteration counts compare.
    pub epsilon: f64,
    /// `None` keeps each algorithm's default cap.
    pub max_iterations: Option<usize>,
    pub equilibrium_tolerance: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_iterations: None,
            equilibrium_tolerance: 1e-3,
        }
    }
}

impl RunSettings {
    pub fn config(&self, alg: Algorithm, players: usize, eta: Option<f64>) -> SolverConfig {
        let mut cfg = SolverConfig::new(alg, players).with_epsilon(self.epsilon);
        if let Some(eta) = eta {
            cfg = cfg.with_eta(eta);
        }
        if let Some(max) = self.max_iterations {
            cfg = cfg.with_max_iterations(max);
        }
        cfg.equilibrium_tolerance = self.equilibrium_tolerance;
        cfg
    }
}

/// One solver run tracked against a reference equilibrium.
#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub label: String,
    pub algorithm: Algorithm,
    pub eta: Option<f64>,
    pub result: SolveResult,
    /// `K_0, K_1, …`; only filled when gain recording was requested.
    pub gains: Vec<PolicySet>,
}

impl TrackedRun {
    pub fn reached(&self) -> bool {
        self.result.reached_reference()
    }
}

pub fn run_label(alg: Algorithm, eta: Option<f64>) -> String {
    match eta {
        Some(e) if alg.is_policy_gradient() => format!("{}(eta={e})", alg.label()),
        _ => alg.label().to_string(),
    }
}

/// Equilibrium computed by value iteration; errors if VI does not converge.
pub fn reference_equilibrium(inst: &GameInstance, settings: &RunSettings) -> Result<PolicySet, LqdgError> {
    let cfg = settings.config(Algorithm::ValueIteration, inst.players(), None);
    let res = run_solver(inst, None, &cfg, None)?;
    if res.converged() {
        Ok(res.final_policies)
    } else {
        Err(LqdgError::Numerical(format!(
            "reference value iteration ended with status {}",
            res.status
        )))
    }
}

pub fn tracked_run(
    inst: &GameInstance,
    k0: Option<&PolicySet>,
    alg: Algorithm,
    eta: Option<f64>,
    settings: &RunSettings,
    reference: Option<&PolicySet>,
    record_gains: bool,
) -> Result<TrackedRun, LqdgError> {
    let cfg = settings.config(alg, inst.players(), eta);
    let mut gains = Vec::new();
    if record_gains {
        if let Some(k0) = k0 {
            gains.push(k0.clone());
        }
    }
    let result = run_solver_observed(inst, k0, &cfg, reference, &mut |_, k| {
        if record_gains {
            gains.push(k.clone());
        }
    })?;
    Ok(TrackedRun {
        label: run_label(alg, eta),
        algorithm: alg,
        eta,
        result,
        gains,
    })
}

/// Convergence-speed comparison on the benchmark game from the r = 0.1
/// initial gains.
#[derive(Debug, Clone)]
pub struct ExpAReport {
    pub reference: PolicySet,
    pub k0: PolicySet,
    pub initial_e_norm: f64,
    pub runs: Vec<TrackedRun>,
}

impl ExpAReport {
    pub fn run(&self, alg: Algorithm, eta: Option<f64>) -> Option<&TrackedRun> {
        self.runs
            .iter()
            .find(|r| r.algorithm == alg && (eta.is_none() || r.eta == eta))
    }

    /// PI needs strictly fewer iterations than GNPG.
    pub fn pi_faster_than_gnpg(&self) -> bool {
        match (
            self.run(Algorithm::PolicyIteration, None),
            self.run(Algorithm::GaussNewtonPg, None),
        ) {
            (Some(pi), Some(gn)) => pi.reached() && pi.result.iterations < gn.result.iterations,
            _ => false,
        }
    }
}

pub const EXP_A_NPG_ETAS: [f64; 3] = [1e-3, 1e-2, 1e-1];

pub fn exp_a(settings: &RunSettings, npg_etas: &[f64], gnpg_eta: f64) -> Result<ExpAReport, LqdgError> {
    let inst = gen::paper_instance();
    let reference = reference_equilibrium(&inst, settings)?;
    let k0 = gen::paper_k0_near();
    let mut plan = vec![
        (Algorithm::PolicyIteration, None),
        (Algorithm::GaussNewtonPg, Some(gnpg_eta)),
    ];
    plan.extend(npg_etas.iter().map(|&e| (Algorithm::NaturalPg, Some(e))));
    let runs = plan
        .into_par_iter()
        .map(|(alg, eta)| tracked_run(&inst, Some(&k0), alg, eta, settings, Some(&reference), false))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExpAReport {
        initial_e_norm: normalized_error(&k0, &reference)?,
        reference,
        k0,
        runs,
    })
}

#[derive(Debug, Clone)]
pub struct ExpBCase {
    pub name: String,
    pub radius: f64,
    pub k0: PolicySet,
    pub runs: Vec<TrackedRun>,
}

#[derive(Debug, Clone)]
pub struct ExpBReport {
    pub reference: PolicySet,
    pub cases: Vec<ExpBCase>,
}

impl ExpBReport {
    pub fn case(&self, name: &str) -> Option<&ExpBCase> {
        self.cases.iter().find(|c| c.name == name)
    }
}

impl ExpBCase {
    pub fn run(&self, alg: Algorithm) -> Option<&TrackedRun> {
        self.runs.iter().find(|r| r.algorithm == alg)
    }
}

/// Sensitivity to the initial policy: PI, GNPG and NPG from the r = 0.1 and
/// r = 0.5 initial gains, with full gain trajectories recorded.
pub fn exp_b(settings: &RunSettings, npg_eta: f64, gnpg_eta: f64) -> Result<ExpBReport, LqdgError> {
    let inst = gen::paper_instance();
    let reference = reference_equilibrium(&inst, settings)?;
    let plan = [
        (Algorithm::PolicyIteration, None),
        (Algorithm::GaussNewtonPg, Some(gnpg_eta)),
        (Algorithm::NaturalPg, Some(npg_eta)),
    ];
    let cases = [("r0.1", 0.1, gen::paper_k0_near()), ("r0.5", 0.5, gen::paper_k0_far())]
        .into_iter()
        .map(|(name, radius, k0)| {
            let runs = plan
                .par_iter()
                .map(|&(alg, eta)| tracked_run(&inst, Some(&k0), alg, eta, settings, Some(&reference), true))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ExpBCase {
                name: name.to_string(),
                radius,
                k0,
                runs,
            })
        })
        .collect::<Result<Vec<_>, LqdgError>>()?;
    Ok(ExpBReport { reference, cases })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomBenchConfig {
    pub n: usize,
    pub m: usize,
    pub players: usize,
    pub count: usize,
    pub seed: u64,
    /// Algorithms compared against the VI reference, with optional step size.
    pub algorithms: Vec<(Algorithm, Option<f64>)>,
    pub settings: RunSettings,
}

impl RandomBenchConfig {
    pub fn new(n: usize, m: usize, players: usize, count: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            players,
            count,
            seed,
            algorithms: vec![
                (Algorithm::PolicyIteration, None),
                (Algorithm::NaturalPg, Some(0.1)),
                (Algorithm::GaussNewtonPg, Some(0.5)),
            ],
            settings: RunSettings::default(),
        }
    }

    /// Seed of the `index`-th instance.
    pub fn instance_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

#[derive(Debug, Clone)]
pub struct RandomBenchReport {
    /// Per-instance rows ordered by instance index; VI reference rows first
    /// within each instance.
    pub outcomes: Vec<InstanceOutcome>,
    pub summary: BenchSummary,
}

fn outcome(
    index: usize,
    seed: u64,
    alg: Algorithm,
    res: Result<SolveResult, LqdgError>,
    convergent: impl Fn(&SolveResult) -> bool,
) -> InstanceOutcome {
    match res {
        Ok(r) => InstanceOutcome {
            index,
            seed,
            algorithm: alg,
            status: Some(r.status),
            iterations: r.iterations,
            final_e_norm: r.final_e_norm(),
            elapsed_ns: r.trace.last().map_or(0, |t| t.elapsed_ns),
            convergent: convergent(&r),
            note: r.message.unwrap_or_default(),
        },
        Err(e) => InstanceOutcome {
            index,
            seed,
            algorithm: alg,
            status: None,
            iterations: 0,
            final_e_norm: None,
            elapsed_ns: 0,
            convergent: false,
            note: e.to_string(),
        },
    }
}

fn bench_instance(cfg: &RandomBenchConfig, index: usize) -> Vec<InstanceOutcome> {
    let seed = cfg.instance_seed(index);
    let spec = GenSpec::uniform(cfg.n, cfg.players, cfg.m, seed);
    let vi_cfg = cfg.settings.config(Algorithm::ValueIteration, cfg.players, None);
    let inst = match gen::random_instance(&spec) {
        Ok(i) => i,
        Err(e) => return vec![outcome(index, seed, Algorithm::ValueIteration, Err(e), |_| false)],
    };
    let vi = run_solver(&inst, None, &vi_cfg, None);
    let reference = match &vi {
        Ok(r) if r.converged() => Some(r.final_policies.clone()),
        _ => None,
    };
    let mut rows = vec![outcome(index, seed, Algorithm::ValueIteration, vi, |r| r.converged())];
    let Some(reference) = reference else {
        return rows;
    };
    let k0 = gen::zero_policy(&inst);
    for &(alg, eta) in &cfg.algorithms {
        let sc = cfg.settings.config(alg, cfg.players, eta);
        let res = run_solver(&inst, Some(&k0), &sc, Some(&reference));
        rows.push(outcome(index, seed, alg, res, |r| r.reached_reference()));
    }
    rows
}

/// Generates `count` random games, computes a VI reference for each and
/// runs every configured algorithm from the zero policy. Instances are
/// processed in parallel; results are ordered by index.
pub fn random_bench(cfg: &RandomBenchConfig) -> Result<RandomBenchReport, LqdgError> {
    if cfg.count == 0 {
        return Err(LqdgError::InvalidArgument("count must be at least 1".into()));
    }
    let outcomes: Vec<InstanceOutcome> = (0..cfg.count)
        .into_par_iter()
        .map(|i| bench_instance(cfg, i))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let skipped: Vec<usize> = outcomes
        .iter()
        .filter(|o| o.algorithm == Algorithm::ValueIteration && !o.convergent)
        .map(|o| o.index)
        .collect();
    let algs: Vec<Algorithm> = cfg.algorithms.iter().map(|(a, _)| *a).collect();
    let summary = BenchSummary {
        n: cfg.n,
        players: cfg.players,
        m: cfg.m,
        count: cfg.count,
        base_seed: cfg.seed,
        equilibrium_tolerance: cfg.settings.equilibrium_tolerance,
        algorithms: summarize(&outcomes, &algs, &skipped),
        skipped_instances: skipped,
    };
    Ok(RandomBenchReport { outcomes, summary })
}
