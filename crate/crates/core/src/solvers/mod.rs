//! Equilibrium-seeking algorithms with a shared iteration driver.
//!
//! Every algorithm stops when `Σ_i ‖K^i_{k+1} − K^i_k‖_F ≤ ε` *and* the
//! coupled Riccati residual of the new iterate is at most `10·ε`, so a
//! `Converged` result is always a certified fixed point.

mod gradient;
mod policy_iteration;
mod value_iteration;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LqdgError, Result};
use crate::linalg;
use crate::metrics::normalized_error;
use crate::model::{self, GameInstance, PolicySet, StabilityReport, ValueSet};

pub use gradient::{gauss_newton_pg, gradient, natural_pg, vanilla_pg};
pub use policy_iteration::{assemble_policy_update_system, policy_iteration};
pub use value_iteration::value_iteration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "VI")]
    ValueIteration,
    #[serde(rename = "PI")]
    PolicyIteration,
    #[serde(rename = "VPG")]
    VanillaPg,
    #[serde(rename = "NPG")]
    NaturalPg,
    #[serde(rename = "GNPG")]
    GaussNewtonPg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ValueIteration,
        Algorithm::PolicyIteration,
        Algorithm::VanillaPg,
        Algorithm::NaturalPg,
        Algorithm::GaussNewtonPg,
    ];

    pub fn is_policy_gradient(self) -> bool {
        matches!(
            self,
            Algorithm::VanillaPg | Algorithm::NaturalPg | Algorithm::GaussNewtonPg
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::ValueIteration => "VI",
            Algorithm::PolicyIteration => "PI",
            Algorithm::VanillaPg => "VPG",
            Algorithm::NaturalPg => "NPG",
            Algorithm::GaussNewtonPg => "GNPG",
        }
    }

    /// Step size used when none is given.
    pub fn default_eta(self) -> f64 {
        match self {
            Algorithm::VanillaPg => 1e-3,
            Algorithm::NaturalPg => 0.1,
            Algorithm::GaussNewtonPg => 0.5,
            Algorithm::ValueIteration | Algorithm::PolicyIteration => 1.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = LqdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vi" => Ok(Algorithm::ValueIteration),
            "pi" => Ok(Algorithm::PolicyIteration),
            "vpg" => Ok(Algorithm::VanillaPg),
            "npg" => Ok(Algorithm::NaturalPg),
            "gnpg" => Ok(Algorithm::GaussNewtonPg),
            other => Err(LqdgError::InvalidArgument(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Per-player step sizes; unused by VI and PI.
    pub eta: Vec<f64>,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub divergence_norm_cap: f64,
    pub equilibrium_tolerance: f64,
}

impl SolverConfig {
    /// Defaults: ε = 1e-8 and 500 iterations for VI/PI, ε = 1e-6 and 10⁵
    /// iterations for the gradient methods, gain cap 1e6.
    pub fn new(algorithm: Algorithm, players: usize) -> Self {
        let pg = algorithm.is_policy_gradient();
        Self {
            algorithm,
            eta: vec![algorithm.default_eta(); players],
            epsilon: if pg { 1e-6 } else { 1e-8 },
            max_iterations: if pg { 100_000 } else { 500 },
            divergence_norm_cap: 1e6,
            equilibrium_tolerance: 1e-3,
        }
    }

    /// Same step size for every player.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta.iter_mut().for_each(|e| *e = eta);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self, players: usize) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(LqdgError::InvalidArgument("epsilon must be positive".into()));
        }
        if self.divergence_norm_cap.is_nan()
            || self.divergence_norm_cap <= 0.0
            || self.equilibrium_tolerance.is_nan()
            || self.equilibrium_tolerance <= 0.0 {
            return Err(LqdgError::InvalidArgument(
                "divergence cap and equilibrium tolerance must be positive".into(),
            ));
        }
        if self.algorithm.is_policy_gradient() {
            if self.eta.len() != players {
                return Err(LqdgError::InvalidArgument(format!(
                    "{} step sizes for {players} players",
                    self.eta.len()
                )));
            }
            if self.eta.iter().any(|&e| !e.is_finite() || e <= 0.0) {
                return Err(LqdgError::InvalidArgument("step sizes must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub policy_delta: f64,
    pub e_norm: Option<f64>,
    #[serde(rename = "rho")]
    pub closed_loop_radius: f64,
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    DivergedUnstable,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::DivergedUnstable => "DivergedUnstable",
            SolveStatus::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_policies: PolicySet,
    pub final_values: Option<ValueSet>,
    pub trace: Vec<IterationRecord>,
    pub config: SolverConfig,
    /// Stabilizability/detectability predicates, filled in on convergence.
    pub report: Option<StabilityReport>,
    /// Diagnostic for `NumericalFailure` and `DivergedUnstable` stops.
    pub message: Option<String>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Normalized error of the last trace record, if tracked.
    pub fn final_e_norm(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.e_norm)
    }

    /// Whether the final iterate lies within `equilibrium_tolerance`
    /// (normalized error) of the reference the run was tracked against.
    pub fn reached_reference(&self) -> bool {
        self.final_e_norm()
            .is_some_and(|e| e <= self.config.equilibrium_tolerance)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ResultDoc {
            status: self.status,
            iterations: self.iterations,
            k: self.final_policies.gains().iter().map(linalg::to_rows).collect(),
            p: self
                .final_values
                .as_ref()
                .map(|v| v.values().iter().map(linalg::to_rows).collect()),
            trace: &self.trace,
            config: &self.config,
            report: self.report.as_ref(),
            message: self.message.as_deref(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Trace as CSV, header `k,policy_delta,e_norm,rho,elapsed_ns`; an
    /// absent `e_norm` is an empty field.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("k,policy_delta,e_norm,rho,elapsed_ns\n");
        for r in &self.trace {
            let e = r.e_norm.map(|e| format!("{e:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{},{:e},{}\n",
                r.k, r.policy_delta, e, r.closed_loop_radius, r.elapsed_ns
            ));
        }
        out
    }
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    status: SolveStatus,
    iterations: usize,
    #[serde(rename = "K")]
    k: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    p: Option<Vec<Vec<Vec<f64>>>>,
    trace: &'a [IterationRecord],
    config: &'a SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<&'a str>,
}

/// Dispatches to the configured algorithm. `k0` is required by every
/// algorithm except VI.
pub fn run_solver(
    inst: &GameInstance,
    k0: Option<&PolicySet>,
    cfg: &SolverConfig,
    reference: Option<&PolicySet>,
) -> Result<SolveResult> {
    run_solver_observed(inst, k0, cfg, reference, &mut |_, _| {})
}

/// Like [`run_solver`], additionally handing every new iterate `(k, K_k)` to
/// `observer`.
pub fn run_solver_observed(
    inst: &GameInstance,
    k0: Option<&PolicySet>,
    cfg: &SolverConfig,
    reference: Option<&PolicySet>,
    observer: &mut dyn FnMut(usize, &PolicySet),
) -> Result<SolveResult> {
    if let Some(r) = reference {
        r.check_dims(inst)?;
    }
    let need_k0 = || {
        k0.ok_or_else(|| {
            LqdgError::InvalidArgument(format!("{} requires an initial policy", cfg.algorithm))
        })
    };
    let tracker = Tracker { reference, observer };
    match cfg.algorithm {
        Algorithm::ValueIteration => value_iteration::run(inst, cfg, tracker),
        Algorithm::PolicyIteration => drive(inst, need_k0()?, cfg, tracker, policy_iteration::step),
        Algorithm::VanillaPg => drive(inst, need_k0()?, cfg, tracker, gradient::vanilla_step),
        Algorithm::NaturalPg => drive(inst, need_k0()?, cfg, tracker, gradient::natural_step),
        Algorithm::GaussNewtonPg => drive(inst, need_k0()?, cfg, tracker, gradient::gauss_newton_step),
    }
}

pub(crate) struct Tracker<'a> {
    reference: Option<&'a PolicySet>,
    observer: &'a mut dyn FnMut(usize, &PolicySet),
}

impl Tracker<'_> {
    fn e_norm(&self, pol: &PolicySet) -> Option<f64> {
        self.reference.and_then(|r| normalized_error(pol, r).ok())
    }
}

/// Current iterate together with its evaluation, as seen by an update rule.
pub(crate) struct Iterate<'a> {
    pub inst: &'a GameInstance,
    pub policy: &'a PolicySet,
    pub values: &'a ValueSet,
    pub closed_loop: &'a DMatrix<f64>,
    pub cfg: &'a SolverConfig,
}

pub(crate) type UpdateRule = fn(&Iterate<'_>) -> Result<PolicySet>;

pub(crate) struct Recorder {
    start: Instant,
    pub trace: Vec<IterationRecord>,
}

impl Recorder {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            trace: Vec::new(),
        }
    }

    pub fn push(&mut self, k: usize, policy_delta: f64, e_norm: Option<f64>, rho: f64) {
        let elapsed = self.start.elapsed().as_nanos() as u64;
        self.trace.push(IterationRecord {
            k,
            policy_delta,
            e_norm,
            closed_loop_radius: rho,
            elapsed_ns: elapsed,
        });
    }
}

pub(crate) fn finish(
    inst: &GameInstance,
    status: SolveStatus,
    policies: PolicySet,
    values: Option<ValueSet>,
    rec: Recorder,
    cfg: &SolverConfig,
    message: Option<String>,
) -> SolveResult {
    let report = if status == SolveStatus::Converged {
        model::check_equilibrium_conditions(inst, &policies).ok()
    } else {
        None
    };
    SolveResult {
        status,
        iterations: rec.trace.len(),
        final_policies: policies,
        final_values: values,
        trace: rec.trace,
        config: cfg.clone(),
        report,
        message,
    }
}

pub(crate) fn check_initial(inst: &GameInstance, k0: &PolicySet, cfg: &SolverConfig) -> Result<(DMatrix<f64>, ValueSet)> {
    cfg.validate(inst.players())?;
    k0.check_dims(inst)?;
    let acl = model::closed_loop_unchecked(inst, k0);
    let rho = linalg::spectral_radius(&acl)?;
    if rho >= 1.0 {
        return Err(LqdgError::Unstable { radius: rho });
    }
    let values = model::evaluate_with_closed_loop(inst, k0, &acl)?;
    Ok((acl, values))
}

/// Shared loop for PI and the gradient methods: evaluate, update, record,
/// test stability and convergence.
pub(crate) fn drive(
    inst: &GameInstance,
    k0: &PolicySet,
    cfg: &SolverConfig,
    tracker: Tracker<'_>,
    update: UpdateRule,
) -> Result<SolveResult> {
    let (mut acl, mut values) = check_initial(inst, k0, cfg)?;
    let mut policy = k0.clone();
    let mut rec = Recorder::new();
    for k in 1..=cfg.max_iterations {
        let it = Iterate {
            inst,
            policy: &policy,
            values: &values,
            closed_loop: &acl,
            cfg,
        };
        let next = match update(&it) {
            Ok(p) if p.is_finite() => p,
            Ok(_) => {
                let msg = "non-finite gain update".to_string();
                return Ok(finish(inst, SolveStatus::NumericalFailure, policy, Some(values), rec, cfg, Some(msg)));
            }
            Err(e) => {
                return Ok(finish(inst, SolveStatus::NumericalFailure, policy, Some(values), rec, cfg, Some(e.to_string())));
            }
        };
        let delta = next.distance(&policy);
        let next_acl = model::closed_loop_unchecked(inst, &next);
        let rho = match linalg::spectral_radius(&next_acl) {
            Ok(r) => r,
            Err(e) => {
                return Ok(finish(inst, SolveStatus::NumericalFailure, next, None, rec, cfg, Some(e.to_string())));
            }
        };
        rec.push(k, delta, tracker.e_norm(&next), rho);
        (tracker.observer)(k, &next);
        if rho >= 1.0 || next.max_gain_norm() > cfg.divergence_norm_cap {
            let msg = format!(
                "iterate left the stabilizing set (rho = {rho:.6}, max gain norm = {:.3e})",
                next.max_gain_norm()
            );
            return Ok(finish(inst, SolveStatus::DivergedUnstable, next, None, rec, cfg, Some(msg)));
        }
        let next_values = match model::evaluate_with_closed_loop(inst, &next, &next_acl) {
            Ok(v) => v,
            Err(e) => {
                return Ok(finish(inst, SolveStatus::NumericalFailure, next, None, rec, cfg, Some(e.to_string())));
            }
        };
        policy = next;
        values = next_values;
        acl = next_acl;
        if delta <= cfg.epsilon && certified(inst, &policy, &values, cfg) {
            return Ok(finish(inst, SolveStatus::Converged, policy, Some(values), rec, cfg, None));
        }
    }
    Ok(finish(inst, SolveStatus::MaxIterations, policy, Some(values), rec, cfg, None))
}

pub(crate) fn certified(inst: &GameInstance, pol: &PolicySet, val: &ValueSet, cfg: &SolverConfig) -> bool {
    model::are_residual(inst, pol, val).is_ok_and(|r| r <= 10.0 * cfg.epsilon)
}

/// `(B^i)ᵀ P^i`, shared by every update rule so that algebraically equal
/// updates are also bitwise equal.
pub(crate) fn bt_p(inst: &GameInstance, values: &ValueSet, i: usize) -> DMatrix<f64> {
    inst.b(i).transpose() * values.value(i)
}

/// `R^i + (B^i)ᵀ P^i B^i`.
pub(crate) fn gain_hessian(inst: &GameInstance, btp: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
    inst.r(i) + btp * inst.b(i)
}
