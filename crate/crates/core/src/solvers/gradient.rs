//! Policy-gradient updates with model-based gradients.

use nalgebra::DMatrix;

use super::{bt_p, drive, gain_hessian, Iterate, SolveResult, SolverConfig, Tracker};
use crate::error::{LqdgError, Result};
use crate::linalg;
use crate::model::{self, effective_dynamics, GameInstance, PolicySet, ValueSet};

/// `(R^i + (B^i)ᵀP^iB^i) K^i + (B^i)ᵀP^iĀ^i`, the bracket shared by every
/// gradient-type update; it vanishes at a best response.
fn gain_defect(inst: &GameInstance, pol: &PolicySet, val: &ValueSet, i: usize) -> DMatrix<f64> {
    let btp = bt_p(inst, val, i);
    gain_hessian(inst, &btp, i) * pol.gain(i) + btp * effective_dynamics(inst, pol, i)
}

/// `∇_{K^i} J^i = 2[(R^i+(B^i)ᵀP^iB^i)K^i + (B^i)ᵀP^iĀ^i] Σ_K`.
pub fn gradient(inst: &GameInstance, pol: &PolicySet, i: usize) -> Result<DMatrix<f64>> {
    pol.check_dims(inst)?;
    if i >= inst.players() {
        return Err(LqdgError::InvalidArgument(format!("player index {i} out of range")));
    }
    let acl = model::closed_loop_unchecked(inst, pol);
    let val = model::evaluate_with_closed_loop(inst, pol, &acl)?;
    let sigma = linalg::solve_discrete_lyapunov_dual(&acl, inst.x0())?;
    Ok(gain_defect(inst, pol, &val, i) * sigma * 2.0)
}

pub(crate) fn vanilla_step(it: &Iterate<'_>) -> Result<PolicySet> {
    let sigma = linalg::solve_discrete_lyapunov_dual(it.closed_loop, it.inst.x0())?;
    let gains = (0..it.inst.players())
        .map(|i| {
            let grad = gain_defect(it.inst, it.policy, it.values, i) * &sigma * 2.0;
            it.policy.gain(i) - grad * it.cfg.eta[i]
        })
        .collect();
    Ok(PolicySet::from_unchecked(gains))
}

/// Natural gradient: `∇J^i Σ_K⁻¹ = 2[…]`, so Σ_K cancels. It is only
/// formed when `X0` is singular, to confirm Σ_K is invertible.
pub(crate) fn natural_step(it: &Iterate<'_>) -> Result<PolicySet> {
    if it.inst.x0().clone().cholesky().is_none() {
        let sigma = linalg::solve_discrete_lyapunov_dual(it.closed_loop, it.inst.x0())?;
        if sigma.cholesky().is_none() {
            return Err(LqdgError::Numerical("state covariance is singular".into()));
        }
    }
    let gains = (0..it.inst.players())
        .map(|i| {
            let step = gain_defect(it.inst, it.policy, it.values, i) * (2.0 * it.cfg.eta[i]);
            it.policy.gain(i) - step
        })
        .collect();
    Ok(PolicySet::from_unchecked(gains))
}

/// `K^i ← (1−2η^i)K^i − 2η^i (R^i+(B^i)ᵀP^iB^i)⁻¹(B^i)ᵀP^iĀ^i`, every player
/// using the others' gains from the previous iterate.
pub(crate) fn gauss_newton_step(it: &Iterate<'_>) -> Result<PolicySet> {
    let gains = (0..it.inst.players())
        .map(|i| {
            let btp = bt_p(it.inst, it.values, i);
            let h = gain_hessian(it.inst, &btp, i);
            let rhs = -(btp * effective_dynamics(it.inst, it.policy, i));
            let best = linalg::solve_dense(&h, &rhs)?;
            let eta = it.cfg.eta[i];
            Ok(it.policy.gain(i) * (1.0 - 2.0 * eta) + best * (2.0 * eta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicySet::from_unchecked(gains))
}

fn untracked(inst: &GameInstance, k0: &PolicySet, cfg: &SolverConfig, rule: super::UpdateRule) -> Result<SolveResult> {
    let mut noop = |_: usize, _: &PolicySet| {};
    drive(inst, k0, cfg, Tracker { reference: None, observer: &mut noop }, rule)
}

/// Simultaneous gradient descent `K^i ← K^i − η^i ∇_{K^i}J^i`.
pub fn vanilla_pg(inst: &GameInstance, k0: &PolicySet, cfg: &SolverConfig) -> Result<SolveResult> {
    untracked(inst, k0, cfg, vanilla_step)
}

/// Simultaneous natural gradient descent `K^i ← K^i − η^i ∇_{K^i}J^i Σ_K⁻¹`.
pub fn natural_pg(inst: &GameInstance, k0: &PolicySet, cfg: &SolverConfig) -> Result<SolveResult> {
    untracked(inst, k0, cfg, natural_step)
}

/// Simultaneous Gauss-Newton policy gradient.
pub fn gauss_newton_pg(inst: &GameInstance, k0: &PolicySet, cfg: &SolverConfig) -> Result<SolveResult> {
    untracked(inst, k0, cfg, gauss_newton_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{Algorithm, SolveStatus};

    fn s(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn golden() -> GameInstance {
        GameInstance::new(s(1.0), vec![s(1.0)], vec![s(1.0)], vec![s(1.0)], None).unwrap()
    }

    #[test]
    fn gradient_vanishes_at_equilibrium() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let k = PolicySet::new(vec![s(-1.0 / phi)]).unwrap();
        assert!(gradient(&golden(), &k, 0).unwrap().norm() < 1e-12);
    }

    #[test]
    fn gradient_rejects_bad_player() {
        let k = PolicySet::new(vec![s(-0.5)]).unwrap();
        assert!(gradient(&golden(), &k, 1).is_err());
    }

    #[test]
    fn starting_at_equilibrium_converges_immediately() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let k = PolicySet::new(vec![s(-1.0 / phi)]).unwrap();
        for alg in [Algorithm::VanillaPg, Algorithm::NaturalPg, Algorithm::GaussNewtonPg] {
            let cfg = SolverConfig::new(alg, 1);
            let res = match alg {
                Algorithm::VanillaPg => vanilla_pg(&golden(), &k, &cfg),
                Algorithm::NaturalPg => natural_pg(&golden(), &k, &cfg),
                _ => gauss_newton_pg(&golden(), &k, &cfg),
            }
            .unwrap();
            assert_eq!(res.status, SolveStatus::Converged, "{alg}");
            assert!(res.iterations <= 1, "{alg}");
        }
    }

    #[test]
    fn oversized_step_diverges_without_error() {
        let k = PolicySet::new(vec![s(-0.5)]).unwrap();
        let cfg = SolverConfig::new(Algorithm::NaturalPg, 1).with_eta(5.0);
        let res = natural_pg(&golden(), &k, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::DivergedUnstable);
        assert!(res.final_values.is_none());
        assert!(res.trace.last().unwrap().closed_loop_radius >= 1.0);
    }
}
