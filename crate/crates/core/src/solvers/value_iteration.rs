use super::{certified, finish, policy_iteration::joint_update, Recorder, SolveResult, SolveStatus, SolverConfig, Tracker};
use crate::error::Result;
use crate::linalg;
use crate::model::{self, GameInstance, PolicySet, ValueSet};

/// Value iteration from `P_0^i = Q^i`.
///
/// Each sweep computes every player's gain from the current value matrices
/// (the gains are mutually coupled through `Ā^i`, resolved with the same
/// joint block solve as policy iteration) and then applies one step of the
/// value recursion `P^i ← Q^i + (K^i)ᵀR^iK^i + A_clᵀ P^i A_cl`.
pub fn value_iteration(inst: &GameInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    let mut noop = |_: usize, _: &PolicySet| {};
    run(inst, cfg, Tracker { reference: None, observer: &mut noop })
}

pub(crate) fn run(inst: &GameInstance, cfg: &SolverConfig, tracker: Tracker<'_>) -> Result<SolveResult> {
    cfg.validate(inst.players())?;
    let mut values = ValueSet::new((0..inst.players()).map(|i| inst.q(i).clone()).collect())?;
    let mut previous = PolicySet::from_unchecked(
        inst.m().iter().map(|&mi| nalgebra::DMatrix::zeros(mi, inst.n())).collect(),
    );
    let mut rec = Recorder::new();
    for k in 1..=cfg.max_iterations {
        let gains = match joint_update(inst, &values) {
            Ok(g) if g.is_finite() => g,
            Ok(_) => {
                let msg = Some("non-finite gains".to_string());
                return Ok(finish(inst, SolveStatus::NumericalFailure, previous, None, rec, cfg, msg));
            }
            Err(e) => {
                return Ok(finish(inst, SolveStatus::NumericalFailure, previous, None, rec, cfg, Some(e.to_string())));
            }
        };
        let acl = model::closed_loop_unchecked(inst, &gains);
        let next: Vec<_> = (0..inst.players())
            .map(|i| {
                let p = values.value(i);
                model::stage_weight(inst, &gains, i) + acl.transpose() * p * &acl
            })
            .collect();
        let next = ValueSet::new(next)?;
        let delta = gains.distance(&previous);
        let rho = linalg::spectral_radius(&acl).unwrap_or(f64::NAN);
        rec.push(k, delta, tracker.e_norm(&gains), rho);
        (tracker.observer)(k, &gains);
        if !next.is_finite() || rho.is_nan() {
            let msg = Some("value recursion produced non-finite entries".to_string());
            return Ok(finish(inst, SolveStatus::NumericalFailure, gains, None, rec, cfg, msg));
        }
        if gains.max_gain_norm() > cfg.divergence_norm_cap {
            let msg = Some(format!("gain norm exceeded {:e}", cfg.divergence_norm_cap));
            return Ok(finish(inst, SolveStatus::DivergedUnstable, gains, Some(next), rec, cfg, msg));
        }
        if delta <= cfg.epsilon && certified(inst, &gains, &next, cfg) {
            if rho >= 1.0 {
                let msg = Some(format!("fixed point is not stabilizing (rho = {rho})"));
                return Ok(finish(inst, SolveStatus::DivergedUnstable, gains, Some(next), rec, cfg, msg));
            }
            return Ok(finish(inst, SolveStatus::Converged, gains, Some(next), rec, cfg, None));
        }
        values = next;
        previous = gains;
    }
    Ok(finish(inst, SolveStatus::MaxIterations, previous, Some(values), rec, cfg, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Algorithm;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn scalar_golden_ratio() {
        let s = |v| DMatrix::from_element(1, 1, v);
        let inst = GameInstance::new(s(1.0), vec![s(1.0)], vec![s(1.0)], vec![s(1.0)], None).unwrap();
        let res = value_iteration(&inst, &SolverConfig::new(Algorithm::ValueIteration, 1)).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert_relative_eq!(res.final_policies.gain(0)[(0, 0)], -1.0 / PHI, epsilon = 1e-8);
        assert_relative_eq!(res.final_values.unwrap().value(0)[(0, 0)], PHI, epsilon = 1e-8);
        assert!(res.report.unwrap().per_player_detectable[0]);
    }

    #[test]
    fn zero_iterations_is_max_iterations() {
        let s = |v| DMatrix::from_element(1, 1, v);
        let inst = GameInstance::new(s(1.0), vec![s(1.0)], vec![s(1.0)], vec![s(1.0)], None).unwrap();
        let cfg = SolverConfig::new(Algorithm::ValueIteration, 1).with_max_iterations(0);
        let res = value_iteration(&inst, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::MaxIterations);
        assert!(res.trace.is_empty());
    }
}
