use nalgebra::DMatrix;

use super::{bt_p, drive, gain_hessian, Iterate, SolveResult, SolverConfig, Tracker};
use crate::error::{LqdgError, Result};
use crate::linalg;
use crate::model::{GameInstance, PolicySet, ValueSet};

/// Joint policy update system `M·[K¹;…;K^N] = G` for fixed value matrices.
///
/// Block `(i, i)` of `M` is `R^i + (B^i)ᵀP^iB^i`, block `(i, j)` is
/// `(B^i)ᵀP^iB^j`, and row block `i` of `G` is `−(B^i)ᵀP^iA`, so the solution
/// is the simultaneous best response of every player to the others' *new*
/// gains.
pub fn assemble_policy_update_system(
    inst: &GameInstance,
    val: &ValueSet,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let players = inst.players();
    let n = inst.n();
    if val.values().len() != players || val.values().iter().any(|p| p.shape() != (n, n)) {
        return Err(LqdgError::Dimension("value set does not match instance".into()));
    }
    let m = inst.m();
    let offsets: Vec<usize> = m
        .iter()
        .scan(0, |acc, &mi| {
            let o = *acc;
            *acc += mi;
            Some(o)
        })
        .collect();
    let total: usize = m.iter().sum();
    let mut big = DMatrix::<f64>::zeros(total, total);
    let mut rhs = DMatrix::<f64>::zeros(total, n);
    for i in 0..players {
        let btp = bt_p(inst, val, i);
        for j in 0..players {
            let block = if i == j {
                gain_hessian(inst, &btp, i)
            } else {
                &btp * inst.b(j)
            };
            big.view_mut((offsets[i], offsets[j]), (m[i], m[j])).copy_from(&block);
        }
        rhs.view_mut((offsets[i], 0), (m[i], n))
            .copy_from(&-(&btp * inst.a()));
    }
    Ok((big, rhs))
}

/// Solves the joint update system and splits the stacked gains per player.
pub(crate) fn joint_update(inst: &GameInstance, val: &ValueSet) -> Result<PolicySet> {
    let (big, rhs) = assemble_policy_update_system(inst, val)?;
    let stacked = linalg::solve_dense(&big, &rhs)?;
    let mut row = 0;
    let gains = inst
        .m()
        .into_iter()
        .map(|mi| {
            let g = stacked.rows(row, mi).into_owned();
            row += mi;
            g
        })
        .collect();
    Ok(PolicySet::from_unchecked(gains))
}

pub(crate) fn step(it: &Iterate<'_>) -> Result<PolicySet> {
    joint_update(it.inst, it.values)
}

/// Policy iteration: alternate exact policy evaluation (coupled Lyapunov
/// equations) with the joint policy update, starting from a stabilizing
/// `k0`.
pub fn policy_iteration(
    inst: &GameInstance,
    k0: &PolicySet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let mut noop = |_: usize, _: &PolicySet| {};
    drive(inst, k0, cfg, Tracker { reference: None, observer: &mut noop }, step)
}
