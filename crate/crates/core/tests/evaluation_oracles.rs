//! Policy evaluation against truncated series and elementary bounds.

mod common;

use common::*;
use lqdg_core::gen;
use lqdg_core::{
    closed_loop_matrix, cost, evaluate_policies, solve_discrete_lyapunov, stage_weight, state_covariance, GameInstance,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `Σ_{t<T} (Fᵀ)^t W F^t`, accumulated by the fixed-point recursion.
fn truncated_series(f: &DMatrix<f64>, w: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(w.nrows(), w.ncols());
    for _ in 0..terms {
        p = w + f.transpose() * &p * f;
    }
    p
}

#[test]
fn evaluation_matches_truncated_series_on_50_cases() {
    let mut checked = 0;
    for seed in 0..50u64 {
        let (n, players) = (2 + (seed % 3) as usize, 1 + (seed % 3) as usize);
        let inst = random_game(n, players, 1 + (seed % 2) as usize, 7000 + seed);
        let k = stabilizing_policy(&inst, seed, 0.3, 0.95);
        assert!(rho(&inst, &k) <= 0.95);
        let acl = closed_loop_matrix(&inst, &k).unwrap();
        let val = evaluate_policies(&inst, &k).unwrap();
        for i in 0..players {
            let oracle = truncated_series(&acl, &stage_weight(&inst, &k, i), 10_000);
            let err = (val.value(i) - &oracle).norm();
            assert!(err <= 1e-8, "seed {seed} player {i}: {err:e}");
        }
        checked += 1;
    }
    assert_eq!(checked, 50);
}

#[test]
fn covariance_matches_truncated_series() {
    for seed in 0..10u64 {
        let inst = random_game(3, 2, 1, 8100 + seed);
        let k = stabilizing_policy(&inst, seed, 0.3, 0.95);
        let acl = closed_loop_matrix(&inst, &k).unwrap();
        let oracle = truncated_series(&acl.transpose(), inst.x0(), 10_000);
        let sigma = state_covariance(&inst, &k).unwrap();
        assert!((sigma - oracle).norm() <= 1e-8);
    }
}

#[test]
fn scalar_lyapunov_closed_form() {
    // p = w / (1 - f^2)
    for &(f, w) in &[(0.5, 1.0), (-0.9, 2.0), (0.0, 3.0), (0.99, 0.01)] {
        let p = solve_discrete_lyapunov(&scalar(f), &scalar(w)).unwrap();
        assert!((p[(0, 0)] - w / (1.0 - f * f)).abs() <= 1e-12 * (1.0 + p[(0, 0)]));
    }
}

#[test]
fn unstable_closed_loop_is_rejected() {
    assert!(solve_discrete_lyapunov(&scalar(1.0), &scalar(1.0)).is_err());
    assert!(solve_discrete_lyapunov(&scalar(-1.5), &scalar(1.0)).is_err());
}

#[test]
fn evaluation_is_equivariant_under_player_permutation() {
    for seed in 0..10u64 {
        let inst = random_game(3, 3, 1 + (seed % 2) as usize, 9000 + seed);
        let k = stabilizing_policy(&inst, seed, 0.3, 0.95);
        let perm = [2, 0, 1];
        let pinst = inst.permuted(&perm).unwrap();
        let pk = k.permuted(&perm).unwrap();
        let val = evaluate_policies(&inst, &k).unwrap();
        let pval = evaluate_policies(&pinst, &pk).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert!(max_abs_diff(pval.value(new), val.value(old)) <= 1e-12);
        }
    }
}

fn any_game() -> impl Strategy<Value = (GameInstance, u64)> {
    (1usize..5, 1usize..4, 1usize..3, any::<u64>())
        .prop_map(|(n, players, m, seed)| (random_game(n, players, m, seed), seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn costs_are_nonnegative_and_covariance_dominates_x0((inst, seed) in any_game()) {
        let k = stabilizing_policy(&inst, seed % 1000, 0.2, 0.99);
        for c in cost(&inst, &k).unwrap() {
            prop_assert!(c >= 0.0);
        }
        let sigma = state_covariance(&inst, &k).unwrap();
        prop_assert!(sigma.trace() >= inst.x0().trace() - 1e-12);
    }

    #[test]
    fn zero_policy_closed_loop_is_a((inst, _seed) in any_game()) {
        let acl = closed_loop_matrix(&inst, &gen::zero_policy(&inst)).unwrap();
        prop_assert_eq!(&acl, inst.a());
    }
}
