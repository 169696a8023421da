#![allow(dead_code)]

use lqdg_core::gen::{self, BallSpec, GenSpec};
use lqdg_core::{closed_loop_matrix, spectral_radius, GameInstance, PolicySet};
use nalgebra::DMatrix;

pub fn random_game(n: usize, players: usize, m: usize, seed: u64) -> GameInstance {
    gen::random_instance(&GenSpec::uniform(n, players, m, seed)).unwrap()
}

/// A stabilizing policy near zero with closed-loop radius at most `max_rho`.
pub fn stabilizing_policy(inst: &GameInstance, seed: u64, radius: f64, max_rho: f64) -> PolicySet {
    let zero = gen::zero_policy(inst);
    for s in 0..1000 {
        let k = gen::sample_policy_in_ball(inst, &BallSpec::new(zero.clone(), radius, seed * 1000 + s)).unwrap();
        if rho(inst, &k) <= max_rho {
            return k;
        }
    }
    zero
}

pub fn rho(inst: &GameInstance, k: &PolicySet) -> f64 {
    spectral_radius(&closed_loop_matrix(inst, k).unwrap()).unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}
