//! The two-player benchmark game: reported equilibrium, cross-solver
//! agreement, and frozen regression values.

use lqdg_core::gen;
use lqdg_core::{
    are_residual, check_equilibrium_conditions, closed_loop_matrix, cost, normalized_error, run_solver,
    spectral_radius, Algorithm, SolveStatus, SolverConfig,
};

#[test]
fn value_iteration_reproduces_reported_gains() {
    let inst = gen::paper_instance();
    let res = run_solver(&inst, None, &SolverConfig::new(Algorithm::ValueIteration, 2), None).unwrap();
    assert_eq!(res.status, SolveStatus::Converged);
    let reported = gen::paper_reported_equilibrium();
    for (got, want) in res.final_policies.flat_entries().iter().zip(reported.flat_entries()) {
        assert!((got - want).abs() <= 5e-4, "{got} vs {want}");
    }
    let report = res.report.unwrap();
    assert!(report.is_stable);
    assert!(report.per_player_stabilizable.iter().all(|&s| s));
    assert!(report.per_player_detectable.iter().all(|&d| d));
}

#[test]
fn open_loop_radius_matches_the_quadratic_formula() {
    // λ = (tr ± √(tr² − 4 det)) / 2 for the 2×2 dynamics.
    let inst = gen::paper_instance();
    let a = inst.a();
    let (tr, det) = (a.trace(), a.determinant());
    let lambda = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
    assert!((spectral_radius(a).unwrap() - lambda).abs() <= 1e-12);
}

#[test]
fn all_solvers_agree_from_the_near_start() {
    let inst = gen::paper_instance();
    let vi = run_solver(&inst, None, &SolverConfig::new(Algorithm::ValueIteration, 2), None).unwrap();
    let k0 = gen::paper_k0_near();
    for (alg, eta) in [
        (Algorithm::PolicyIteration, None),
        (Algorithm::GaussNewtonPg, Some(0.5)),
        (Algorithm::NaturalPg, Some(0.1)),
    ] {
        let mut cfg = SolverConfig::new(alg, 2).with_epsilon(1e-8);
        if let Some(e) = eta {
            cfg = cfg.with_eta(e);
        }
        let res = run_solver(&inst, Some(&k0), &cfg, Some(&vi.final_policies)).unwrap();
        assert_eq!(res.status, SolveStatus::Converged, "{alg}");
        let e = normalized_error(&res.final_policies, &vi.final_policies).unwrap();
        assert!(e <= 1e-3, "{alg}: {e:e}");
        let r = are_residual(&inst, &res.final_policies, res.final_values.as_ref().unwrap()).unwrap();
        assert!(r <= 1e-7);
    }
}

#[test]
fn natural_gradient_leaves_the_stable_set_from_the_far_start() {
    let inst = gen::paper_instance();
    let cfg = SolverConfig::new(Algorithm::NaturalPg, 2).with_eta(0.1);
    let res = run_solver(&inst, Some(&gen::paper_k0_far()), &cfg, None).unwrap();
    assert_eq!(res.status, SolveStatus::DivergedUnstable);
    assert!(res.final_values.is_none());
}

#[test]
fn frozen_equilibrium_values() {
    let inst = gen::paper_instance();
    let res = run_solver(&inst, None, &SolverConfig::new(Algorithm::ValueIteration, 2), None).unwrap();
    let k = &res.final_policies;
    let want = [-0.513358684362736, -0.04394791703039001, -0.0524743404481093, -0.011406439521817706];
    for (got, want) in k.flat_entries().iter().zip(want) {
        assert!((got - want).abs() <= 1e-8);
    }
    let rho = spectral_radius(&closed_loop_matrix(&inst, k).unwrap()).unwrap();
    assert!((rho - 0.07373205531254994).abs() <= 1e-8);
    let c = cost(&inst, k).unwrap();
    assert!((c[0] - 1.0127467190348165).abs() <= 1e-8);
    assert!((c[1] - 1.15288921130838).abs() <= 1e-8);
    let c0 = cost(&inst, &gen::zero_policy(&inst)).unwrap();
    assert!((c0[0] - 1.5618596825075919).abs() <= 1e-10);
    assert!((c0[1] - 1.7853706974757857).abs() <= 1e-10);
}

#[test]
fn reported_gains_pass_the_equilibrium_conditions() {
    let inst = gen::paper_instance();
    let rep = check_equilibrium_conditions(&inst, &gen::paper_reported_equilibrium()).unwrap();
    assert!(rep.is_stable && rep.closed_loop_spectral_radius < 0.1);
}

#[test]
fn solver_output_is_deterministic() {
    let inst = gen::paper_instance();
    let cfg = SolverConfig::new(Algorithm::GaussNewtonPg, 2).with_eta(0.5);
    let k0 = gen::paper_k0_near();
    let a = run_solver(&inst, Some(&k0), &cfg, None).unwrap();
    let b = run_solver(&inst, Some(&k0), &cfg, None).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.final_policies.flat_entries(), b.final_policies.flat_entries());
    let strip = |csv: String| csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
    assert_eq!(strip(a.trace_csv()), strip(b.trace_csv()));
}
