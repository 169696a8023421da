//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use lqdg_bench::experiments::{self, RandomBenchConfig, RunSettings, EXP_A_NPG_ETAS};
use lqdg_core::gen::{self, BallSpec, GenSpec};
use lqdg_core::{
    are_residual, closed_loop_matrix, cost, evaluate_policies, gradient, run_solver, run_solver_observed,
    spectral_radius, stage_weight, Algorithm, GameInstance, PolicySet, SolveResult, SolveStatus, SolverConfig,
};
use nalgebra::DMatrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration, detail: String) -> Outcome {
    check(elapsed <= budget, format!("{detail}; {:.2}s of {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()))
}

fn equilibrium_reproduction() -> Outcome {
    let start = Instant::now();
    let inst = gen::paper_instance();
    let res = run_solver(&inst, None, &SolverConfig::new(Algorithm::ValueIteration, 2), None)
        .map_err(|e| e.to_string())?;
    let reported = gen::paper_reported_equilibrium().flat_entries();
    let got = res.final_policies.flat_entries();
    let worst = got.iter().zip(&reported).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let detail = format!("VI {} in {} iterations, K = {got:.4?}, max deviation {worst:.1e}", res.status, res.iterations);
    check(res.converged() && worst <= 5e-4, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(1), detail)
}

fn cross_algorithm_agreement() -> Outcome {
    let start = Instant::now();
    let rep = experiments::exp_a(&RunSettings::default(), &EXP_A_NPG_ETAS, 0.5).map_err(|e| e.to_string())?;
    let pi = rep.run(Algorithm::PolicyIteration, None).ok_or("missing PI")?;
    let gn = rep.run(Algorithm::GaussNewtonPg, Some(0.5)).ok_or("missing GNPG")?;
    let npg = rep.run(Algorithm::NaturalPg, Some(0.1)).ok_or("missing NPG(0.1)")?;
    let iters = |r: &experiments::TrackedRun| r.result.iterations;
    let detail = format!(
        "e_norm PI {:.1e} GNPG {:.1e} NPG {:.1e}; iterations PI {} GNPG {} NPG {}",
        pi.result.final_e_norm().unwrap_or(f64::NAN),
        gn.result.final_e_norm().unwrap_or(f64::NAN),
        npg.result.final_e_norm().unwrap_or(f64::NAN),
        iters(pi),
        iters(gn),
        iters(npg)
    );
    let ok = pi.reached() && gn.reached() && npg.reached() && iters(pi) < iters(gn) && iters(pi) < iters(npg);
    check(ok, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(10), detail)
}

fn sensitivity_reproduction() -> Outcome {
    let start = Instant::now();
    let rep = experiments::exp_b(&RunSettings::default(), 0.1, 0.5).map_err(|e| e.to_string())?;
    let case = rep.case("r0.5").ok_or("missing r = 0.5 case")?;
    let get = |a| case.run(a).ok_or(format!("missing {a}"));
    let (pi, gn, npg) = (get(Algorithm::PolicyIteration)?, get(Algorithm::GaussNewtonPg)?, get(Algorithm::NaturalPg)?);
    let detail = format!(
        "r = 0.5: PI reached {}, GNPG reached {}, NPG(0.1) {} after {} iterations",
        pi.reached(),
        gn.reached(),
        npg.result.status,
        npg.result.iterations
    );
    check(pi.reached() && gn.reached() && !npg.reached() && npg.result.iterations <= 100_000, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(60), detail)
}

fn random_bench_bands() -> Outcome {
    let run = |players| {
        experiments::random_bench(&RandomBenchConfig::new(4, 2, players, 200, 0)).map_err(|e| e.to_string())
    };
    let two = run(2)?.summary;
    let four = run(4)?.summary;
    let frac = |s: &lqdg_bench::BenchSummary, a| s.get(a).map_or(f64::NAN, |x| x.convergent_fraction());
    let pi2 = frac(&two, Algorithm::PolicyIteration);
    let avg2 = two
        .get(Algorithm::PolicyIteration)
        .and_then(|x| x.average_iterations_over_convergent)
        .unwrap_or(f64::INFINITY);
    let npg2 = frac(&two, Algorithm::NaturalPg);
    let gn2 = frac(&two, Algorithm::GaussNewtonPg);
    let pi4 = frac(&four, Algorithm::PolicyIteration);
    let gn4 = frac(&four, Algorithm::GaussNewtonPg);
    let detail = format!(
        "N=2: PI {pi2:.3} (avg {avg2:.2} iters), NPG {npg2:.3}, GNPG {gn2:.3}; N=4: PI {pi4:.3}, GNPG {gn4:.3}; skipped {}+{}",
        two.skipped_instances.len(),
        four.skipped_instances.len()
    );
    let ok = pi2 >= 0.86
        && avg2 <= 15.0
        && npg2 <= 0.05
        && (0.6..=1.0).contains(&gn2)
        && pi4 >= 0.85
        && gn4 <= 0.10;
    check(ok, detail)
}

fn stabilizing(inst: &GameInstance, seed: u64, radius: f64, max_rho: f64) -> PolicySet {
    let zero = gen::zero_policy(inst);
    (0..1000)
        .map(|s| gen::sample_policy_in_ball(inst, &BallSpec::new(zero.clone(), radius, seed * 1000 + s)).unwrap())
        .find(|k| spectral_radius(&closed_loop_matrix(inst, k).unwrap()).unwrap() <= max_rho)
        .unwrap_or(zero)
}

fn gains_along(inst: &GameInstance, k0: &PolicySet, cfg: &SolverConfig) -> (SolveResult, Vec<PolicySet>) {
    let mut gains = Vec::new();
    let res = run_solver_observed(inst, Some(k0), cfg, None, &mut |_, k| gains.push(k.clone())).unwrap();
    (res, gains)
}

fn certified(inst: &GameInstance, res: &SolveResult) -> bool {
    res.status != SolveStatus::Converged
        || are_residual(inst, &res.final_policies, res.final_values.as_ref().unwrap()).unwrap()
            <= 10.0 * res.config.epsilon
}

fn single_player_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut iterations = 0;
    for seed in 0..20u64 {
        let inst = gen::random_instance(&GenSpec::uniform(2 + (seed % 3) as usize, 1, 1 + (seed % 2) as usize, 20_000 + seed))
            .map_err(|e| e.to_string())?;
        let k0 = stabilizing(&inst, seed, 0.5, 0.99);
        let (pi, a) = gains_along(&inst, &k0, &SolverConfig::new(Algorithm::PolicyIteration, 1));
        let (gn, b) = gains_along(&inst, &k0, &SolverConfig::new(Algorithm::GaussNewtonPg, 1).with_eta(0.5).with_epsilon(1e-8));
        if a.len() != b.len() || pi.status != gn.status || !certified(&inst, &pi) || !certified(&inst, &gn) {
            return Err(format!("seed {seed}: PI {} in {}, GNPG {} in {}", pi.status, a.len(), gn.status, b.len()));
        }
        iterations += a.len();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x.gain(0) - y.gain(0)).abs().max());
        }
    }
    check(worst <= 1e-12, format!("20 games, {iterations} iterations compared, max gain difference {worst:.1e}"))
}

fn oracle_suites() -> Outcome {
    // (a) policy evaluation against a truncated series.
    let mut eval_err = 0.0f64;
    for seed in 0..50u64 {
        let inst = gen::random_instance(&GenSpec::uniform(3, 2, 1, 30_000 + seed)).map_err(|e| e.to_string())?;
        let k = stabilizing(&inst, seed, 0.3, 0.95);
        let acl = closed_loop_matrix(&inst, &k).unwrap();
        let val = evaluate_policies(&inst, &k).unwrap();
        for i in 0..2 {
            let w = stage_weight(&inst, &k, i);
            let mut p = DMatrix::zeros(3, 3);
            for _ in 0..10_000 {
                p = &w + acl.transpose() * &p * &acl;
            }
            eval_err = eval_err.max((val.value(i) - p).norm());
        }
    }
    // (b) gradient against central differences.
    let mut grad_err = 0.0f64;
    for seed in 0..20u64 {
        let inst = gen::random_instance(&GenSpec::uniform(3, 2, 1, 40_000 + seed)).map_err(|e| e.to_string())?;
        let k = stabilizing(&inst, seed, 0.3, 0.9);
        for i in 0..2 {
            let g = gradient(&inst, &k, i).unwrap();
            let fd = DMatrix::from_fn(g.nrows(), g.ncols(), |r, c| {
                let bump = |d: f64| {
                    let mut gains = k.gains().to_vec();
                    gains[i][(r, c)] += d;
                    cost(&inst, &PolicySet::new(gains).unwrap()).unwrap()[i]
                };
                (bump(1e-6) - bump(-1e-6)) / 2e-6
            });
            grad_err = grad_err.max((&g - fd).norm() / g.norm().max(1e-8));
        }
    }
    // (c) certificates on converged runs, (d) simultaneity gap.
    let mut uncertified = 0;
    let mut gap_err = 0.0f64;
    for seed in 0..20u64 {
        let inst = gen::random_instance(&GenSpec::uniform(1, 2, 1, 50_000 + seed)).map_err(|e| e.to_string())?;
        for alg in Algorithm::ALL {
            let res = run_solver(&inst, Some(&gen::zero_policy(&inst)), &SolverConfig::new(alg, 2).with_max_iterations(20_000), None)
                .map_err(|e| e.to_string())?;
            uncertified += usize::from(!certified(&inst, &res));
        }
        let k = stabilizing(&inst, seed, 0.5, 0.95);
        let val = evaluate_policies(&inst, &k).unwrap();
        let step = |alg| gains_along(&inst, &k, &SolverConfig::new(alg, 2).with_eta(0.5).with_max_iterations(1)).1.remove(0);
        let (pi, gn) = (step(Algorithm::PolicyIteration), step(Algorithm::GaussNewtonPg));
        let (b1, b2, p1) = (inst.b(0)[(0, 0)], inst.b(1)[(0, 0)], val.value(0)[(0, 0)]);
        let predicted = b1 * p1 * b2 * (pi.gain(1)[(0, 0)] - k.gain(1)[(0, 0)]) / (inst.r(0)[(0, 0)] + b1 * p1 * b1);
        gap_err = gap_err.max((gn.gain(0)[(0, 0)] - pi.gain(0)[(0, 0)] - predicted).abs());
    }
    let detail = format!(
        "evaluation {eval_err:.1e}, gradient {grad_err:.1e} relative, {uncertified} uncertified converged runs, gap {gap_err:.1e}"
    );
    check(eval_err <= 1e-8 && grad_err <= 1e-5 && uncertified == 0 && gap_err <= 1e-12, detail)
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("equilibrium reproduction", equilibrium_reproduction),
        ("cross-algorithm agreement", cross_algorithm_agreement),
        ("sensitivity to the initial policy", sensitivity_reproduction),
        ("random-game convergence bands", random_bench_bands),
        ("single-player equivalence", single_player_equivalence),
        ("oracle suites", oracle_suites),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS [{}] {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL [{}] {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
