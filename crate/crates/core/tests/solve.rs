mod common;

use common::*;
use conic_pdhg::{solve, ExitCode, SolverOptions};

fn fast() -> SolverOptions {
    SolverOptions {
        duality_gap_restart_freq: 64,
        max_iter: Some(500_000),
        ..SolverOptions::default()
    }
}

#[test]
fn vertex_oracle_on_known_lp() {
    // min −x₁ − x₂, x₁ + x₂ ≤ 1.5 written as −x₁ − x₂ ≥ −1.5, 0 ≤ x ≤ 1
    let lp = DenseLp {
        c: vec![-1.0, -1.0],
        a: vec![vec![-1.0, -1.0]],
        b: vec![-1.5],
        equalities: 0,
        upper: vec![1.0, 1.0],
    };
    assert!((vertex_enumeration(&lp) + 1.5).abs() < 1e-12);
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = rng(20);
    for i in 0..20 {
        let lp = random_lp(&mut rng);
        let oracle = vertex_enumeration(&lp);
        let r = solve(&lp.to_problem(), &fast()).unwrap();
        eprintln!("lp {i}: n={} m={} iters={} restarts={} exit={} obj={} oracle={}", lp.c.len(), lp.a.len(), r.stats.iterations, r.stats.restarts, r.exit, r.primal_obj, oracle);
        assert_eq!(r.exit, ExitCode::Optimal, "instance {i}");
        assert!(relative_gap(r.primal_obj, oracle) <= 1e-4, "instance {i}: {} vs {oracle}", r.primal_obj);
    }
}

#[test]
fn unit_ball() {
    let r = solve(&unit_ball_socp(), &fast()).unwrap();
    assert_eq!(r.exit, ExitCode::Optimal);
    assert!((r.primal_obj + 1.0).abs() <= 1e-5, "{}", r.primal_obj);
}

#[test]
fn random_socps() {
    let mut rng = rng(30);
    for i in 0..10 {
        let (p, value) = random_socp(&mut rng);
        let r = solve(&p, &fast()).unwrap();
        eprintln!("socp {i}: iters={} exit={} obj={} expected={}", r.stats.iterations, r.exit, r.primal_obj, value);
        assert_eq!(r.exit, ExitCode::Optimal, "instance {i}");
        assert!(relative_gap(r.primal_obj, value) <= 1e-4, "instance {i}: {} vs {value}", r.primal_obj);
    }
}

#[test]
fn exponential_cone_boundary() {
    let r = solve(&exp_instance(), &fast()).unwrap();
    eprintln!("exp: iters={} exit={} obj={}", r.stats.iterations, r.exit, r.primal_obj);
    assert_eq!(r.exit, ExitCode::Optimal);
    assert!((r.primal_obj - std::f64::consts::E).abs() <= 1e-4, "{}", r.primal_obj);
}

#[test]
fn infeasible_instances() {
    let r = solve(&primal_infeasible(), &fast()).unwrap();
    assert!(matches!(r.exit, ExitCode::PrimalInfeasibleHighAcc | ExitCode::PrimalInfeasibleLowAcc), "{}", r.exit);
    let r = solve(&dual_infeasible(), &fast()).unwrap();
    assert!(matches!(r.exit, ExitCode::DualInfeasibleHighAcc | ExitCode::DualInfeasibleLowAcc), "{}", r.exit);
}
