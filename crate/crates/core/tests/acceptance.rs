//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use common::*;
use conic_pdhg::cones::{
    project_box, project_dual_exp, project_exp, project_rescaled_soc, project_soc, RootFinding,
};
use conic_pdhg::engine::{
    adaptive_step_pdhg, initial_step_size, next_step_size, DebugHooks, IterateZ, MatvecCounts, StepNorm,
};
use conic_pdhg::format::{write_problem, ResultFile};
use conic_pdhg::linalg::SparseMatrix;
use conic_pdhg::restart::{normalized_gap, GapQuery, RestartConstants};
use conic_pdhg::scaling::{build_scaling, rescale_problem, unscale_solution, ScalingOptions};
use conic_pdhg::termination::{check_termination, RunState};
use conic_pdhg::{solve, ConeSpec, ConicProblem, ExitCode, SolverOptions};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lp_suite() -> Vec<DenseLp> {
    let mut r = rng(20);
    (0..20).map(|_| random_lp(&mut r)).collect()
}

// ---------------------------------------------------------------- cones

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn in_exp(p: &[f64], tol: f64) -> bool {
    let (a, b, c) = (p[0], p[1], p[2]);
    if b < -tol || c < -tol {
        return false;
    }
    // either form of the boundary may be the better conditioned one
    if b > 0.0 && c > 0.0 {
        a <= b * (c / b).ln() + tol || b * (a / b).exp() <= c + tol
    } else {
        a <= tol
    }
}

fn in_exp_dual(q: &[f64], tol: f64) -> bool {
    let (u, v, w) = (q[0], q[1], q[2]);
    if u > tol || w < -tol {
        return false;
    }
    if u < 0.0 && w > 0.0 {
        v >= u * (1.0 + (-w / u).ln()) - tol || -u * (v / u).exp() <= std::f64::consts::E * w + tol
    } else {
        v >= -tol
    }
}

fn in_soc(p: &[f64], tol: f64) -> bool {
    norm(&p[1..]) <= p[0] + tol
}

fn in_scaled_soc(p: &[f64], d: &[f64], tol: f64) -> bool {
    let dp: Vec<f64> = p.iter().zip(d).map(|(a, b)| a * b).collect();
    in_soc(&dp, tol)
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

struct ConeCase {
    name: &'static str,
    dim: usize,
    project: Box<dyn Fn(&[f64]) -> Vec<f64>>,
    /// Projection onto the polar cone, computed separately.
    polar: Option<Box<dyn Fn(&[f64]) -> Vec<f64>>>,
    /// Optimality conditions of the projection: `p` feasible and `v − p` normal at `p`.
    optimal: Box<dyn Fn(&[f64], &[f64], f64) -> bool>,
}

fn cone_cases(rng: &mut ChaCha8Rng) -> Vec<ConeCase> {
    let rf = RootFinding::default();
    let neg = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<f64>>();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let l: Vec<f64> = (0..4).map(|i| if i == 3 { f64::NEG_INFINITY } else { -rng.gen_range(0.0..2.0) }).collect();
    let u: Vec<f64> = (0..4).map(|i| if i == 2 { f64::INFINITY } else { rng.gen_range(0.0..2.0) }).collect();
    let d: Vec<f64> = (0..5).map(|_| 10f64.powf(rng.gen_range(-1.5..1.5))).collect();
    let d_inv: Vec<f64> = d.iter().map(|a| 1.0 / a).collect();
    let (lb, ub) = (l.clone(), u.clone());
    vec![
        ConeCase {
            name: "box",
            dim: 4,
            project: Box::new(move |v| project_box(v, &l, &u).unwrap()),
            polar: None,
            optimal: Box::new(move |v, p, tol| {
                (0..4).all(|i| {
                    let q = v[i] - p[i];
                    p[i] >= lb[i] - tol
                        && p[i] <= ub[i] + tol
                        && (q.abs() <= tol || (q < 0.0 && p[i] == lb[i]) || (q > 0.0 && p[i] == ub[i]))
                })
            }),
        },
        ConeCase {
            name: "zero",
            dim: 3,
            project: Box::new(|v| vec![0.0; v.len()]),
            polar: Some(Box::new(|v| v.to_vec())),
            optimal: Box::new(|_, p, _| p.iter().all(|a| *a == 0.0)),
        },
        ConeCase {
            name: "nonneg",
            dim: 5,
            project: Box::new(|v| v.iter().map(|a| a.max(0.0)).collect()),
            polar: Some(Box::new(|v| v.iter().map(|a| a.min(0.0)).collect())),
            optimal: Box::new(move |v, p, tol| {
                let q: Vec<f64> = v.iter().zip(p).map(|(a, b)| a - b).collect();
                p.iter().all(|a| *a >= 0.0) && q.iter().all(|a| *a <= tol) && dot(p, &q).abs() <= tol
            }),
        },
        ConeCase {
            name: "soc",
            dim: 5,
            project: Box::new(|v| {
                let mut p = v.to_vec();
                project_soc(&mut p);
                p
            }),
            // self-dual, so the polar projection is −proj(−v)
            polar: Some(Box::new(move |v| {
                let mut p = neg(v);
                project_soc(&mut p);
                neg(&p)
            })),
            optimal: Box::new(move |v, p, tol| {
                let q: Vec<f64> = v.iter().zip(p).map(|(a, b)| b - a).collect();
                in_soc(p, tol) && in_soc(&q, tol) && dot(p, &q).abs() <= tol
            }),
        },
        ConeCase {
            name: "exp",
            dim: 3,
            project: Box::new(move |v| {
                let mut p = v.to_vec();
                project_exp(&mut p, &rf).unwrap();
                p
            }),
            polar: Some(Box::new(move |v| {
                let mut p = neg(v);
                project_dual_exp(&mut p, &rf).unwrap();
                neg(&p)
            })),
            optimal: Box::new(move |v, p, tol| {
                let q: Vec<f64> = v.iter().zip(p).map(|(a, b)| b - a).collect();
                in_exp(p, tol) && in_exp_dual(&q, tol) && dot(p, &q).abs() <= tol
            }),
        },
        ConeCase {
            name: "dual_exp",
            dim: 3,
            project: Box::new(move |v| {
                let mut p = v.to_vec();
                project_dual_exp(&mut p, &rf).unwrap();
                p
            }),
            polar: Some(Box::new(move |v| {
                let mut p = neg(v);
                project_exp(&mut p, &rf).unwrap();
                neg(&p)
            })),
            optimal: Box::new(move |v, p, tol| {
                let q: Vec<f64> = v.iter().zip(p).map(|(a, b)| b - a).collect();
                in_exp_dual(p, tol) && in_exp(&q, tol) && dot(p, &q).abs() <= tol
            }),
        },
        ConeCase {
            name: "rescaled_soc",
            dim: 5,
            project: {
                let d = d.clone();
                Box::new(move |v| {
                    let mut p = v.to_vec();
                    project_rescaled_soc(&mut p, &d, &rf).unwrap();
                    p
                })
            },
            // the dual of {z : Dz ∈ K} is {w : D⁻¹w ∈ K}
            polar: {
                let d_inv = d_inv.clone();
                Some(Box::new(move |v| {
                    let mut p = neg(v);
                    project_rescaled_soc(&mut p, &d_inv, &rf).unwrap();
                    neg(&p)
                }))
            },
            optimal: Box::new(move |v, p, tol| {
                let q: Vec<f64> = v.iter().zip(p).map(|(a, b)| b - a).collect();
                in_scaled_soc(p, &d, tol) && in_scaled_soc(&q, &d_inv, tol) && dot(p, &q).abs() <= tol
            }),
        },
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1);
    let cases = cone_cases(&mut rng);
    for case in &cases {
        for i in 0..1000 {
            let v = random_point(&mut rng, case.dim);
            let w = random_point(&mut rng, case.dim);
            let s = norm(&v).max(1.0);
            let p = (case.project)(&v);
            let pp = (case.project)(&p);
            ensure(dist(&p, &pp) <= 1e-10 * s, || format!("{} idempotence at point {i}: {v:?}", case.name))?;
            let pw = (case.project)(&w);
            ensure(dist(&p, &pw) <= dist(&v, &w) * (1.0 + 1e-12) + 1e-12 * s, || {
                format!("{} nonexpansive at point {i}", case.name)
            })?;
            ensure((case.optimal)(&v, &p, 1e-9 * s), || format!("{} optimality at point {i}: {v:?} -> {p:?}", case.name))?;
            if let Some(polar) = &case.polar {
                let q = polar(&v);
                let sum: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
                ensure(dist(&sum, &v) <= 1e-9 * s, || format!("{} Moreau at point {i}", case.name))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("{} cone kinds x 1000 points in {secs:.2} s", cases.len()))
}

// ---------------------------------------------------------------- solves

fn tol_options() -> SolverOptions {
    SolverOptions {
        rel_tol: 1e-6,
        abs_tol: 1e-6,
        duality_gap_restart_freq: 64,
        max_iter: Some(500_000),
        ..SolverOptions::default()
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, lp) in lp_suite().iter().enumerate() {
        let oracle = vertex_enumeration(lp);
        let r = solve(&lp.to_problem(), &tol_options()).map_err(|e| e.to_string())?;
        ensure(r.exit == ExitCode::Optimal, || format!("instance {i} exit {}", r.exit))?;
        let gap = relative_gap(r.primal_obj, oracle);
        worst = worst.max(gap);
        ensure(gap <= 1e-4, || format!("instance {i}: {} vs oracle {oracle}", r.primal_obj))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.2} s"))?;
    Ok(format!("20 LPs, worst relative error {worst:.1e}, {secs:.2} s"))
}

fn criterion_3() -> Outcome {
    let r = solve(&unit_ball_socp(), &tol_options()).map_err(|e| e.to_string())?;
    ensure(r.exit == ExitCode::Optimal && (r.primal_obj + 1.0).abs() <= 1e-5, || {
        format!("unit ball: {} {}", r.exit, r.primal_obj)
    })?;
    let mut rng = rng(30);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let (p, value) = random_socp(&mut rng);
        let r = solve(&p, &tol_options()).map_err(|e| e.to_string())?;
        let gap = relative_gap(r.primal_obj, value);
        worst = worst.max(gap);
        ensure(r.exit == ExitCode::Optimal && gap <= 1e-4, || {
            format!("socp {i}: {} {} vs {value}", r.exit, r.primal_obj)
        })?;
    }
    Ok(format!("unit ball {:.8}, 10 SOCPs worst relative error {worst:.1e}", r.primal_obj))
}

fn criterion_4() -> Outcome {
    let r = solve(&exp_instance(), &tol_options()).map_err(|e| e.to_string())?;
    let err = (r.primal_obj - std::f64::consts::E).abs();
    ensure(r.exit == ExitCode::Optimal && err <= 1e-4, || format!("{} {}", r.exit, r.primal_obj))?;
    Ok(format!("objective {:.9}", r.primal_obj))
}

fn criterion_5() -> Outcome {
    const CHECK: usize = 8;
    const CAP: usize = 200_000;
    let enhanced = SolverOptions {
        duality_gap_restart_freq: CHECK,
        max_iter: Some(CAP),
        ..SolverOptions::default()
    };
    let plain = SolverOptions {
        duality_gap_restart_freq: CHECK,
        max_iter: Some(CAP),
        use_adaptive_restart: false,
        use_halpern: false,
        use_adaptive_step_size_weight: false,
        ..SolverOptions::default()
    };
    let mut wins = 0;
    let mut rows = Vec::new();
    for (i, lp) in lp_suite().iter().enumerate() {
        let p = lp.to_problem();
        let a = solve(&p, &enhanced).map_err(|e| e.to_string())?;
        let b = solve(&p, &plain).map_err(|e| e.to_string())?;
        ensure(a.exit == ExitCode::Optimal, || format!("instance {i}: enhanced exit {}", a.exit))?;
        let b_iters = if b.exit == ExitCode::Optimal { b.stats.iterations } else { usize::MAX };
        if a.stats.iterations < b_iters {
            wins += 1;
        }
        rows.push(format!("{}/{}", a.stats.iterations, if b_iters == usize::MAX { "cap".into() } else { b_iters.to_string() }));
    }
    ensure(wins >= 15, || format!("fewer iterations on {wins}/20 only: {}", rows.join(" ")))?;
    Ok(format!("fewer iterations on {wins}/20 (enhanced/plain: {})", rows.join(" ")))
}

fn criterion_6() -> Outcome {
    let c = RestartConstants::default();
    ensure(
        (c.sufficient, c.necessary, c.artificial, c.theta, c.omega_max, c.omega_min)
            == (0.4, 0.8, 0.223, 0.5, 1e5, 1e-5),
        || format!("{c:?}"),
    )?;
    let p = ConicProblem::new(
        vec![0.0; 3],
        SparseMatrix::from_dense(&[vec![1.0, -3.0, 0.5], vec![2.0, 2.0, 0.0]]).unwrap(),
        vec![0.0; 2],
        vec![0.0; 3],
        vec![1.0; 3],
        vec![],
        vec![ConeSpec::nonneg(2)],
    )
    .unwrap();
    let mut o = SolverOptions::default();
    let max_abs = initial_step_size(&o, &p).map_err(|e| e.to_string())?;
    o.initial_step_norm = StepNorm::InducedInf;
    let induced = initial_step_size(&o, &p).map_err(|e| e.to_string())?;
    ensure(max_abs == 1.0 / 3.0 && induced == 1.0 / 4.5, || format!("η0 {max_abs} and {induced}"))?;
    Ok("constants pinned; η0 = 1/3 (max |G_ij|), 1/4.5 (‖G‖∞)".into())
}

fn criterion_7() -> Outcome {
    let mut rng = rng(7);
    let mut ws = conic_pdhg::cones::ProjectionWorkspace::default();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (m, n) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let dense: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let p = ConicProblem::new(
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            SparseMatrix::from_dense(&dense).unwrap(),
            (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            vec![f64::NEG_INFINITY; n],
            vec![f64::INFINITY; n],
            vec![],
            vec![ConeSpec::zero(m)],
        )
        .unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tau = 10f64.powf(rng.gen_range(-2.0..1.0));
        let sigma = 10f64.powf(rng.gen_range(-2.0..1.0));
        let r = 10f64.powf(rng.gen_range(-3.0..2.0));
        let gx = p.g().matvec(&x).unwrap();
        let gty = p.g().matvec_transpose(&y).unwrap();
        let q = GapQuery::new(&p, &x, &y, &gx, &gty, tau, sigma, r).map_err(|e| e.to_string())?;
        let gap = normalized_gap(&q, &p, &mut ws).map_err(|e| e.to_string())?;
        // b = (Gᵀy − c, h − Gx)
        let b1: f64 = gty.iter().zip(p.c()).map(|(g, c)| (g - c).powi(2)).sum();
        let b2: f64 = p.h().iter().zip(&gx).map(|(h, g)| (h - g).powi(2)).sum();
        let exact = (tau * b1 + sigma * b2).sqrt();
        let err = (gap - exact).abs() / exact.max(1.0);
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("query {i}: {gap} vs {exact}"))?;
    }
    Ok(format!("100 queries, worst error {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    let mut rng = rng(8);
    let mut ws = conic_pdhg::cones::ProjectionWorkspace::default();
    let mut rejections = 0;
    for i in 0..10_000 {
        let (m, n) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let dense: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let p = ConicProblem::new(
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            SparseMatrix::from_dense(&dense).unwrap(),
            (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            vec![-5.0; n],
            vec![5.0; n],
            vec![],
            vec![ConeSpec::nonneg(m)],
        )
        .unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let z = IterateZ::new(&p, x.clone(), y.clone()).map_err(|e| e.to_string())?;
        let omega = 10f64.powf(rng.gen_range(-1.0..1.0));
        let eta = 10f64.powf(rng.gen_range(-2.0..1.5));
        let k_bar = rng.gen_range(1..1000);
        let s = adaptive_step_pdhg(&p, &z, omega, eta, k_bar, &mut ws, &mut MatvecCounts::default())
            .map_err(|e| e.to_string())?;
        rejections += s.rejections;
        // η̄ from the accepted candidate, recomputed from scratch
        let dx: Vec<f64> = s.output.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = s.output.y.iter().zip(&y).map(|(a, b)| a - b).collect();
        let gdx = p.g().matvec(&dx).unwrap();
        let cross: f64 = dy.iter().zip(&gdx).map(|(a, b)| a * b).sum();
        let num = 0.5 * (omega * dx.iter().map(|a| a * a).sum::<f64>() + dy.iter().map(|a| a * a).sum::<f64>() / omega);
        let bar = if cross == 0.0 { f64::INFINITY } else { num / cross.abs() };
        ensure(s.eta_used < bar * (1.0 + 1e-12), || format!("case {i}: η {} ≥ η̄ {bar}", s.eta_used))?;
        let growth = 1.0 + ((s.k_bar + 1) as f64).powf(-0.6);
        ensure(s.eta_next <= growth * s.eta_used * (1.0 + 1e-15), || {
            format!("case {i}: next η {} exceeds {growth} x {}", s.eta_next, s.eta_used)
        })?;
        ensure(s.eta_next == next_step_size(s.eta_used, s.eta_bar, s.k_bar), || format!("case {i}: step formula"))?;
    }
    Ok(format!("10000 candidates, {rejections} rejections along the way"))
}

fn criterion_9() -> Outcome {
    let lp = lp_suite().remove(0).to_problem();
    let mut seen = Vec::new();
    let mut run = |p: &ConicProblem, o: SolverOptions, want: ExitCode| -> Result<(), String> {
        let r = solve(p, &o).map_err(|e| e.to_string())?;
        ensure(r.exit == want, || format!("expected {want}, got {}", r.exit))?;
        seen.push(r.exit);
        Ok(())
    };
    run(&lp, tol_options(), ExitCode::Optimal)?;
    run(&lp, SolverOptions { max_iter: Some(10), ..tol_options() }, ExitCode::MaxIter)?;
    run(&lp, SolverOptions { time_limit: 0.0, ..tol_options() }, ExitCode::TimeLimit)?;
    let nan = DebugHooks {
        nan_at_iteration: Some(5),
        ..DebugHooks::default()
    };
    run(&lp, SolverOptions { debug: nan, ..tol_options() }, ExitCode::NumericalError)?;
    run(&primal_infeasible(), tol_options(), ExitCode::PrimalInfeasibleHighAcc)?;
    run(&dual_infeasible(), tol_options(), ExitCode::DualInfeasibleHighAcc)?;
    // without the high-accuracy test only the trend rule can fire
    let low = SolverOptions {
        eps_primal_infeasible_high_acc: 0.0,
        eps_dual_infeasible_high_acc: 0.0,
        ..tol_options()
    };
    run(&primal_infeasible(), low.clone(), ExitCode::PrimalInfeasibleLowAcc)?;
    run(&dual_infeasible(), low, ExitCode::DualInfeasibleLowAcc)?;
    let state = RunState {
        iterations: 3,
        elapsed_sec: 0.0,
        numerical_error: false,
    };
    let cont = check_termination(None, &tol_options(), &state);
    ensure(cont == ExitCode::Continue, || format!("got {cont}"))?;
    seen.push(cont);
    let missing: Vec<_> = ExitCode::ALL.iter().filter(|c| !seen.contains(c)).collect();
    ensure(missing.is_empty(), || format!("unreached: {missing:?}"))?;
    Ok("all 9 codes reached".into())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("lp.json");
    write_problem(&lp_suite().remove(3).to_problem(), &input).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("result{k}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_conic-pdhg"))
            .env("CONIC_PDHG_THREADS", "1")
            .args(["--verbose", "0", "--reproducible", "--input"])
            .arg(&input)
            .arg("--output")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("run {k} exited with {status}"))?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "result files differ".into())?;
    let parsed = ResultFile::from_json(std::str::from_utf8(&outputs[0]).unwrap()).map_err(|e| e.to_string())?;
    ensure(parsed.exit_status == ":optimal", || parsed.exit_status.clone())?;
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn criterion_11() -> Outcome {
    let off = SolverOptions {
        use_preconditioner: false,
        ..tol_options()
    };
    let mut worst: f64 = 0.0;
    for (i, lp) in lp_suite().iter().enumerate() {
        let p = lp.to_problem();
        let a = solve(&p, &tol_options()).map_err(|e| e.to_string())?;
        let b = solve(&p, &off).map_err(|e| e.to_string())?;
        ensure(a.exit == ExitCode::Optimal && b.exit == ExitCode::Optimal, || {
            format!("instance {i}: {} / {}", a.exit, b.exit)
        })?;
        let gap = relative_gap(a.primal_obj, b.primal_obj);
        worst = worst.max(gap);
        ensure(gap <= 1e-5, || format!("instance {i}: {} vs {}", a.primal_obj, b.primal_obj))?;

        let s = build_scaling(&p, &ScalingOptions::default());
        let scaled = rescale_problem(&p, &s).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..p.num_vars()).map(|j| j as f64 - 1.5).collect();
        let y: Vec<f64> = (0..p.num_rows()).map(|j| 0.5 + j as f64).collect();
        let xs: Vec<f64> = x.iter().zip(&s.d2).map(|(a, d)| a / d).collect();
        let ys: Vec<f64> = y.iter().zip(&s.d1).map(|(a, d)| a / d).collect();
        let (xb, yb) = unscale_solution(&xs, &ys, &s).map_err(|e| e.to_string())?;
        let close = |u: &[f64], v: &[f64]| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        ensure(close(&xb, &x) && close(&yb, &y), || format!("instance {i}: unscale∘rescale"))?;
        // objective and row residuals are invariant
        let obj_s: f64 = scaled.c().iter().zip(&xs).map(|(a, b)| a * b).sum();
        let obj: f64 = p.c().iter().zip(&x).map(|(a, b)| a * b).sum();
        ensure((obj_s - obj).abs() <= 1e-12 * obj.abs().max(1.0), || format!("instance {i}: objective"))?;
        let gx = p.g().matvec(&x).unwrap();
        let gxs: Vec<f64> = scaled.g().matvec(&xs).unwrap().iter().zip(&s.d1).map(|(a, d)| a / d).collect();
        ensure(close(&gxs, &gx), || format!("instance {i}: scaled rows"))?;
    }
    Ok(format!("worst objective difference {worst:.1e}; round trips within 1e-12"))
}

fn main() {
    // the harness flags cargo passes (e.g. --nocapture) are not needed here
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("cone projection suite", criterion_1),
        ("LP correctness", criterion_2),
        ("SOCP correctness", criterion_3),
        ("exp-cone correctness", criterion_4),
        ("enhancement ablation", criterion_5),
        ("restart constants", criterion_6),
        ("bisection oracle", criterion_7),
        ("step-size contract", criterion_8),
        ("exit-code table", criterion_9),
        ("determinism", criterion_10),
        ("scaling round trip", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
