//! Normalized duality gap, restart candidates and conditions, primal weight.

use crate::cones::{project_dual_set, project_primal_set, ProjectionWorkspace};
use crate::error::{check_len, Result, SolverError};
use crate::linalg::{dot, n_norm_raw, two_norm};
use crate::model::ConicProblem;
use crate::termination::compute_errors_with_products;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartConstants {
    pub sufficient: f64,
    pub necessary: f64,
    pub artificial: f64,
    pub theta: f64,
    pub omega_max: f64,
    pub omega_min: f64,
}

impl Default for RestartConstants {
    fn default() -> Self {
        RestartConstants {
            sufficient: 0.4,
            necessary: 0.8,
            artificial: 0.223,
            theta: 0.5,
            omega_max: 1e5,
            omega_min: 1e-5,
        }
    }
}

/// Radii at or below this give a gap of zero.
pub const MIN_RADIUS: f64 = 1e-14;
/// Bisection outputs below this are treated as a failed gap evaluation.
pub const NEGATIVE_GAP_THRESHOLD: f64 = -1e-12;
const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 200;

/// Point, step sizes and radius for one gap evaluation.
#[derive(Debug, Clone)]
pub struct GapQuery<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// `Gᵀy − c`
    pub b1: Vec<f64>,
    /// `h − Gx`
    pub b2: Vec<f64>,
    pub tau: f64,
    pub sigma: f64,
    pub r: f64,
}

impl<'a> GapQuery<'a> {
    /// Builds the query from cached products `Gx` and `Gᵀy`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        problem: &ConicProblem,
        x: &'a [f64],
        y: &'a [f64],
        gx: &[f64],
        gty: &[f64],
        tau: f64,
        sigma: f64,
        r: f64,
    ) -> Result<Self> {
        check_len("primal vector", problem.num_vars(), x.len())?;
        check_len("dual vector", problem.num_rows(), y.len())?;
        check_len("Gx", problem.num_rows(), gx.len())?;
        check_len("Gᵀy", problem.num_vars(), gty.len())?;
        if !(tau > 0.0 && sigma > 0.0) || r < 0.0 || r.is_nan() {
            return Err(SolverError::InvalidInput(format!(
                "gap query needs τ, σ > 0 and r ≥ 0 (τ={tau}, σ={sigma}, r={r})"
            )));
        }
        Ok(GapQuery {
            x,
            y,
            b1: gty.iter().zip(problem.c()).map(|(g, c)| g - c).collect(),
            b2: problem.h().iter().zip(gx).map(|(h, g)| h - g).collect(),
            tau,
            sigma,
            r,
        })
    }

    fn distance(&self, z: &(Vec<f64>, Vec<f64>)) -> f64 {
        let dx: Vec<f64> = z.0.iter().zip(self.x).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = z.1.iter().zip(self.y).map(|(a, b)| a - b).collect();
        n_norm_raw(&dx, &dy, self.tau, self.sigma)
    }

    fn value(&self, z: &(Vec<f64>, Vec<f64>)) -> f64 {
        let px: f64 = z.0.iter().zip(self.x).zip(&self.b1).map(|((a, b), g)| g * (a - b)).sum();
        let py: f64 = z.1.iter().zip(self.y).zip(&self.b2).map(|((a, b), g)| g * (a - b)).sum();
        (px + py) / self.r
    }
}

/// `z(t) = (proj_X(x + tτ b₁), proj_Y(y + tσ b₂))`
pub fn z_of_t(
    q: &GapQuery<'_>,
    t: f64,
    problem: &ConicProblem,
    ws: &mut ProjectionWorkspace,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x: Vec<f64> = q.x.iter().zip(&q.b1).map(|(x, b)| x + t * q.tau * b).collect();
    let mut y: Vec<f64> = q.y.iter().zip(&q.b2).map(|(y, b)| y + t * q.sigma * b).collect();
    project_primal_set(&mut x, problem, ws)?;
    project_dual_set(&mut y, problem, ws)?;
    Ok((x, y))
}

/// Bisection for `ρᴺ(r; z)` starting from `t₀ = 1`.
pub fn normalized_gap(q: &GapQuery<'_>, problem: &ConicProblem, ws: &mut ProjectionWorkspace) -> Result<f64> {
    normalized_gap_from(q, 1.0, problem, ws)
}

/// Bisection for `ρᴺ(r; z)`.
///
/// When `z(t)` stops moving before it leaves the ball, the whole reachable set
/// lies inside it and the value at the last probe is returned.
pub fn normalized_gap_from(
    q: &GapQuery<'_>,
    t0: f64,
    problem: &ConicProblem,
    ws: &mut ProjectionWorkspace,
) -> Result<f64> {
    if q.r <= MIN_RADIUS {
        return Ok(0.0);
    }
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(SolverError::InvalidInput(format!("initial bracket must be positive, got {t0}")));
    }

    let mut t_left = 0.0;
    let mut t_right = t0;
    let mut last_distance = f64::NEG_INFINITY;
    let mut doublings = 0;
    loop {
        let z = z_of_t(q, t_right, problem, ws)?;
        let d = q.distance(&z);
        if !d.is_finite() {
            return Err(SolverError::Numerical("non-finite distance in gap search".into()));
        }
        if d > q.r {
            if doublings > 0 {
                t_left = 0.5 * t_right;
            }
            break;
        }
        if d <= last_distance * (1.0 + 1e-12) {
            return Ok(q.value(&z));
        }
        last_distance = d;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(SolverError::Numerical("gap bracket search did not terminate".into()));
        }
        t_right *= 2.0;
    }

    // Relative width, so a bracket that shrinks toward zero stays accurate.
    let mut z = z_of_t(q, 0.5 * (t_left + t_right), problem, ws)?;
    for _ in 0..MAX_BISECTIONS {
        let t_mid = 0.5 * (t_left + t_right);
        if q.distance(&z) < q.r {
            t_left = t_mid;
        } else {
            t_right = t_mid;
        }
        if t_right - t_left <= 1e-8 * t_right {
            break;
        }
        z = z_of_t(q, 0.5 * (t_left + t_right), problem, ws)?;
    }
    Ok(q.value(&z))
}

/// A primal-dual point with its cached products.
#[derive(Debug, Clone, Copy)]
pub struct PointView<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub gx: &'a [f64],
    pub gty: &'a [f64],
}

/// Which measure drives restart decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartMetric {
    Gap,
    Kkt,
}

/// Step sizes and weight at the time of a restart check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricContext {
    pub tau: f64,
    pub sigma: f64,
    pub omega: f64,
    /// Fault injection: reports every gap evaluation as negative.
    #[doc(hidden)]
    pub negate_gap: bool,
}

/// `√(ω² e_p² + e_d²/ω² + e_gap²)` with the 2-norm absolute errors.
pub fn kkt_omega(problem: &ConicProblem, z: PointView<'_>, omega: f64, ws: &mut ProjectionWorkspace) -> Result<f64> {
    let r = compute_errors_with_products(problem, z.x, z.y, z.gx, z.gty, ws)?;
    Ok(kkt_omega_from_errors(r.abs_p, r.abs_d, r.abs_gap, omega))
}

pub fn kkt_omega_from_errors(abs_p: f64, abs_d: f64, abs_gap: f64, omega: f64) -> f64 {
    (omega * omega * abs_p * abs_p + abs_d * abs_d / (omega * omega) + abs_gap * abs_gap).sqrt()
}

/// `ρᴺ(‖z − anchor‖_N; z)`.
pub fn gap_against(
    problem: &ConicProblem,
    z: PointView<'_>,
    anchor_x: &[f64],
    anchor_y: &[f64],
    ctx: &MetricContext,
    ws: &mut ProjectionWorkspace,
) -> Result<f64> {
    let dx: Vec<f64> = z.x.iter().zip(anchor_x).map(|(a, b)| a - b).collect();
    let dy: Vec<f64> = z.y.iter().zip(anchor_y).map(|(a, b)| a - b).collect();
    let r = n_norm_raw(&dx, &dy, ctx.tau, ctx.sigma);
    let q = GapQuery::new(problem, z.x, z.y, z.gx, z.gty, ctx.tau, ctx.sigma, r)?;
    normalized_gap(&q, problem, ws)
}

/// Metric value of `z` measured from `anchor`, or `None` when the gap
/// evaluation failed or came out negative.
pub fn restart_metric(
    problem: &ConicProblem,
    z: PointView<'_>,
    anchor_x: &[f64],
    anchor_y: &[f64],
    ctx: &MetricContext,
    metric: RestartMetric,
    ws: &mut ProjectionWorkspace,
) -> Result<Option<f64>> {
    match metric {
        RestartMetric::Kkt => kkt_omega(problem, z, ctx.omega, ws).map(Some),
        RestartMetric::Gap => match gap_against(problem, z, anchor_x, anchor_y, ctx, ws).map(|g| {
            if ctx.negate_gap {
                -g.abs() - 1.0
            } else {
                g
            }
        }) {
            Ok(g) if g >= NEGATIVE_GAP_THRESHOLD && g.is_finite() => Ok(Some(g.max(0.0))),
            Ok(_) | Err(SolverError::Numerical(_)) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidate {
    Last,
    Average,
}

/// Outcome of candidate selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateChoice {
    pub candidate: Candidate,
    pub value: f64,
    /// Metric actually used; `Kkt` when the gap evaluation failed.
    pub metric: RestartMetric,
}

/// Picks the candidate with the smaller metric; ties go to the last iterate.
/// With `average_only` the average is returned without comparison.
#[allow(clippy::too_many_arguments)]
pub fn get_restart_candidate(
    problem: &ConicProblem,
    last: PointView<'_>,
    average: PointView<'_>,
    anchor_x: &[f64],
    anchor_y: &[f64],
    ctx: &MetricContext,
    metric: RestartMetric,
    average_only: bool,
    ws: &mut ProjectionWorkspace,
) -> Result<CandidateChoice> {
    let evaluate = |metric: RestartMetric, ws: &mut ProjectionWorkspace| -> Result<Option<CandidateChoice>> {
        let bar = restart_metric(problem, average, anchor_x, anchor_y, ctx, metric, ws)?;
        if average_only {
            return Ok(bar.map(|value| CandidateChoice {
                candidate: Candidate::Average,
                value,
                metric,
            }));
        }
        let cur = restart_metric(problem, last, anchor_x, anchor_y, ctx, metric, ws)?;
        Ok(match (cur, bar) {
            (Some(a), Some(b)) if a <= b => Some(CandidateChoice {
                candidate: Candidate::Last,
                value: a,
                metric,
            }),
            (Some(_), Some(b)) => Some(CandidateChoice {
                candidate: Candidate::Average,
                value: b,
                metric,
            }),
            _ => None,
        })
    };
    if let Some(choice) = evaluate(metric, ws)? {
        return Ok(choice);
    }
    evaluate(RestartMetric::Kkt, ws)?
        .ok_or_else(|| SolverError::Numerical("restart metric unavailable".into()))
}

/// The three restart conditions. `prev_candidate` is `None` when no earlier
/// check of this inner loop is comparable.
pub fn should_restart(
    candidate: f64,
    prev_candidate: Option<f64>,
    last_restart: f64,
    k: usize,
    k_bar: usize,
    consts: &RestartConstants,
) -> bool {
    let sufficient = candidate <= consts.sufficient * last_restart;
    let necessary =
        prev_candidate.is_some_and(|p| candidate > p) && candidate <= consts.necessary * last_restart;
    let long_loop = k as f64 >= consts.artificial * k_bar as f64;
    sufficient || necessary || long_loop
}

/// `‖c‖₂/‖h‖₂` when both exceed 1e−10, else 1.
pub fn initialize_primal_weight(c: &[f64], h: &[f64]) -> f64 {
    let (nc, nh) = (two_norm(c), two_norm(h));
    if nc > 1e-10 && nh > 1e-10 {
        nc / nh
    } else {
        1.0
    }
}

/// Smoothed weight update at a restart, with the reset rule applied.
pub fn update_primal_weight(
    new_anchor: (&[f64], &[f64]),
    old_anchor: (&[f64], &[f64]),
    omega_prev: f64,
    omega_init: f64,
    consts: &RestartConstants,
) -> f64 {
    let dx = two_norm(&new_anchor.0.iter().zip(old_anchor.0).map(|(a, b)| a - b).collect::<Vec<_>>());
    let dy = two_norm(&new_anchor.1.iter().zip(old_anchor.1).map(|(a, b)| a - b).collect::<Vec<_>>());
    let omega = if dx > 1e-10 && dy > 1e-10 {
        (consts.theta * (dy / dx).ln() + (1.0 - consts.theta) * omega_prev.ln()).exp()
    } else {
        omega_prev
    };
    if omega > consts.omega_max || omega < consts.omega_min || !omega.is_finite() {
        omega_init
    } else {
        omega
    }
}

/// `bᵀ(z̃ − z)/r` for a given `z̃`, used by tests and diagnostics.
pub fn gap_value_at(q: &GapQuery<'_>, x: &[f64], y: &[f64]) -> f64 {
    let dx: Vec<f64> = x.iter().zip(q.x).map(|(a, b)| a - b).collect();
    let dy: Vec<f64> = y.iter().zip(q.y).map(|(a, b)| a - b).collect();
    (dot(&q.b1, &dx) + dot(&q.b2, &dy)) / q.r
}
