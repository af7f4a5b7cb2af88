//! Optimality and infeasibility measures, stopping rules and exit codes.

use std::collections::VecDeque;
use std::fmt;

use crate::cones::{
    project_dual_set, project_lambda_box, project_primal_cone_part, project_primal_dual_cone, project_row_cone,
    ProjectionWorkspace,
};
use crate::engine::SolverOptions;
use crate::error::{check_len, Result};
use crate::linalg::{dot, inf_norm, one_norm, squared_norm};
use crate::model::{dual_objective_parts, ConicProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitCode {
    Optimal,
    MaxIter,
    PrimalInfeasibleLowAcc,
    PrimalInfeasibleHighAcc,
    DualInfeasibleLowAcc,
    DualInfeasibleHighAcc,
    TimeLimit,
    Continue,
    NumericalError,
}

impl ExitCode {
    pub const ALL: [ExitCode; 9] = [
        ExitCode::Optimal,
        ExitCode::MaxIter,
        ExitCode::PrimalInfeasibleLowAcc,
        ExitCode::PrimalInfeasibleHighAcc,
        ExitCode::DualInfeasibleLowAcc,
        ExitCode::DualInfeasibleHighAcc,
        ExitCode::TimeLimit,
        ExitCode::Continue,
        ExitCode::NumericalError,
    ];

    pub fn code(self) -> i32 {
        match self {
            ExitCode::Optimal => 0,
            ExitCode::MaxIter => 1,
            ExitCode::PrimalInfeasibleLowAcc => 2,
            ExitCode::PrimalInfeasibleHighAcc => 3,
            ExitCode::DualInfeasibleLowAcc => 4,
            ExitCode::DualInfeasibleHighAcc => 5,
            ExitCode::TimeLimit => 6,
            ExitCode::Continue => 7,
            ExitCode::NumericalError => 8,
        }
    }

    pub fn status(self) -> &'static str {
        match self {
            ExitCode::Optimal => ":optimal",
            ExitCode::MaxIter => ":max_iter",
            ExitCode::PrimalInfeasibleLowAcc => ":primal_infeasible_low_acc",
            ExitCode::PrimalInfeasibleHighAcc => ":primal_infeasible_high_acc",
            ExitCode::DualInfeasibleLowAcc => ":dual_infeasible_low_acc",
            ExitCode::DualInfeasibleHighAcc => ":dual_infeasible_high_acc",
            ExitCode::TimeLimit => ":time_limit",
            ExitCode::Continue => ":continue",
            ExitCode::NumericalError => ":numerical_error",
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.code() == code)
    }

    pub fn from_status(status: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.status() == status)
    }

    /// True for the codes that answer the question the solver was asked.
    pub fn is_definitive(self) -> bool {
        matches!(self.code(), 0 | 2..=5)
    }
}

impl fmt::Display for ExitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.status(), self.code())
    }
}

/// All error measures at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub abs_p: f64,
    pub abs_d: f64,
    pub abs_gap: f64,
    pub rel_p1: f64,
    pub rel_d1: f64,
    pub rel_gap1: f64,
    pub abs_p_inf: f64,
    pub abs_d_inf: f64,
    pub abs_gap_term: f64,
    pub rel_p_inf: f64,
    pub rel_d_inf: f64,
    pub rel_gap_term: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
}

impl ErrorReport {
    pub fn is_finite(&self) -> bool {
        [
            self.abs_p,
            self.abs_d,
            self.abs_gap,
            self.primal_obj,
            self.dual_obj,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Errors at `(x, y)`, computing `Gx` and `Gᵀy` on the way.
pub fn compute_errors(
    problem: &ConicProblem,
    x: &[f64],
    y: &[f64],
    ws: &mut ProjectionWorkspace,
) -> Result<ErrorReport> {
    let gx = problem.g().matvec(x)?;
    let gty = problem.g().matvec_transpose(y)?;
    compute_errors_with_products(problem, x, y, &gx, &gty, ws)
}

/// Errors at `(x, y)` given `Gx` and `Gᵀy`.
pub fn compute_errors_with_products(
    problem: &ConicProblem,
    x: &[f64],
    y: &[f64],
    gx: &[f64],
    gty: &[f64],
    ws: &mut ProjectionWorkspace,
) -> Result<ErrorReport> {
    check_len("primal vector", problem.num_vars(), x.len())?;
    check_len("dual vector", problem.num_rows(), y.len())?;
    check_len("Gx", problem.num_rows(), gx.len())?;
    check_len("Gᵀy", problem.num_vars(), gty.len())?;
    let n1 = problem.num_box_vars();

    let residual: Vec<f64> = gx.iter().zip(problem.h()).map(|(a, b)| a - b).collect();
    let mut projected = residual.clone();
    project_row_cone(&mut projected, problem, ws)?;
    let primal_violation: Vec<f64> = residual.iter().zip(&projected).map(|(a, b)| a - b).collect();

    let lambda: Vec<f64> = problem.c().iter().zip(gty).map(|(c, g)| c - g).collect();
    let mut lambda_proj = lambda.clone();
    project_lambda_box(&mut lambda_proj[..n1], problem)?;
    project_primal_dual_cone(&mut lambda_proj[n1..], problem, ws)?;
    let dual_violation: Vec<f64> = lambda.iter().zip(&lambda_proj).map(|(a, b)| a - b).collect();

    let primal_obj = dot(problem.c(), x);
    let dual_obj = dual_objective_parts(problem.h(), problem.lower(), problem.upper(), y, &lambda[..n1]);
    let abs_gap = (primal_obj - dual_obj).abs();

    let abs_p = squared_norm(&primal_violation).sqrt();
    let abs_d = squared_norm(&dual_violation).sqrt();
    let abs_p_inf = inf_norm(&primal_violation);
    let abs_d_inf = inf_norm(&dual_violation);

    let h_inf = inf_norm(problem.h());
    let c_inf = inf_norm(problem.c());
    Ok(ErrorReport {
        abs_p,
        abs_d,
        abs_gap,
        rel_p1: abs_p / (1.0 + one_norm(problem.h())),
        rel_d1: abs_d / (1.0 + one_norm(problem.c())),
        rel_gap1: abs_gap / (1.0 + primal_obj.abs() + dual_obj.abs()),
        abs_p_inf,
        abs_d_inf,
        abs_gap_term: abs_gap,
        rel_p_inf: abs_p_inf / (1.0 + h_inf.max(inf_norm(gx)).max(inf_norm(&projected))),
        rel_d_inf: abs_d_inf / (1.0 + c_inf.max(inf_norm(gty))),
        rel_gap_term: abs_gap / (1.0 + primal_obj.abs().max(dual_obj.abs())),
        primal_obj,
        dual_obj,
    })
}

/// Largest of the three relative errors with 1-norm denominators.
pub fn max_err(report: &ErrorReport) -> f64 {
    report.rel_p1.max(report.rel_d1).max(report.rel_gap1)
}

/// `clamp(−0.1·log₁₀(maxErr) + 0.2, 0, 1)`; an exact zero error gives 1.
pub fn adaptive_reflection_parameter(max_err: f64) -> f64 {
    if max_err <= 0.0 {
        return 1.0;
    }
    if !max_err.is_finite() {
        return 0.0;
    }
    (-0.1 * max_err.log10() + 0.2).clamp(0.0, 1.0)
}

/// Progress counters the stopping rules look at.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunState {
    pub iterations: usize,
    pub elapsed_sec: f64,
    pub numerical_error: bool,
}

/// Returns the stopping reason, or [`ExitCode::Continue`].
pub fn check_termination(report: Option<&ErrorReport>, options: &SolverOptions, state: &RunState) -> ExitCode {
    if state.numerical_error || report.is_some_and(|r| !r.is_finite()) {
        return ExitCode::NumericalError;
    }
    if let Some(r) = report {
        let abs_ok = r.abs_p_inf <= options.abs_tol
            && r.abs_d_inf <= options.abs_tol
            && r.abs_gap_term <= options.abs_tol;
        let rel_ok = r.rel_p_inf <= options.rel_tol
            && r.rel_d_inf <= options.rel_tol
            && r.rel_gap_term <= options.rel_tol;
        if abs_ok && rel_ok {
            return ExitCode::Optimal;
        }
    }
    if state.elapsed_sec > options.time_limit {
        return ExitCode::TimeLimit;
    }
    if options.max_iter.is_some_and(|cap| state.iterations >= cap) {
        return ExitCode::MaxIter;
    }
    ExitCode::Continue
}

/// Objective values over the most recent checks.
#[derive(Debug, Clone, Default)]
pub struct InfeasibilityHistory {
    dual_obj: VecDeque<f64>,
    neg_primal_obj: VecDeque<f64>,
}

const TREND_WINDOW: usize = 3;

fn push_bounded(queue: &mut VecDeque<f64>, value: f64) {
    if queue.len() == TREND_WINDOW {
        queue.pop_front();
    }
    queue.push_back(value);
}

fn strictly_increasing(queue: &VecDeque<f64>) -> bool {
    queue.len() == TREND_WINDOW && queue.iter().zip(queue.iter().skip(1)).all(|(a, b)| a < b)
}

impl InfeasibilityHistory {
    pub fn clear(&mut self) {
        self.dual_obj.clear();
        self.neg_primal_obj.clear();
    }
}

/// Ratios of the infeasibility tests, evaluated on a ray `(Δx, Δy)`.
/// `None` when the denominator is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InfeasibilityRatios {
    /// Dual residual over dual objective of the multiplier ray.
    pub primal: Option<f64>,
    /// Relative primal residual over `−⟨c, Δx⟩` of the primal ray.
    pub dual: Option<f64>,
}

/// Evaluates both ratios on the homogeneous instance. The multiplier ray is
/// first projected onto `C*` and paired with `λ = −GᵀΔy`; the primal ray is
/// projected onto the recession cone of `[l, u] × K_p` and measured against
/// `h = 0`.
pub fn infeasibility_ratios(
    problem: &ConicProblem,
    dx: &[f64],
    dy: &[f64],
    ws: &mut ProjectionWorkspace,
) -> Result<InfeasibilityRatios> {
    check_len("primal ray", problem.num_vars(), dx.len())?;
    check_len("dual ray", problem.num_rows(), dy.len())?;
    let n1 = problem.num_box_vars();

    let mut y = dy.to_vec();
    project_dual_set(&mut y, problem, ws)?;
    let lambda: Vec<f64> = problem.g().matvec_transpose(&y)?.iter().map(|g| -g).collect();
    let mut lambda_proj = lambda.clone();
    project_lambda_box(&mut lambda_proj[..n1], problem)?;
    project_primal_dual_cone(&mut lambda_proj[n1..], problem, ws)?;
    let dual_residual = lambda.iter().zip(&lambda_proj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dual_obj = dual_objective_parts(problem.h(), problem.lower(), problem.upper(), &y, &lambda[..n1]);
    let primal = (dual_obj > 0.0).then(|| dual_residual / dual_obj);

    let mut x = dx.to_vec();
    for ((v, &l), &u) in x[..n1].iter_mut().zip(problem.lower()).zip(problem.upper()) {
        if l.is_finite() {
            *v = v.max(0.0);
        }
        if u.is_finite() {
            *v = v.min(0.0);
        }
    }
    project_primal_cone_part(&mut x, problem, ws)?;
    let gx = problem.g().matvec(&x)?;
    let mut projected = gx.clone();
    project_row_cone(&mut projected, problem, ws)?;
    let residual = gx.iter().zip(&projected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let rel_p = residual / (1.0 + inf_norm(&gx).max(inf_norm(&projected)));
    let descent = -dot(problem.c(), &x);
    let dual = (descent > 0.0).then(|| rel_p / descent);

    Ok(InfeasibilityRatios { primal, dual })
}

/// Ratio tests for infeasibility. Records the objectives of `report` in
/// `history` first, so the trend condition includes the current check.
pub fn check_infeasibility(
    report: &ErrorReport,
    ratios: &InfeasibilityRatios,
    history: &mut InfeasibilityHistory,
    options: &SolverOptions,
) -> Option<ExitCode> {
    push_bounded(&mut history.dual_obj, report.dual_obj);
    push_bounded(&mut history.neg_primal_obj, -report.primal_obj);

    if let Some(ratio) = ratios.primal {
        if ratio < options.eps_primal_infeasible_high_acc {
            return Some(ExitCode::PrimalInfeasibleHighAcc);
        }
        if ratio < options.eps_primal_infeasible_low_acc && strictly_increasing(&history.dual_obj) {
            return Some(ExitCode::PrimalInfeasibleLowAcc);
        }
    }
    if let Some(ratio) = ratios.dual {
        if ratio < options.eps_dual_infeasible_high_acc {
            return Some(ExitCode::DualInfeasibleHighAcc);
        }
        if ratio < options.eps_dual_infeasible_low_acc && strictly_increasing(&history.neg_primal_obj) {
            return Some(ExitCode::DualInfeasibleLowAcc);
        }
    }
    None
}
