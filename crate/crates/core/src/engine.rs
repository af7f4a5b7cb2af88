//! The iteration: PDHG steps with line search, reflected Halpern updates,
//! weighted averaging, restarts and the outer driver.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use crate::cones::{project_dual_set, project_primal_set, ProjectionWorkspace, RootFinding};
use crate::error::{check_len, Result, SolverError};
use crate::model::{recover_dual, rsoc_to_soc, ConicProblem, RsocTransform};
use crate::restart::{
    gap_against, get_restart_candidate, initialize_primal_weight, kkt_omega, should_restart, update_primal_weight,
    Candidate, MetricContext, PointView, RestartConstants, RestartMetric, NEGATIVE_GAP_THRESHOLD,
};
use crate::scaling::{build_scaling, rescale_problem, unscale_solution, ScalingOptions, ScalingPair};
use crate::termination::{
    adaptive_reflection_parameter, check_infeasibility, check_termination, compute_errors,
    compute_errors_with_products, infeasibility_ratios, max_err, ErrorReport, ExitCode, InfeasibilityHistory,
    RunState,
};

const MAX_LINE_SEARCH_TRIALS: usize = 60;
const MIN_STEP: f64 = 1e-12;
const POWER_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Restart candidate is the weighted average only.
    Average,
    /// Restart candidate is the better of the last iterate and the average.
    Halpern,
}

/// Norm of `Ĝ` used for the initial step `1/‖Ĝ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepNorm {
    MaxAbs,
    InducedInf,
}

/// Fault injection for exercising the failure paths.
#[doc(hidden)]
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DebugHooks {
    pub negate_gap: bool,
    pub nan_at_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub time_limit: f64,
    pub max_iter: Option<usize>,
    pub print_freq: usize,
    pub method: Method,
    pub use_adaptive_restart: bool,
    pub use_adaptive_step_size_weight: bool,
    pub use_kkt_restart: bool,
    pub kkt_restart_freq: usize,
    pub use_duality_gap_restart: bool,
    pub duality_gap_restart_freq: usize,
    pub eps_primal_infeasible_low_acc: f64,
    pub eps_dual_infeasible_low_acc: f64,
    pub eps_primal_infeasible_high_acc: f64,
    pub eps_dual_infeasible_high_acc: f64,
    pub verbose: u8,
    pub logfile: Option<PathBuf>,
    pub use_preconditioner: bool,
    pub scaling: ScalingOptions,
    pub initial_step_norm: StepNorm,
    /// `false` runs plain PDHG: the next iterate is the PDHG output.
    pub use_halpern: bool,
    /// Fixed reflection parameter; `None` selects it from the current error.
    pub reflection: Option<f64>,
    pub restart_constants: RestartConstants,
    pub root_finding: RootFinding,
    #[doc(hidden)]
    pub debug: DebugHooks,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-6,
            time_limit: 1000.0,
            max_iter: None,
            print_freq: 2000,
            method: Method::Halpern,
            use_adaptive_restart: true,
            use_adaptive_step_size_weight: true,
            use_kkt_restart: false,
            kkt_restart_freq: 2000,
            use_duality_gap_restart: true,
            duality_gap_restart_freq: 2000,
            eps_primal_infeasible_low_acc: 1e-12,
            eps_dual_infeasible_low_acc: 1e-12,
            eps_primal_infeasible_high_acc: 1e-16,
            eps_dual_infeasible_high_acc: 1e-16,
            verbose: 0,
            logfile: None,
            use_preconditioner: true,
            scaling: ScalingOptions::default(),
            initial_step_norm: StepNorm::MaxAbs,
            use_halpern: true,
            reflection: None,
            restart_constants: RestartConstants::default(),
            root_finding: RootFinding::default(),
            debug: DebugHooks::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SolverError::InvalidInput(msg));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad(format!("tolerances must be positive (rel {}, abs {})", self.rel_tol, self.abs_tol));
        }
        if !(self.time_limit >= 0.0) {
            return bad(format!("time limit must be nonnegative, got {}", self.time_limit));
        }
        if self.print_freq == 0 || self.kkt_restart_freq == 0 || self.duality_gap_restart_freq == 0 {
            return bad("frequencies must be at least 1".into());
        }
        if let Some(beta) = self.reflection {
            if !(0.0..=1.0).contains(&beta) {
                return bad(format!("reflection parameter must lie in [0, 1], got {beta}"));
            }
        }
        for eps in [
            self.eps_primal_infeasible_low_acc,
            self.eps_dual_infeasible_low_acc,
            self.eps_primal_infeasible_high_acc,
            self.eps_dual_infeasible_high_acc,
        ] {
            if !(eps >= 0.0) {
                return bad(format!("infeasibility tolerances must be nonnegative, got {eps}"));
            }
        }
        Ok(())
    }

    /// Iterations between restart and termination checks.
    pub fn check_frequency(&self) -> usize {
        if !self.use_duality_gap_restart && self.use_kkt_restart {
            self.kkt_restart_freq
        } else {
            self.duality_gap_restart_freq
        }
    }
}

/// A primal-dual point with cached `Gx` and `Gᵀy`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateZ {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gx: Vec<f64>,
    pub gty: Vec<f64>,
}

impl IterateZ {
    pub fn zeros(n: usize, m: usize) -> Self {
        IterateZ {
            x: vec![0.0; n],
            y: vec![0.0; m],
            gx: vec![0.0; m],
            gty: vec![0.0; n],
        }
    }

    /// Builds the point and computes both products.
    pub fn new(problem: &ConicProblem, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let gx = problem.g().matvec(&x)?;
        let gty = problem.g().matvec_transpose(&y)?;
        Ok(IterateZ { x, y, gx, gty })
    }

    pub fn view(&self) -> PointView<'_> {
        PointView {
            x: &self.x,
            y: &self.y,
            gx: &self.gx,
            gty: &self.gty,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    fn refresh(&mut self, problem: &ConicProblem, counts: &mut MatvecCounts) -> Result<()> {
        problem.g().matvec_into(&self.x, &mut self.gx)?;
        problem.g().matvec_transpose_into(&self.y, &mut self.gty)?;
        counts.aux_g += 1;
        counts.aux_gt += 1;
        Ok(())
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.x, &mut self.y, &mut self.gx, &mut self.gty]
    }

    fn parts(&self) -> [&Vec<f64>; 4] {
        [&self.x, &self.y, &self.gx, &self.gty]
    }
}

/// Matrix products performed during a solve. The `pdhg_*` counters cover the
/// iteration itself; `aux_*` covers checks, refreshes and set-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatvecCounts {
    pub pdhg_g: usize,
    pub pdhg_gt: usize,
    pub aux_g: usize,
    pub aux_gt: usize,
}

/// `(x̂, ŷ)` with `Gx̂`; `Gᵀŷ` is left to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct PdhgOutput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gx: Vec<f64>,
}

fn pdhg_candidate(
    problem: &ConicProblem,
    z: &IterateZ,
    tau: f64,
    sigma: f64,
    ws: &mut ProjectionWorkspace,
    counts: &mut MatvecCounts,
) -> Result<PdhgOutput> {
    let mut x: Vec<f64> = z
        .x
        .iter()
        .zip(problem.c())
        .zip(&z.gty)
        .map(|((x, c), g)| x - tau * (c - g))
        .collect();
    project_primal_set(&mut x, problem, ws)?;
    let mut gx = vec![0.0; problem.num_rows()];
    problem.g().matvec_into(&x, &mut gx)?;
    counts.pdhg_g += 1;
    let mut y: Vec<f64> = z
        .y
        .iter()
        .zip(problem.h())
        .zip(gx.iter().zip(&z.gx))
        .map(|((y, h), (gn, go))| y + sigma * (h - (2.0 * gn - go)))
        .collect();
    project_dual_set(&mut y, problem, ws)?;
    Ok(PdhgOutput { x, y, gx })
}

/// One PDHG step from `z`: `x̂ = proj(x − τ(c − Gᵀy))`,
/// `ŷ = proj(y + σ(h − G(2x̂ − x)))`.
pub fn one_pdhg(
    problem: &ConicProblem,
    z: &IterateZ,
    tau: f64,
    sigma: f64,
    ws: &mut ProjectionWorkspace,
) -> Result<PdhgOutput> {
    if !(tau > 0.0 && sigma > 0.0) {
        return Err(SolverError::InvalidInput(format!("step sizes must be positive (τ={tau}, σ={sigma})")));
    }
    check_len("primal vector", problem.num_vars(), z.x.len())?;
    check_len("dual vector", problem.num_rows(), z.y.len())?;
    pdhg_candidate(problem, z, tau, sigma, ws, &mut MatvecCounts::default())
}

/// Result of one accepted line-search step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStep {
    pub output: PdhgOutput,
    pub eta_used: f64,
    pub eta_next: f64,
    /// `η̄` of the accepted candidate.
    pub eta_bar: f64,
    pub k_bar: usize,
    pub rejections: usize,
}

/// `½‖Δz‖²_ω / |Δyᵀ G Δx|`, infinite when the denominator vanishes.
fn step_limit(z: &IterateZ, out: &PdhgOutput, omega: f64) -> f64 {
    let mut dx2 = 0.0;
    for (a, b) in out.x.iter().zip(&z.x) {
        dx2 += (a - b) * (a - b);
    }
    let mut dy2 = 0.0;
    let mut cross = 0.0;
    for ((a, b), (gn, go)) in out.y.iter().zip(&z.y).zip(out.gx.iter().zip(&z.gx)) {
        dy2 += (a - b) * (a - b);
        cross += (a - b) * (gn - go);
    }
    let num = 0.5 * (omega * dx2 + dy2 / omega);
    let den = cross.abs();
    if den == 0.0 {
        if num.is_nan() {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `min{(1 − (k̄+1)^−0.3) η̄, (1 + (k̄+1)^−0.6) η}`, floored at 1e−12.
pub fn next_step_size(eta: f64, eta_bar: f64, k_bar: usize) -> f64 {
    let k1 = (k_bar + 1) as f64;
    let shrink = (1.0 - k1.powf(-0.3)) * eta_bar;
    let grow = (1.0 + k1.powf(-0.6)) * eta;
    shrink.min(grow).max(MIN_STEP)
}

/// PDHG step with the adaptive step-size search.
pub fn adaptive_step_pdhg(
    problem: &ConicProblem,
    z: &IterateZ,
    omega: f64,
    eta: f64,
    k_bar: usize,
    ws: &mut ProjectionWorkspace,
    counts: &mut MatvecCounts,
) -> Result<AdaptiveStep> {
    if !(omega > 0.0 && eta > 0.0) {
        return Err(SolverError::InvalidInput(format!("ω and η must be positive (ω={omega}, η={eta})")));
    }
    let mut eta = eta;
    let mut k_bar = k_bar;
    for trial in 0..MAX_LINE_SEARCH_TRIALS {
        let output = pdhg_candidate(problem, z, eta / omega, eta * omega, ws, counts)?;
        let eta_bar = step_limit(z, &output, omega);
        if eta_bar.is_nan() {
            return Err(SolverError::Numerical("non-finite step-size bound".into()));
        }
        let eta_next = next_step_size(eta, eta_bar, k_bar);
        if eta < eta_bar {
            return Ok(AdaptiveStep {
                output,
                eta_used: eta,
                eta_next,
                eta_bar,
                k_bar,
                rejections: trial,
            });
        }
        eta = eta_next;
        k_bar += 1;
    }
    Err(SolverError::Numerical(format!(
        "step-size search rejected {MAX_LINE_SEARCH_TRIALS} candidates"
    )))
}

/// `(k+1)/(k+2)·((1+β)ẑ − βz) + 1/(k+2)·anchor`
pub fn reflected_halpern_step(z_hat: &[f64], z_old: &[f64], anchor: &[f64], k: usize, beta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(z_hat.len());
    reflected_halpern_into(&mut out, z_hat, z_old, anchor, k, beta);
    out
}

fn reflected_halpern_into(out: &mut Vec<f64>, z_hat: &[f64], z_old: &[f64], anchor: &[f64], k: usize, beta: f64) {
    let a = (k + 1) as f64 / (k + 2) as f64;
    let b = 1.0 / (k + 2) as f64;
    out.clear();
    out.extend(
        z_hat
            .iter()
            .zip(z_old)
            .zip(anchor)
            .map(|((h, o), s)| a * ((1.0 + beta) * h - beta * o) + b * s),
    );
}

/// Streaming weighted average; returns the new accumulated weight.
pub fn update_weighted_average(z_bar: &mut [f64], weight: f64, z_new: &[f64], eta: f64) -> f64 {
    let total = weight + eta;
    if weight == 0.0 {
        z_bar.copy_from_slice(z_new);
    } else {
        let (a, b) = (weight / total, eta / total);
        for (zb, zn) in z_bar.iter_mut().zip(z_new) {
            *zb = a * *zb + b * zn;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    /// Accepted PDHG iterations.
    pub iterations: usize,
    /// Accepted iterations plus rejected line-search trials.
    pub total_steps: usize,
    pub restarts: usize,
    pub line_search_rejections: usize,
    /// Checks at which the gap evaluation failed and the KKT measure was used.
    pub kkt_fallbacks: usize,
    pub matvecs: MatvecCounts,
    pub final_eta: f64,
    pub final_omega: f64,
    pub solve_time_sec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub exit: ExitCode,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Reduced costs `c − Gᵀy`.
    pub lambda: Vec<f64>,
    /// `Gx − h`
    pub slack: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub errors: ErrorReport,
    pub stats: SolveStats,
    /// Iteration log lines, present when `verbose ≥ 1` or a log file is set.
    pub log: Vec<String>,
}

pub const LOG_HEADER: &str = "iter\tprimal_obj\tdual_obj\trel_p\trel_d\trel_gap\teta\tomega\trestarts";

struct Logger {
    echo: bool,
    detail: bool,
    file: Option<BufWriter<File>>,
    lines: Vec<String>,
}

impl Logger {
    fn new(options: &SolverOptions) -> Result<Self> {
        let file = match &options.logfile {
            Some(path) => Some(BufWriter::new(File::create(path)?)),
            None => None,
        };
        let mut logger = Logger {
            echo: options.verbose >= 1,
            detail: options.verbose >= 2,
            file,
            lines: Vec::new(),
        };
        if logger.enabled() {
            logger.emit(LOG_HEADER.to_string())?;
        }
        Ok(logger)
    }

    fn enabled(&self) -> bool {
        self.echo || self.file.is_some()
    }

    fn emit(&mut self, line: String) -> Result<()> {
        if self.echo {
            println!("{line}");
        }
        if let Some(f) = &mut self.file {
            writeln!(f, "{line}")?;
        }
        self.lines.push(line);
        Ok(())
    }

    fn row(&mut self, iter: usize, r: &ErrorReport, eta: f64, omega: f64, restarts: usize) -> Result<()> {
        self.emit(format!(
            "{iter}\t{:.10e}\t{:.10e}\t{:.3e}\t{:.3e}\t{:.3e}\t{:.3e}\t{:.3e}\t{restarts}",
            r.primal_obj, r.dual_obj, r.rel_p_inf, r.rel_d_inf, r.rel_gap_term, eta, omega
        ))
    }

    fn note(&mut self, text: String) -> Result<()> {
        if self.detail {
            self.emit(format!("# {text}"))?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<String>> {
        if let Some(f) = &mut self.file {
            f.flush()?;
        }
        Ok(self.lines)
    }
}

/// The instance the iteration runs on and the maps back to the input.
struct Prepared {
    /// Input with rotated blocks rewritten, unscaled.
    base: ConicProblem,
    /// `base` after diagonal scaling.
    work: ConicProblem,
    scaling: ScalingPair,
    rotation: RsocTransform,
}

impl Prepared {
    fn new(problem: &ConicProblem, options: &SolverOptions) -> Result<Self> {
        let base = rsoc_to_soc(problem)?;
        let scaling = if options.use_preconditioner {
            build_scaling(&base, &options.scaling)
        } else {
            ScalingPair::identity(base.num_rows(), base.num_vars())
        };
        let work = rescale_problem(&base, &scaling)?;
        Ok(Prepared {
            base,
            work,
            scaling,
            rotation: RsocTransform::of(problem),
        })
    }

    /// Working point in the variables of `base`.
    fn to_base(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        unscale_solution(x, y, &self.scaling)
    }

    fn base_report(
        &self,
        z: &IterateZ,
        ws: &mut ProjectionWorkspace,
        counts: &mut MatvecCounts,
    ) -> Result<ErrorReport> {
        let (x, y) = self.to_base(&z.x, &z.y)?;
        counts.aux_g += 1;
        counts.aux_gt += 1;
        compute_errors(&self.base, &x, &y, ws)
    }
}

/// First step size on the instance the iteration runs on: `1/‖G‖` in the
/// configured norm, or `0.9/‖G‖₂` in fixed-step mode.
pub fn initial_step_size(options: &SolverOptions, work: &ConicProblem) -> Result<f64> {
    let g = work.g();
    let norm = if options.use_adaptive_step_size_weight {
        match options.initial_step_norm {
            StepNorm::MaxAbs => g.max_abs().unwrap_or(0.0),
            StepNorm::InducedInf => g.induced_inf_norm().unwrap_or(0.0),
        }
    } else {
        g.spectral_norm_estimate(POWER_ITERATIONS) / 0.9
    };
    Ok(if norm > 0.0 && norm.is_finite() { 1.0 / norm } else { 1.0 })
}

fn combine_into(target: &mut IterateZ, z_hat: &IterateZ, z_old: &IterateZ, anchor: &IterateZ, k: usize, beta: f64) {
    let hat = z_hat.parts();
    let old = z_old.parts();
    let anc = anchor.parts();
    for (i, out) in target.parts_mut().into_iter().enumerate() {
        reflected_halpern_into(out, hat[i], old[i], anc[i], k, beta);
    }
}

fn average_into(z_bar: &mut IterateZ, weight: f64, z_new: &IterateZ, eta: f64) -> f64 {
    let new = z_new.parts();
    let mut total = 0.0;
    for (i, out) in z_bar.parts_mut().into_iter().enumerate() {
        total = update_weighted_average(out, weight, new[i], eta);
    }
    total
}

fn numerical(err: SolverError) -> Result<ExitCode> {
    match err {
        SolverError::Numerical(msg) => {
            log::warn!("numerical error: {msg}");
            Ok(ExitCode::NumericalError)
        }
        other => Err(other),
    }
}

/// Restart metric of a fresh anchor measured from the previous one, falling
/// back to the KKT measure when the gap evaluation fails.
fn anchor_metric(
    work: &ConicProblem,
    anchor: &IterateZ,
    reference: (&[f64], &[f64]),
    ctx: &MetricContext,
    metric: RestartMetric,
    negate: bool,
    ws: &mut ProjectionWorkspace,
) -> Result<(f64, RestartMetric)> {
    if metric == RestartMetric::Gap {
        if let Ok(g) = gap_against(work, anchor.view(), reference.0, reference.1, ctx, ws) {
            let g = if negate { -g.abs() - 1.0 } else { g };
            if g.is_finite() && g >= NEGATIVE_GAP_THRESHOLD {
                return Ok((g.max(0.0), RestartMetric::Gap));
            }
        }
    }
    Ok((kkt_omega(work, anchor.view(), ctx.omega, ws)?, RestartMetric::Kkt))
}

/// Solves `problem`. Errors are returned only for invalid input; numerical
/// trouble during the iteration ends the solve with [`ExitCode::NumericalError`].
pub fn solve(problem: &ConicProblem, options: &SolverOptions) -> Result<SolveResult> {
    options.validate()?;
    let start = Instant::now();
    let prepared = Prepared::new(problem, options)?;
    let work = &prepared.work;
    let (n, m) = (work.num_vars(), work.num_rows());
    let mut ws = ProjectionWorkspace::for_problem(work);
    ws.root = options.root_finding;
    let mut logger = Logger::new(options)?;
    let consts = options.restart_constants;
    let mut counts = MatvecCounts::default();

    let omega_init = initialize_primal_weight(work.c(), work.h());
    let mut omega = omega_init;
    let fixed_step = !options.use_adaptive_step_size_weight;
    if fixed_step {
        counts.aux_g += POWER_ITERATIONS;
        counts.aux_gt += POWER_ITERATIONS;
    }
    let mut eta_hat = initial_step_size(options, work)?;

    let mut z = IterateZ::zeros(n, m);
    let mut anchor = z.clone();
    let mut z_bar = z.clone();
    let mut z_hat = z.clone();
    let mut next = z.clone();
    let mut weight = 0.0;

    let restart_enabled =
        options.use_adaptive_restart && (options.use_duality_gap_restart || options.use_kkt_restart);
    let base_metric = if options.use_duality_gap_restart {
        RestartMetric::Gap
    } else {
        RestartMetric::Kkt
    };
    let mut metric = base_metric;
    let mut last_restart_value: Option<f64> = None;
    let mut prev_candidate: Option<f64> = None;
    let check_freq = options.check_frequency();
    let mut history = InfeasibilityHistory::default();
    let mut stats = SolveStats::default();
    let (mut k, mut k_bar) = (0usize, 0usize);

    // Point returned on exit, `None` meaning the latest PDHG output.
    let mut output: Option<IterateZ> = None;

    let exit = 'outer: loop {
        let state = RunState {
            iterations: stats.iterations,
            elapsed_sec: start.elapsed().as_secs_f64(),
            numerical_error: false,
        };
        let code = check_termination(None, options, &state);
        if code != ExitCode::Continue {
            break code;
        }

        k_bar += 1;
        let step = if fixed_step {
            pdhg_candidate(work, &z, eta_hat / omega, eta_hat * omega, &mut ws, &mut counts).map(|output| {
                AdaptiveStep {
                    output,
                    eta_used: eta_hat,
                    eta_next: eta_hat,
                    eta_bar: f64::INFINITY,
                    k_bar,
                    rejections: 0,
                }
            })
        } else {
            adaptive_step_pdhg(work, &z, omega, eta_hat, k_bar, &mut ws, &mut counts)
        };
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                output = Some(anchor.clone());
                break numerical(e)?;
            }
        };
        k_bar = step.k_bar;
        stats.line_search_rejections += step.rejections;
        eta_hat = step.eta_next;
        z_hat.x = step.output.x;
        z_hat.y = step.output.y;
        z_hat.gx = step.output.gx;
        work.g().matvec_transpose_into(&z_hat.y, &mut z_hat.gty)?;
        counts.pdhg_gt += 1;
        if options.debug.nan_at_iteration == Some(stats.iterations + 1) {
            if let Some(v) = z_hat.x.first_mut().or(z_hat.y.first_mut()) {
                *v = f64::NAN;
            }
        }
        if !z_hat.is_finite() {
            output = Some(anchor.clone());
            break ExitCode::NumericalError;
        }

        if options.use_halpern {
            let beta = match options.reflection {
                Some(b) => b,
                None => {
                    let r = compute_errors_with_products(work, &z_hat.x, &z_hat.y, &z_hat.gx, &z_hat.gty, &mut ws);
                    match r {
                        Ok(r) => adaptive_reflection_parameter(max_err(&r)),
                        Err(e) => {
                            output = Some(anchor.clone());
                            break numerical(e)?;
                        }
                    }
                }
            };
            combine_into(&mut next, &z_hat, &z, &anchor, k, beta);
            std::mem::swap(&mut z, &mut next);
        } else {
            z.clone_from(&z_hat);
        }
        weight = average_into(&mut z_bar, weight, &z, step.eta_used);
        k += 1;
        stats.iterations += 1;
        if !z.is_finite() {
            output = Some(anchor.clone());
            break ExitCode::NumericalError;
        }

        if logger.enabled() && stats.iterations % options.print_freq == 0 {
            let r = prepared.base_report(&z_hat, &mut ws, &mut counts)?;
            logger.row(stats.iterations, &r, eta_hat, omega, stats.restarts)?;
        }

        if stats.iterations % check_freq != 0 {
            continue;
        }

        // Termination and infeasibility.
        z.refresh(work, &mut counts)?;
        z_bar.refresh(work, &mut counts)?;
        let report = prepared.base_report(&z_hat, &mut ws, &mut counts)?;
        let state = RunState {
            iterations: stats.iterations,
            elapsed_sec: start.elapsed().as_secs_f64(),
            numerical_error: false,
        };
        let code = check_termination(Some(&report), options, &state);
        if matches!(code, ExitCode::Optimal | ExitCode::NumericalError) {
            break code;
        }
        if options.method == Method::Average {
            let r = prepared.base_report(&z_bar, &mut ws, &mut counts)?;
            if check_termination(Some(&r), options, &state) == ExitCode::Optimal {
                output = Some(z_bar.clone());
                break ExitCode::Optimal;
            }
        }
        let ratios = {
            let dx: Vec<f64> = z_hat.x.iter().zip(&anchor.x).map(|(a, b)| a - b).collect();
            let dy: Vec<f64> = z_hat.y.iter().zip(&anchor.y).map(|(a, b)| a - b).collect();
            let (dx, dy) = prepared.to_base(&dx, &dy)?;
            counts.aux_g += 1;
            counts.aux_gt += 1;
            infeasibility_ratios(&prepared.base, &dx, &dy, &mut ws)?
        };
        if let Some(code) = check_infeasibility(&report, &ratios, &mut history, options) {
            break code;
        }
        if !restart_enabled {
            continue;
        }

        // Restart check.
        let ctx = MetricContext {
            tau: eta_hat / omega,
            sigma: eta_hat * omega,
            omega,
            negate_gap: false,
        };
        let negate = options.debug.negate_gap;
        let last_value = match last_restart_value {
            Some(v) => v,
            None => {
                // First inner loop: radius from one plain step off the anchor.
                let probe = match pdhg_candidate(work, &anchor, ctx.tau, ctx.sigma, &mut ws, &mut counts) {
                    Ok(p) => p,
                    Err(e) => {
                        output = Some(anchor.clone());
                        break numerical(e)?;
                    }
                };
                counts.pdhg_g -= 1;
                counts.aux_g += 1;
                let (v, used) = anchor_metric(work, &anchor, (&probe.x, &probe.y), &ctx, metric, negate, &mut ws)?;
                if used != metric {
                    metric = used;
                    stats.kkt_fallbacks += 1;
                }
                last_restart_value = Some(v);
                v
            }
        };
        let mut ctx_checked = ctx;
        ctx_checked.negate_gap = negate;
        let choice = match get_restart_candidate(
            work,
            z.view(),
            z_bar.view(),
            &anchor.x,
            &anchor.y,
            &ctx_checked,
            metric,
            options.method == Method::Average,
            &mut ws,
        ) {
            Ok(c) => c,
            Err(e) => {
                output = Some(anchor.clone());
                break numerical(e)?;
            }
        };
        let mut last_value = last_value;
        if choice.metric != metric {
            metric = choice.metric;
            stats.kkt_fallbacks += 1;
            prev_candidate = None;
            last_value = kkt_omega(work, anchor.view(), omega, &mut ws)?;
            last_restart_value = Some(last_value);
        }
        if !should_restart(choice.value, prev_candidate, last_value, k, k_bar, &consts) {
            prev_candidate = Some(choice.value);
            continue;
        }

        let new_anchor = match choice.candidate {
            Candidate::Last => z.clone(),
            Candidate::Average => z_bar.clone(),
        };
        if !fixed_step {
            omega = update_primal_weight(
                (&new_anchor.x, &new_anchor.y),
                (&anchor.x, &anchor.y),
                omega,
                omega_init,
                &consts,
            );
        }
        let ctx = MetricContext {
            tau: eta_hat / omega,
            sigma: eta_hat * omega,
            omega,
            negate_gap: false,
        };
        let (v, used) = anchor_metric(work, &new_anchor, (&anchor.x, &anchor.y), &ctx, base_metric, negate, &mut ws)?;
        if used != base_metric {
            stats.kkt_fallbacks += 1;
        }
        metric = used;
        last_restart_value = Some(v);
        prev_candidate = None;
        anchor = new_anchor;
        z.clone_from(&anchor);
        z_bar.clone_from(&anchor);
        weight = 0.0;
        k = 0;
        stats.restarts += 1;
        logger.note(format!(
            "restart {} at iteration {}: {:?} candidate, metric {:.3e}, omega {:.3e}",
            stats.restarts, stats.iterations, choice.candidate, choice.value, omega
        ))?;

        let r = prepared.base_report(&anchor, &mut ws, &mut counts)?;
        if check_termination(Some(&r), options, &state) == ExitCode::Optimal {
            output = Some(anchor.clone());
            break 'outer ExitCode::Optimal;
        }
    };

    let final_point = output.unwrap_or(z_hat);
    let (mut x, mut y) = prepared.to_base(&final_point.x, &final_point.y)?;
    prepared.rotation.map_cols(&mut x);
    prepared.rotation.map_rows(&mut y);
    let errors = compute_errors(problem, &x, &y, &mut ws)?;
    let recovery = recover_dual(problem, &y)?;
    let mut slack = problem.g().matvec(&x)?;
    for (s, h) in slack.iter_mut().zip(problem.h()) {
        *s -= h;
    }
    let lambda = problem
        .c()
        .iter()
        .zip(problem.g().matvec_transpose(&y)?)
        .map(|(c, g)| c - g)
        .collect::<Vec<_>>();
    debug_assert_eq!(recovery.lambda1().len(), problem.num_box_vars());

    stats.total_steps = k_bar;
    stats.matvecs = counts;
    stats.final_eta = eta_hat;
    stats.final_omega = omega;
    stats.solve_time_sec = start.elapsed().as_secs_f64();
    if logger.enabled() {
        logger.row(stats.iterations, &errors, eta_hat, omega, stats.restarts)?;
        logger.emit(format!("# exit {}", exit))?;
    }
    let log = logger.finish()?;

    Ok(SolveResult {
        exit,
        primal_obj: errors.primal_obj,
        dual_obj: errors.dual_obj,
        x,
        y,
        lambda,
        slack,
        errors,
        stats,
        log,
    })
}
