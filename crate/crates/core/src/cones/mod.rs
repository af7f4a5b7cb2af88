//! Projections onto the feasible sets of the primal and dual iterates.
//!
//! A primal cone block with scale `d` is `{z : diag(d) z ∈ K}`. A row block
//! with scale `d` is `diag(d) C = {s : diag(d)⁻¹ s ∈ C}`, the same shape with
//! the reciprocal scale. Dual sets of either are obtained through the Moreau
//! identity `proj_{K*}(v) = v + proj_K(−v)`.

mod exp;
mod roots;
mod soc;

pub use exp::{in_dual_exp_cone, in_exp_cone, project_dual_exp, project_exp};
pub use roots::RootFinding;
pub use soc::{project_rescaled_soc, project_soc};

use crate::error::{check_len, Result, SolverError};
use crate::model::{rotate_pair, ConeKind, ConeSpec, ConicProblem};

/// Scratch space reused across block projections.
#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    scratch: Vec<f64>,
    scale: Vec<f64>,
    pub root: RootFinding,
}

impl ProjectionWorkspace {
    pub fn new(root: RootFinding) -> Result<Self> {
        if !(root.tol > 0.0) || root.max_iter == 0 {
            return Err(SolverError::InvalidInput(
                "root finding needs a positive tolerance and at least one iteration".into(),
            ));
        }
        Ok(ProjectionWorkspace {
            scratch: Vec::new(),
            scale: Vec::new(),
            root,
        })
    }

    pub fn for_problem(problem: &ConicProblem) -> Self {
        let largest = problem
            .primal_cones()
            .iter()
            .chain(problem.dual_cones())
            .map(|c| c.dim)
            .max()
            .unwrap_or(0);
        ProjectionWorkspace {
            scratch: Vec::with_capacity(largest),
            scale: Vec::with_capacity(largest),
            root: RootFinding::default(),
        }
    }
}

impl Default for ProjectionWorkspace {
    fn default() -> Self {
        ProjectionWorkspace {
            scratch: Vec::new(),
            scale: Vec::new(),
            root: RootFinding::default(),
        }
    }
}

/// Componentwise clamp of `v` to `[l, u]`.
pub fn project_box(v: &[f64], l: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_len("box lower bound", v.len(), l.len())?;
    check_len("box upper bound", v.len(), u.len())?;
    if let Some(i) = (0..v.len()).find(|&i| !(l[i] <= u[i])) {
        return Err(SolverError::InvalidInput(format!(
            "empty box at coordinate {i}: [{}, {}]",
            l[i], u[i]
        )));
    }
    let mut out = v.to_vec();
    clamp_box(&mut out, l, u);
    Ok(out)
}

pub(crate) fn clamp_box(v: &mut [f64], l: &[f64], u: &[f64]) {
    for ((x, &lo), &hi) in v.iter_mut().zip(l).zip(u) {
        *x = x.max(lo).min(hi);
    }
}

/// Projects one block onto `{z : diag(d) z ∈ K}`, or onto `{z : diag(d)⁻¹ z ∈ K}`
/// when `reciprocal` is set.
fn project_block(
    v: &mut [f64],
    cone: &ConeSpec,
    reciprocal: bool,
    ws: &mut ProjectionWorkspace,
) -> Result<()> {
    match cone.kind {
        ConeKind::Zero => v.iter_mut().for_each(|x| *x = 0.0),
        ConeKind::NonNeg => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        ConeKind::SecondOrder => {
            if cone.has_uniform_scale() {
                project_soc(v);
            } else if reciprocal {
                ws.scale.clear();
                ws.scale.extend(cone.scale.iter().map(|d| 1.0 / d));
                project_rescaled_soc(v, &ws.scale, &ws.root)?;
            } else {
                project_rescaled_soc(v, &cone.scale, &ws.root)?;
            }
        }
        ConeKind::RotatedSecondOrder => {
            // 2pq ≥ ‖r‖² is the ordinary cone after rotating (p, q)
            rotate_pair(v, 0);
            project_soc(v);
            rotate_pair(v, 0);
        }
        ConeKind::Exponential => project_exp(v, &ws.root)?,
        ConeKind::DualExponential => project_dual_exp(v, &ws.root)?,
    }
    Ok(())
}

/// Projects one block onto the dual of the set handled by [`project_block`].
fn project_block_dual(
    v: &mut [f64],
    cone: &ConeSpec,
    reciprocal: bool,
    ws: &mut ProjectionWorkspace,
) -> Result<()> {
    match cone.kind {
        ConeKind::Zero => Ok(()),
        ConeKind::NonNeg => {
            v.iter_mut().for_each(|x| *x = x.max(0.0));
            Ok(())
        }
        ConeKind::SecondOrder | ConeKind::RotatedSecondOrder if cone.has_uniform_scale() => {
            project_block(v, cone, reciprocal, ws)
        }
        ConeKind::Exponential => project_dual_exp(v, &ws.root),
        ConeKind::DualExponential => project_exp(v, &ws.root),
        _ => {
            let mut original = std::mem::take(&mut ws.scratch);
            original.clear();
            original.extend_from_slice(v);
            v.iter_mut().for_each(|x| *x = -*x);
            let result = project_block(v, cone, reciprocal, ws);
            for (x, o) in v.iter_mut().zip(&original) {
                *x += o;
            }
            ws.scratch = original;
            result
        }
    }
}

fn for_each_block<F>(v: &mut [f64], start: usize, cones: &[ConeSpec], mut f: F) -> Result<()>
where
    F: FnMut(&mut [f64], &ConeSpec) -> Result<()>,
{
    let mut at = start;
    for cone in cones {
        f(&mut v[at..at + cone.dim], cone)?;
        at += cone.dim;
    }
    Ok(())
}

/// Projects `x` onto `[l, u] × K_p` in place.
pub fn project_primal_set(x: &mut [f64], problem: &ConicProblem, ws: &mut ProjectionWorkspace) -> Result<()> {
    check_len("primal vector", problem.num_vars(), x.len())?;
    let n1 = problem.num_box_vars();
    clamp_box(&mut x[..n1], problem.lower(), problem.upper());
    for_each_block(x, n1, problem.primal_cones(), |b, cone| project_block(b, cone, false, ws))
}

/// Projects the conic part `x[n1..]` onto `K_p`, leaving the box part alone.
pub(crate) fn project_primal_cone_part(x: &mut [f64], problem: &ConicProblem, ws: &mut ProjectionWorkspace) -> Result<()> {
    check_len("primal vector", problem.num_vars(), x.len())?;
    for_each_block(x, problem.num_box_vars(), problem.primal_cones(), |b, cone| project_block(b, cone, false, ws))
}

/// Projects `y` onto the dual of the row cone in place.
///
/// Equality rows leave `y` free; every other block is projected onto its
/// (rescaled) dual cone.
pub fn project_dual_set(y: &mut [f64], problem: &ConicProblem, ws: &mut ProjectionWorkspace) -> Result<()> {
    check_len("dual vector", problem.num_rows(), y.len())?;
    for_each_block(y, 0, problem.dual_cones(), |b, cone| project_block_dual(b, cone, true, ws))
}

/// Projects a row residual `Gx − h` onto the row cone in place.
pub fn project_row_cone(s: &mut [f64], problem: &ConicProblem, ws: &mut ProjectionWorkspace) -> Result<()> {
    check_len("row residual", problem.num_rows(), s.len())?;
    for_each_block(s, 0, problem.dual_cones(), |b, cone| project_block(b, cone, true, ws))
}

/// Projects the conic part of a reduced-cost vector, `λ[n1..]`, onto `K_p*`
/// in place.
pub fn project_primal_dual_cone(
    lambda2: &mut [f64],
    problem: &ConicProblem,
    ws: &mut ProjectionWorkspace,
) -> Result<()> {
    check_len("conic reduced costs", problem.num_vars() - problem.num_box_vars(), lambda2.len())?;
    for_each_block(lambda2, 0, problem.primal_cones(), |b, cone| project_block_dual(b, cone, false, ws))
}

/// Projects the box part of a reduced-cost vector, `λ[..n1]`, onto `Λ` in place.
pub fn project_lambda_box(lambda1: &mut [f64], problem: &ConicProblem) -> Result<()> {
    check_len("box reduced costs", problem.num_box_vars(), lambda1.len())?;
    for ((v, &l), &u) in lambda1.iter_mut().zip(problem.lower()).zip(problem.upper()) {
        *v = crate::model::LambdaTag::from_bounds(l, u).project(*v);
    }
    Ok(())
}
