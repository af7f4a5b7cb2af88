//! Diagonal preconditioning: `Ĝ = D₁ G D₂` with `x = D₂ x̃` and `y = D₁ ỹ`.

use crate::error::{check_len, Result};
use crate::linalg::SparseMatrix;
use crate::model::{ConeKind, ConeSpec, ConicProblem};

const MIN_SCALE: f64 = 1e-8;
const MAX_SCALE: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingOptions {
    pub ruiz_iterations: usize,
    pub use_pock_chambolle: bool,
    pub allow_nonuniform_dual_soc: bool,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            ruiz_iterations: 10,
            use_pock_chambolle: true,
            allow_nonuniform_dual_soc: false,
        }
    }
}

/// Row scales `d1` (length m) and column scales `d2` (length n).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPair {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl ScalingPair {
    pub fn identity(m: usize, n: usize) -> Self {
        ScalingPair {
            d1: vec![1.0; m],
            d2: vec![1.0; n],
        }
    }
}

/// Current row and column reductions of `diag(d1) G diag(d2)`.
fn reduce(
    g: &SparseMatrix,
    d1: &[f64],
    d2: &[f64],
    combine: impl Fn(f64, f64) -> f64 + Copy,
) -> (Vec<f64>, Vec<f64>) {
    let rows = (0..g.rows())
        .map(|i| g.row(i).fold(0.0, |acc, (j, v)| combine(acc, (v * d1[i] * d2[j]).abs())))
        .collect();
    let cols = (0..g.cols())
        .map(|j| g.col(j).fold(0.0, |acc, (i, v)| combine(acc, (v * d1[i] * d2[j]).abs())))
        .collect();
    (rows, cols)
}

fn divide_by_sqrt(d: &mut [f64], norms: &[f64]) {
    for (s, &n) in d.iter_mut().zip(norms) {
        if n > 0.0 {
            *s /= n.sqrt();
        }
    }
}

/// Replaces the scales of every block selected by `uniform` with their
/// geometric mean.
fn make_blocks_uniform(d: &mut [f64], start: usize, cones: &[ConeSpec], uniform: impl Fn(ConeKind) -> bool) {
    let mut at = start;
    for cone in cones {
        let block = &mut d[at..at + cone.dim];
        at += cone.dim;
        if block.is_empty() || !uniform(cone.kind) {
            continue;
        }
        let mean = (block.iter().map(|s| s.ln()).sum::<f64>() / block.len() as f64).exp();
        block.iter_mut().for_each(|s| *s = mean);
    }
}

/// Ruiz equilibration followed by an optional Pock–Chambolle pass, with block
/// scales made uniform wherever the projection needs it.
pub fn build_scaling(problem: &ConicProblem, options: &ScalingOptions) -> ScalingPair {
    let g = problem.g();
    let mut d1 = vec![1.0; g.rows()];
    let mut d2 = vec![1.0; g.cols()];

    for _ in 0..options.ruiz_iterations {
        let (rows, cols) = reduce(g, &d1, &d2, f64::max);
        divide_by_sqrt(&mut d1, &rows);
        divide_by_sqrt(&mut d2, &cols);
    }
    if options.use_pock_chambolle {
        let (rows, cols) = reduce(g, &d1, &d2, |a, b| a + b);
        divide_by_sqrt(&mut d1, &rows);
        divide_by_sqrt(&mut d2, &cols);
    }

    make_blocks_uniform(&mut d2, problem.num_box_vars(), problem.primal_cones(), |k| {
        matches!(
            k,
            ConeKind::Exponential | ConeKind::DualExponential | ConeKind::RotatedSecondOrder
        )
    });
    let allow_soc = options.allow_nonuniform_dual_soc;
    make_blocks_uniform(&mut d1, 0, problem.dual_cones(), |k| match k {
        ConeKind::Exponential | ConeKind::DualExponential | ConeKind::RotatedSecondOrder => true,
        ConeKind::SecondOrder => !allow_soc,
        ConeKind::Zero | ConeKind::NonNeg => false,
    });

    for s in d1.iter_mut().chain(d2.iter_mut()) {
        *s = s.clamp(MIN_SCALE, MAX_SCALE);
    }
    ScalingPair { d1, d2 }
}

fn compose_scales(cones: &[ConeSpec], start: usize, d: &[f64]) -> Result<Vec<ConeSpec>> {
    let mut at = start;
    cones
        .iter()
        .map(|cone| {
            let scale = cone
                .scale
                .iter()
                .zip(&d[at..at + cone.dim])
                .map(|(a, b)| a * b)
                .collect();
            at += cone.dim;
            cone.clone().with_scale(scale)
        })
        .collect()
}

/// The instance in the scaled variables `x̃ = D₂⁻¹x`, `ỹ = D₁⁻¹y`.
pub fn rescale_problem(problem: &ConicProblem, s: &ScalingPair) -> Result<ConicProblem> {
    check_len("row scaling", problem.num_rows(), s.d1.len())?;
    check_len("column scaling", problem.num_vars(), s.d2.len())?;
    let n1 = problem.num_box_vars();
    let c = problem.c().iter().zip(&s.d2).map(|(a, b)| a * b).collect();
    let h = problem.h().iter().zip(&s.d1).map(|(a, b)| a * b).collect();
    let lower = problem.lower().iter().zip(&s.d2[..n1]).map(|(a, b)| a / b).collect();
    let upper = problem.upper().iter().zip(&s.d2[..n1]).map(|(a, b)| a / b).collect();
    let g = problem.g().scaled(&s.d1, &s.d2)?;
    let primal_cones = compose_scales(problem.primal_cones(), n1, &s.d2)?;
    let dual_cones = compose_scales(problem.dual_cones(), 0, &s.d1)?;
    problem.with_parts(c, g, h, lower, upper, primal_cones, dual_cones)
}

/// Maps scaled iterates back: `x = D₂ x̃`, `y = D₁ ỹ`.
pub fn unscale_solution(x: &[f64], y: &[f64], s: &ScalingPair) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("scaled primal", s.d2.len(), x.len())?;
    check_len("scaled dual", s.d1.len(), y.len())?;
    Ok((
        x.iter().zip(&s.d2).map(|(a, b)| a * b).collect(),
        y.iter().zip(&s.d1).map(|(a, b)| a * b).collect(),
    ))
}
