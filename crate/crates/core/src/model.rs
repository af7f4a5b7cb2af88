//! Conic program instances and the dual-side quantities derived from them.
//!
//! An instance is
//!
//! ```text
//! min ⟨c, x⟩  s.t.  G x − h ∈ C,  l ≤ x[..n1] ≤ u,  x[n1..] ∈ K_p
//! ```
//!
//! where `C` is the product of the row blocks in `dual_cones` and `K_p` the
//! product of `primal_cones`. The multiplier `y` of the row constraints lives
//! in the dual cone `C*`, and the reduced costs are `λ = c − Gᵀy`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Range;

use crate::error::{check_len, Result, SolverError};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeKind {
    Zero,
    NonNeg,
    SecondOrder,
    RotatedSecondOrder,
    Exponential,
    DualExponential,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::NonNeg => "nonneg",
            ConeKind::SecondOrder => "soc",
            ConeKind::RotatedSecondOrder => "rsoc",
            ConeKind::Exponential => "exp",
            ConeKind::DualExponential => "dual_exp",
        }
    }
}

/// One cone block together with its diagonal scaling.
///
/// A primal block with scale `d` is the set `{z : diag(d) z ∈ K}`. A row block
/// with scale `d` is `diag(d) C`, so its multipliers satisfy `diag(d) y ∈ C*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dim: usize,
    pub scale: Vec<f64>,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, dim: usize) -> Result<Self> {
        let spec = ConeSpec {
            kind,
            dim,
            scale: vec![1.0; dim],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(ConeKind::Zero, dim).expect("zero cone of any size")
    }

    pub fn nonneg(dim: usize) -> Self {
        Self::new(ConeKind::NonNeg, dim).expect("nonnegative cone of any size")
    }

    pub fn soc(dim: usize) -> Result<Self> {
        Self::new(ConeKind::SecondOrder, dim)
    }

    pub fn rsoc(dim: usize) -> Result<Self> {
        Self::new(ConeKind::RotatedSecondOrder, dim)
    }

    pub fn exp() -> Self {
        Self::new(ConeKind::Exponential, 3).expect("exp cone has dimension 3")
    }

    pub fn dual_exp() -> Self {
        Self::new(ConeKind::DualExponential, 3).expect("dual exp cone has dimension 3")
    }

    pub fn with_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        self.scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn has_uniform_scale(&self) -> bool {
        self.scale.windows(2).all(|w| w[0] == w[1])
    }

    pub fn validate(&self) -> Result<()> {
        let ok_dim = match self.kind {
            ConeKind::Zero | ConeKind::NonNeg => true,
            ConeKind::SecondOrder => self.dim >= 2,
            ConeKind::RotatedSecondOrder => self.dim >= 3,
            ConeKind::Exponential | ConeKind::DualExponential => self.dim == 3,
        };
        if !ok_dim {
            return Err(SolverError::InvalidInput(format!(
                "{} cone cannot have dimension {}",
                self.kind.name(),
                self.dim
            )));
        }
        check_len("cone scale", self.dim, self.scale.len())?;
        if self.scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(SolverError::InvalidInput(format!(
                "{} cone scale entries must be positive and finite",
                self.kind.name()
            )));
        }
        let needs_uniform = matches!(
            self.kind,
            ConeKind::Exponential | ConeKind::DualExponential | ConeKind::RotatedSecondOrder
        );
        if needs_uniform && !self.has_uniform_scale() {
            return Err(SolverError::InvalidInput(format!(
                "{} cone requires a uniform scale within the block",
                self.kind.name()
            )));
        }
        Ok(())
    }
}

/// Offsets of consecutive blocks starting at `start`.
pub(crate) fn block_ranges(start: usize, cones: &[ConeSpec]) -> Vec<Range<usize>> {
    let mut at = start;
    cones
        .iter()
        .map(|c| {
            let r = at..at + c.dim;
            at += c.dim;
            r
        })
        .collect()
}

/// Per-coordinate set that a reduced cost of a box variable must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaTag {
    /// both bounds infinite
    Zero,
    /// only the upper bound finite
    NonPos,
    /// only the lower bound finite
    NonNeg,
    /// both bounds finite
    Free,
}

impl LambdaTag {
    pub fn from_bounds(lower: f64, upper: f64) -> Self {
        match (lower.is_finite(), upper.is_finite()) {
            (false, false) => LambdaTag::Zero,
            (false, true) => LambdaTag::NonPos,
            (true, false) => LambdaTag::NonNeg,
            (true, true) => LambdaTag::Free,
        }
    }

    pub fn project(self, v: f64) -> f64 {
        match self {
            LambdaTag::Zero => 0.0,
            LambdaTag::NonPos => v.min(0.0),
            LambdaTag::NonNeg => v.max(0.0),
            LambdaTag::Free => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    c: Vec<f64>,
    g: SparseMatrix,
    h: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    primal_cones: Vec<ConeSpec>,
    dual_cones: Vec<ConeSpec>,
}

impl ConicProblem {
    /// Validates and builds an instance. The number of box variables is
    /// `lower.len()`; they come first.
    pub fn new(
        c: Vec<f64>,
        g: SparseMatrix,
        h: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        primal_cones: Vec<ConeSpec>,
        dual_cones: Vec<ConeSpec>,
    ) -> Result<Self> {
        let n = c.len();
        let m = h.len();
        check_len("constraint matrix columns", n, g.cols())?;
        check_len("constraint matrix rows", m, g.rows())?;
        check_len("upper bounds", lower.len(), upper.len())?;
        let n1 = lower.len();
        if n1 > n {
            return Err(SolverError::InvalidInput(format!(
                "{n1} box variables but only {n} variables"
            )));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(SolverError::InvalidInput(format!(
                    "invalid bounds [{l}, {u}] for variable {i}"
                )));
            }
            if l > u {
                return Err(SolverError::InvalidInput(format!(
                    "lower bound {l} exceeds upper bound {u} for variable {i}"
                )));
            }
        }
        for cone in primal_cones.iter().chain(&dual_cones) {
            cone.validate()?;
        }
        let primal_dim: usize = primal_cones.iter().map(|c| c.dim).sum();
        check_len("primal cone dimensions", n - n1, primal_dim)?;
        let dual_dim: usize = dual_cones.iter().map(|c| c.dim).sum();
        check_len("row cone dimensions", m, dual_dim)?;

        Ok(ConicProblem {
            c,
            g,
            h,
            lower,
            upper,
            primal_cones,
            dual_cones,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_box_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_rows(&self) -> usize {
        self.h.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn g(&self) -> &SparseMatrix {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn primal_cones(&self) -> &[ConeSpec] {
        &self.primal_cones
    }

    pub fn dual_cones(&self) -> &[ConeSpec] {
        &self.dual_cones
    }

    pub fn lambda_tags(&self) -> Vec<LambdaTag> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| LambdaTag::from_bounds(l, u))
            .collect()
    }

    pub(crate) fn primal_ranges(&self) -> Vec<Range<usize>> {
        block_ranges(self.num_box_vars(), &self.primal_cones)
    }

    pub(crate) fn dual_ranges(&self) -> Vec<Range<usize>> {
        block_ranges(0, &self.dual_cones)
    }

    /// True when the row blocks follow the zero, nonneg, soc, exp, dual-exp
    /// order (rotated blocks, if any, last) with at most one zero and one
    /// nonnegative block.
    pub fn has_canonical_row_layout(&self) -> bool {
        let rank = |k: ConeKind| match k {
            ConeKind::Zero => 0,
            ConeKind::NonNeg => 1,
            ConeKind::SecondOrder => 2,
            ConeKind::Exponential => 3,
            ConeKind::DualExponential => 4,
            ConeKind::RotatedSecondOrder => 5,
        };
        let ranks: Vec<u8> = self.dual_cones.iter().map(|c| rank(c.kind)).collect();
        let sorted = ranks.windows(2).all(|w| w[0] <= w[1]);
        let single = |r: u8| ranks.iter().filter(|&&x| x == r).count() <= 1;
        sorted && single(0) && single(1)
    }

    pub(crate) fn with_parts(
        &self,
        c: Vec<f64>,
        g: SparseMatrix,
        h: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        primal_cones: Vec<ConeSpec>,
        dual_cones: Vec<ConeSpec>,
    ) -> Result<Self> {
        ConicProblem::new(c, g, h, lower, upper, primal_cones, dual_cones)
    }
}

/// Dual multipliers `y` and reduced costs `λ = c − Gᵀy`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRecovery {
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    n1: usize,
}

impl DualRecovery {
    pub(crate) fn from_parts(y: Vec<f64>, lambda: Vec<f64>, n1: usize) -> Self {
        DualRecovery { y, lambda, n1 }
    }

    /// Reduced costs of the box variables.
    pub fn lambda1(&self) -> &[f64] {
        &self.lambda[..self.n1]
    }

    /// Reduced costs of the cone variables.
    pub fn lambda2(&self) -> &[f64] {
        &self.lambda[self.n1..]
    }
}

pub fn recover_dual(problem: &ConicProblem, y: &[f64]) -> Result<DualRecovery> {
    check_len("dual vector", problem.num_rows(), y.len())?;
    let gty = problem.g().matvec_transpose(y)?;
    let lambda = problem.c().iter().zip(&gty).map(|(c, g)| c - g).collect();
    Ok(DualRecovery::from_parts(y.to_vec(), lambda, problem.num_box_vars()))
}

/// `⟨y, h⟩ + Σ lᵢ (λ₁)ᵢ⁺ − Σ uᵢ (λ₁)ᵢ⁻`.
///
/// Terms pairing an infinite bound with a multiplier contribute nothing; a
/// nonzero multiplier against an infinite bound shows up as dual infeasibility
/// instead.
pub fn dual_objective(problem: &ConicProblem, rec: &DualRecovery) -> Result<f64> {
    check_len("dual vector", problem.num_rows(), rec.y.len())?;
    check_len("reduced costs", problem.num_vars(), rec.lambda.len())?;
    Ok(dual_objective_parts(
        problem.h(),
        problem.lower(),
        problem.upper(),
        &rec.y,
        rec.lambda1(),
    ))
}

pub(crate) fn dual_objective_parts(
    h: &[f64],
    lower: &[f64],
    upper: &[f64],
    y: &[f64],
    lambda1: &[f64],
) -> f64 {
    let mut value: f64 = y.iter().zip(h).map(|(a, b)| a * b).sum();
    for ((&l, &u), &lam) in lower.iter().zip(upper).zip(lambda1) {
        if lam > 0.0 && l.is_finite() {
            value += l * lam;
        } else if lam < 0.0 && u.is_finite() {
            value += u * lam;
        }
    }
    value
}

/// Coordinates of the rotated second-order blocks of an instance.
///
/// The map `(p, q) ↦ ((p + q)/√2, (p − q)/√2)` is symmetric and orthogonal, so
/// it is its own inverse; it turns `2pq ≥ ‖x‖², p, q ≥ 0` into `t ≥ ‖(s, x)‖`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RsocTransform {
    /// First index of each rotated row block.
    row_starts: Vec<usize>,
    /// First index of each rotated primal block.
    col_starts: Vec<usize>,
}

pub(crate) fn rotate_pair(v: &mut [f64], start: usize) {
    let (p, q) = (v[start], v[start + 1]);
    v[start] = (p + q) * FRAC_1_SQRT_2;
    v[start + 1] = (p - q) * FRAC_1_SQRT_2;
}

impl RsocTransform {
    pub fn of(problem: &ConicProblem) -> Self {
        let row_starts = problem
            .dual_cones()
            .iter()
            .zip(problem.dual_ranges())
            .filter(|(c, _)| c.kind == ConeKind::RotatedSecondOrder)
            .map(|(_, r)| r.start)
            .collect();
        let col_starts = problem
            .primal_cones()
            .iter()
            .zip(problem.primal_ranges())
            .filter(|(c, _)| c.kind == ConeKind::RotatedSecondOrder)
            .map(|(_, r)| r.start)
            .collect();
        RsocTransform {
            row_starts,
            col_starts,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.row_starts.is_empty() && self.col_starts.is_empty()
    }

    /// Maps a row-space vector (multipliers, slacks) between the two forms.
    pub fn map_rows(&self, v: &mut [f64]) {
        for &s in &self.row_starts {
            rotate_pair(v, s);
        }
    }

    /// Maps a column-space vector (primal values, reduced costs) between the two forms.
    pub fn map_cols(&self, v: &mut [f64]) {
        for &s in &self.col_starts {
            rotate_pair(v, s);
        }
    }
}

/// Rewrites rotated second-order blocks as standard second-order blocks.
/// Instances without rotated blocks are returned unchanged.
pub fn rsoc_to_soc(problem: &ConicProblem) -> Result<ConicProblem> {
    let transform = RsocTransform::of(problem);
    if transform.is_identity() {
        return Ok(problem.clone());
    }
    for cone in problem.primal_cones().iter().chain(problem.dual_cones()) {
        cone.validate()?;
    }

    let mut h = problem.h().to_vec();
    transform.map_rows(&mut h);
    let mut c = problem.c().to_vec();
    transform.map_cols(&mut c);

    let g = problem.g();
    let mut row_map = vec![None; g.rows()];
    for &s in &transform.row_starts {
        row_map[s] = Some((s, s + 1, true));
        row_map[s + 1] = Some((s, s + 1, false));
    }
    let mut col_map = vec![None; g.cols()];
    for &s in &transform.col_starts {
        col_map[s] = Some((s, s + 1, true));
        col_map[s + 1] = Some((s, s + 1, false));
    }
    // Entry (i, j) of G feeds into every transformed row/column that mixes i or j.
    let mut trip = Vec::with_capacity(g.nnz() * 2);
    for (i, j, v) in g.triplets() {
        let rows: Vec<(usize, f64)> = match row_map[i] {
            None => vec![(i, 1.0)],
            Some((p, q, from_p)) => vec![
                (p, FRAC_1_SQRT_2),
                (q, if from_p { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 }),
            ],
        };
        let cols: Vec<(usize, f64)> = match col_map[j] {
            None => vec![(j, 1.0)],
            Some((p, q, from_p)) => vec![
                (p, FRAC_1_SQRT_2),
                (q, if from_p { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 }),
            ],
        };
        for &(ri, rw) in &rows {
            for &(cj, cw) in &cols {
                trip.push((ri, cj, v * rw * cw));
            }
        }
    }
    let g = SparseMatrix::from_triplets(g.rows(), g.cols(), trip)?;

    let convert = |cones: &[ConeSpec]| -> Vec<ConeSpec> {
        cones
            .iter()
            .map(|c| {
                if c.kind == ConeKind::RotatedSecondOrder {
                    ConeSpec {
                        kind: ConeKind::SecondOrder,
                        dim: c.dim,
                        scale: c.scale.clone(),
                    }
                } else {
                    c.clone()
                }
            })
            .collect()
    };

    problem.with_parts(
        c,
        g,
        h,
        problem.lower().to_vec(),
        problem.upper().to_vec(),
        convert(problem.primal_cones()),
        convert(problem.dual_cones()),
    )
}
