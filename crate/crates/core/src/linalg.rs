//! Sparse matrix storage and the small set of vector kernels used by the solver.
//!
//! The matrix keeps a compressed-row and a compressed-column copy so that both
//! `G x` and `Gᵀ y` are computed row by row. Every output entry is a sequential
//! sum in a fixed order, so results do not depend on the number of workers.

use rayon::prelude::*;

use crate::error::{check_len, Result, SolverError};

/// Products with at least this many stored entries are split across workers.
const PARALLEL_NNZ: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
struct Compressed {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Compressed {
    fn from_sorted(major: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut ptr = vec![0usize; major + 1];
        for &(i, _, _) in entries {
            ptr[i + 1] += 1;
        }
        for i in 0..major {
            ptr[i + 1] += ptr[i];
        }
        Compressed {
            ptr,
            idx: entries.iter().map(|e| e.1).collect(),
            val: entries.iter().map(|e| e.2).collect(),
        }
    }

    fn product(&self, x: &[f64], out: &mut [f64]) {
        let kernel = |(i, o): (usize, &mut f64)| {
            let mut acc = 0.0;
            for p in self.ptr[i]..self.ptr[i + 1] {
                acc += self.val[p] * x[self.idx[p]];
            }
            *o = acc;
        };
        if self.val.len() >= PARALLEL_NNZ {
            out.par_iter_mut().enumerate().for_each(kernel);
        } else {
            out.iter_mut().enumerate().for_each(kernel);
        }
    }

    fn lane(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.ptr[i]..self.ptr[i + 1]).map(move |p| (self.idx[p], self.val[p]))
    }
}

/// Real sparse matrix with row- and column-compressed views of the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    csr: Compressed,
    csc: Compressed,
}

impl SparseMatrix {
    /// Builds a matrix from coordinate triplets. Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(SolverError::InvalidInput(format!(
                    "matrix entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            entries.push((i, j, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        entries.dedup_by(|next, kept| {
            if next.0 == kept.0 && next.1 == kept.1 {
                kept.2 += next.2;
                true
            } else {
                false
            }
        });

        let csr = Compressed::from_sorted(rows, &entries);
        let mut transposed: Vec<(usize, usize, f64)> =
            entries.iter().map(|&(i, j, v)| (j, i, v)).collect();
        transposed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let csc = Compressed::from_sorted(cols, &transposed);

        Ok(SparseMatrix {
            rows,
            cols,
            csr,
            csc,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, std::iter::empty()).expect("empty matrix is valid")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).expect("identity is valid")
    }

    /// Builds a matrix from dense rows, storing only nonzero entries.
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in dense.iter().enumerate() {
            check_len("dense matrix row", cols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows, cols, trip)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.csr.val.len()
    }

    /// Stored entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|i| self.csr.lane(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    /// Stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.csr.lane(i)
    }

    /// Stored entries of column `j` as `(row, value)`.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.csc.lane(j)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (i, j, v) in self.triplets() {
            out[i][j] += v;
        }
        out
    }

    /// `out = A x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec input", self.cols, x.len())?;
        check_len("matvec output", self.rows, out.len())?;
        self.csr.product(x, out);
        Ok(())
    }

    /// `out = Aᵀ y`
    pub fn matvec_transpose_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("transpose matvec input", self.rows, y.len())?;
        check_len("transpose matvec output", self.cols, out.len())?;
        self.csc.product(y, out);
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out)?;
        Ok(out)
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.matvec_transpose_into(y, &mut out)?;
        Ok(out)
    }

    /// Largest absolute stored entry. Fails for a matrix without nonzero entries.
    pub fn max_abs(&self) -> Result<f64> {
        let m = self.csr.val.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            Ok(m)
        } else {
            Err(SolverError::InvalidInput(
                "constraint matrix has no nonzero entries".into(),
            ))
        }
    }

    /// Induced infinity norm: the largest absolute row sum.
    pub fn induced_inf_norm(&self) -> Result<f64> {
        let m = self.row_one_norms().into_iter().fold(0.0f64, f64::max);
        if m > 0.0 {
            Ok(m)
        } else {
            Err(SolverError::InvalidInput(
                "constraint matrix has no nonzero entries".into(),
            ))
        }
    }

    pub fn row_max_abs(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.csr.lane(i).fold(0.0f64, |a, (_, v)| a.max(v.abs())))
            .collect()
    }

    pub fn col_max_abs(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.csc.lane(j).fold(0.0f64, |a, (_, v)| a.max(v.abs())))
            .collect()
    }

    pub fn row_one_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.csr.lane(i).map(|(_, v)| v.abs()).sum())
            .collect()
    }

    pub fn col_one_norms(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.csc.lane(j).map(|(_, v)| v.abs()).sum())
            .collect()
    }

    /// Returns `diag(left) · A · diag(right)`.
    pub fn scaled(&self, left: &[f64], right: &[f64]) -> Result<Self> {
        check_len("left scaling", self.rows, left.len())?;
        check_len("right scaling", self.cols, right.len())?;
        let mut out = self.clone();
        for i in 0..self.rows {
            for p in out.csr.ptr[i]..out.csr.ptr[i + 1] {
                out.csr.val[p] *= left[i] * right[out.csr.idx[p]];
            }
        }
        for j in 0..self.cols {
            for p in out.csc.ptr[j]..out.csc.ptr[j + 1] {
                out.csc.val[p] *= left[out.csc.idx[p]] * right[j];
            }
        }
        Ok(out)
    }

    /// Power-iteration estimate of the spectral norm.
    pub fn spectral_norm_estimate(&self, iterations: usize) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let mut v = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut av = vec![0.0; self.rows];
        let mut atav = vec![0.0; self.cols];
        let mut estimate = 0.0;
        for _ in 0..iterations {
            self.csr.product(&v, &mut av);
            self.csc.product(&av, &mut atav);
            let norm = two_norm(&atav);
            if norm == 0.0 {
                break;
            }
            estimate = norm.sqrt();
            for (vi, wi) in v.iter_mut().zip(&atav) {
                *vi = wi / norm;
            }
        }
        estimate
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

pub fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Step-size context `(ω, η)` defining `τ = η/ω` and `σ = ηω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNormContext {
    pub omega: f64,
    pub eta: f64,
}

impl WeightedNormContext {
    pub fn new(omega: f64, eta: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "primal weight must be positive and finite, got {omega}"
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "step size must be positive and finite, got {eta}"
            )));
        }
        Ok(WeightedNormContext { omega, eta })
    }

    pub fn tau(&self) -> f64 {
        self.eta / self.omega
    }

    pub fn sigma(&self) -> f64 {
        self.eta * self.omega
    }
}

/// `‖(x, y)‖_ω = √(ω‖x‖² + ‖y‖²/ω)`
pub fn omega_norm(x: &[f64], y: &[f64], omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(SolverError::InvalidInput(format!(
            "primal weight must be positive, got {omega}"
        )));
    }
    Ok((omega * squared_norm(x) + squared_norm(y) / omega).sqrt())
}

/// `‖(x, y)‖_N = √(‖x‖²/τ + ‖y‖²/σ)` with `τ = η/ω`, `σ = ηω`.
pub fn n_norm(x: &[f64], y: &[f64], ctx: &WeightedNormContext) -> Result<f64> {
    if !(ctx.omega > 0.0 && ctx.eta > 0.0) {
        return Err(SolverError::InvalidInput(
            "step sizes must be positive".into(),
        ));
    }
    Ok(n_norm_raw(x, y, ctx.tau(), ctx.sigma()))
}

pub(crate) fn n_norm_raw(x: &[f64], y: &[f64], tau: f64, sigma: f64) -> f64 {
    (squared_norm(x) / tau + squared_norm(y) / sigma).sqrt()
}
