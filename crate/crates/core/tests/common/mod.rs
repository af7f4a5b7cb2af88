//! Instance generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use conic_pdhg::linalg::SparseMatrix;
use conic_pdhg::{ConeSpec, ConicProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense LP `min cᵀx` with equality rows, then `≥` rows, and `0 ≤ x ≤ u`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub equalities: usize,
    pub upper: Vec<f64>,
}

impl DenseLp {
    pub fn to_problem(&self) -> ConicProblem {
        let n = self.c.len();
        let m = self.a.len();
        let mut cones = Vec::new();
        if self.equalities > 0 {
            cones.push(ConeSpec::zero(self.equalities));
        }
        if m > self.equalities {
            cones.push(ConeSpec::nonneg(m - self.equalities));
        }
        ConicProblem::new(
            self.c.clone(),
            SparseMatrix::from_dense(&self.a).unwrap(),
            self.b.clone(),
            vec![0.0; n],
            self.upper.clone(),
            vec![],
            cones,
        )
        .unwrap()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Random feasible, bounded LP with at most 8 variables and 8 rows.
pub fn random_lp(rng: &mut ChaCha8Rng) -> DenseLp {
    let n = rng.gen_range(2..=8);
    let mut m = rng.gen_range(1..=8);
    while m > 1 && binomial(m + 2 * n, n) > 2.0e5 {
        m -= 1;
    }
    let equalities = rng.gen_range(0..=m.min(n - 1).min(2));
    let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
    let x0: Vec<f64> = upper.iter().map(|u| rng.gen_range(0.1..0.9) * u).collect();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| if rng.gen_bool(0.8) { rng.gen_range(-5.0..5.0) } else { 0.0 })
                .collect()
        })
        .collect();
    let b = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let ax: f64 = row.iter().zip(&x0).map(|(p, q)| p * q).sum();
            if i < equalities {
                ax
            } else {
                ax - rng.gen_range(0.0..2.0)
            }
        })
        .collect();
    let c = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    DenseLp {
        c,
        a,
        b,
        equalities,
        upper,
    }
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn next_combination(idx: &mut [usize], total: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < total - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Optimal value by enumerating every basic solution.
pub fn vertex_enumeration(lp: &DenseLp) -> f64 {
    let n = lp.c.len();
    let m = lp.a.len();
    // inequality pool as (row, rhs) with row·x ≥ rhs
    let mut pool: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in lp.equalities..m {
        pool.push((lp.a[i].clone(), lp.b[i]));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        pool.push((e.clone(), 0.0));
        e[j] = -1.0;
        pool.push((e, -lp.upper[j]));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-7;
        (0..m).all(|i| {
            let ax: f64 = lp.a[i].iter().zip(x).map(|(p, q)| p * q).sum();
            if i < lp.equalities {
                (ax - lp.b[i]).abs() <= tol * (1.0 + lp.b[i].abs())
            } else {
                ax >= lp.b[i] - tol * (1.0 + lp.b[i].abs())
            }
        }) && x.iter().zip(&lp.upper).all(|(v, u)| *v >= -tol && *v <= u + tol)
    };
    let k = n - lp.equalities;
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut rows: Vec<Vec<f64>> = lp.a[..lp.equalities].to_vec();
        let mut rhs: Vec<f64> = lp.b[..lp.equalities].to_vec();
        for &i in &idx {
            rows.push(pool[i].0.clone());
            rhs.push(pool[i].1);
        }
        if let Some(x) = solve_square(rows, rhs) {
            if feasible(&x) {
                best = best.min(lp.c.iter().zip(&x).map(|(p, q)| p * q).sum());
            }
        }
        if k == 0 || !next_combination(&mut idx, pool.len()) {
            break;
        }
    }
    best
}

/// `min x₁` subject to `‖(x₁, x₂)‖ ≤ 1`; optimum −1.
pub fn unit_ball_socp() -> ConicProblem {
    ConicProblem::new(
        vec![1.0, 0.0],
        SparseMatrix::from_dense(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        vec![-1.0, 0.0, 0.0],
        vec![f64::NEG_INFINITY; 2],
        vec![f64::INFINITY; 2],
        vec![],
        vec![ConeSpec::soc(3).unwrap()],
    )
    .unwrap()
}

/// `min t` subject to `(1, 1, t) ∈ K_exp`; optimum e.
pub fn exp_instance() -> ConicProblem {
    ConicProblem::new(
        vec![1.0],
        SparseMatrix::from_dense(&[vec![0.0], vec![0.0], vec![1.0]]).unwrap(),
        vec![-1.0, -1.0, 0.0],
        vec![f64::NEG_INFINITY],
        vec![f64::INFINITY],
        vec![],
        vec![ConeSpec::exp()],
    )
    .unwrap()
}

/// SOCP with a known optimal value, built from a complementary pair.
///
/// Rows are nonnegative rows followed by one second-order block. A slack
/// `s*` on the cone boundary and a multiplier `y*` on the opposite ray give
/// `⟨s*, y*⟩ = 0`; with `h = Gx* − s*` and `c = Gᵀy*` the point `x*` is
/// optimal with value `hᵀy*`.
pub fn random_socp(rng: &mut ChaCha8Rng) -> (ConicProblem, f64) {
    let n = rng.gen_range(2..=5);
    let d = rng.gen_range(3..=5);
    let k = rng.gen_range(0..=3);
    let m = d + k;
    let g: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let x_star: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let alpha = rng.gen_range(0.5..2.0);
    let mut s = vec![norm];
    s.extend(&v);
    let mut y = vec![alpha * norm];
    y.extend(v.iter().map(|a| -alpha * a));
    for _ in 0..k {
        if rng.gen_bool(0.5) {
            s.push(0.0);
            y.push(rng.gen_range(0.5..2.0));
        } else {
            s.push(rng.gen_range(0.5..2.0));
            y.push(0.0);
        }
    }
    let h: Vec<f64> = (0..m)
        .map(|i| g[i].iter().zip(&x_star).map(|(a, b)| a * b).sum::<f64>() - s[i])
        .collect();
    let c: Vec<f64> = (0..n).map(|j| (0..m).map(|i| g[i][j] * y[i]).sum()).collect();
    let value = h.iter().zip(&y).map(|(a, b)| a * b).sum();
    // canonical row order: nonnegative rows first
    let order: Vec<usize> = (d..m).chain(0..d).collect();
    let g: Vec<Vec<f64>> = order.iter().map(|&i| g[i].clone()).collect();
    let h: Vec<f64> = order.iter().map(|&i| h[i]).collect();
    let mut cones = Vec::new();
    if k > 0 {
        cones.push(ConeSpec::nonneg(k));
    }
    cones.push(ConeSpec::soc(d).unwrap());
    let p = ConicProblem::new(
        c,
        SparseMatrix::from_dense(&g).unwrap(),
        h,
        vec![f64::NEG_INFINITY; n],
        vec![f64::INFINITY; n],
        vec![],
        cones,
    )
    .unwrap();
    (p, value)
}

/// `min 0` subject to `x − 1 ≥ 0`, `x ≤ 0`.
pub fn primal_infeasible() -> ConicProblem {
    ConicProblem::new(
        vec![0.0],
        SparseMatrix::identity(1),
        vec![1.0],
        vec![f64::NEG_INFINITY],
        vec![0.0],
        vec![],
        vec![ConeSpec::nonneg(1)],
    )
    .unwrap()
}

/// `min −x` subject to `x − 1 ≥ 0`, `x ≥ 0`.
pub fn dual_infeasible() -> ConicProblem {
    ConicProblem::new(
        vec![-1.0],
        SparseMatrix::identity(1),
        vec![1.0],
        vec![0.0],
        vec![f64::INFINITY],
        vec![],
        vec![ConeSpec::nonneg(1)],
    )
    .unwrap()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
