//! Exponential cone `K_exp = cl{(a, b, c) : b > 0, b·exp(a/b) ≤ c}` and its dual
//! `K_exp* = cl{(u, v, w) : u < 0, −u·exp(v/u − 1) ≤ w}`.
//!
//! Outside the easy cases the projection `p` and the dual part `q = p − v`
//! are parameterized by the ray ratio `ρ = a/b` of `p`:
//!
//! ```text
//! p = r (ρ, 1, e^ρ),   q = s (−e^ρ, e^ρ(ρ − 1), 1),   r, s > 0
//! ```
//!
//! Matching `v = p − q` componentwise gives `r` and `s` in closed form and a
//! single scalar equation in `ρ`.

use super::roots::{safeguarded_newton, RootFinding};
use crate::error::{Result, SolverError};

pub fn in_exp_cone(v: &[f64]) -> bool {
    let (a, b, c) = (v[0], v[1], v[2]);
    if b > 0.0 {
        c > 0.0 && a <= b * (c / b).ln()
    } else {
        b == 0.0 && a <= 0.0 && c >= 0.0
    }
}

pub fn in_dual_exp_cone(v: &[f64]) -> bool {
    let (u, s, w) = (v[0], v[1], v[2]);
    if u < 0.0 {
        w > 0.0 && (-u).ln() + s / u - 1.0 <= w.ln()
    } else {
        u == 0.0 && s >= 0.0 && w >= 0.0
    }
}

/// Projects a 3-vector onto the exponential cone in place.
pub fn project_exp(v: &mut [f64], params: &RootFinding) -> Result<()> {
    debug_assert_eq!(v.len(), 3);
    if in_exp_cone(v) {
        return Ok(());
    }
    let (a, b, c) = (v[0], v[1], v[2]);
    if in_dual_exp_cone(&[-a, -b, -c]) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return Ok(());
    }
    if a <= 0.0 && b <= 0.0 {
        // lands on the face {(a, 0, c) : a ≤ 0, c ≥ 0}
        v[1] = 0.0;
        v[2] = c.max(0.0);
        return Ok(());
    }

    let rho = solve_ray_ratio(a, b, c, params)?;
    let denom = rho * rho - rho + 1.0;
    // p = r(ρ, 1, e^ρ) is exact in K but r cancels as ρ → +∞; v + q with
    // q = s(−e^ρ, e^ρ(ρ − 1), 1) is stable there. Keep the one whose leading
    // factor is better conditioned, scaled by the size of what it builds.
    let r_num = (rho - 1.0) * a + b;
    let s_num = a - rho * b;
    let r = r_num / denom;
    let se = s_num / denom;
    let from_primal = [r * rho, r, r * rho.exp()];
    let from_dual = [a - se, b + se * (rho - 1.0), c + se * (-rho).exp()];
    let cond_r = ((rho - 1.0) * a).abs().max(b.abs()) / r_num.abs() * norm3(&from_primal);
    let q_norm = se.abs() * (1.0 + (rho - 1.0).abs() + (-rho).exp());
    let cond_s = a.abs().max((rho * b).abs()) / s_num.abs() * q_norm;
    let primal_ok = from_primal.iter().all(|x| x.is_finite());
    let dual_ok = from_dual.iter().all(|x| x.is_finite());
    let p = match (primal_ok, dual_ok) {
        (true, true) if cond_s < cond_r || cond_r.is_nan() => from_dual,
        (true, _) => from_primal,
        (false, true) => from_dual,
        (false, false) => {
            return Err(SolverError::Numerical(format!(
                "exponential cone projection failed for ({a}, {b}, {c})"
            )))
        }
    };
    v.copy_from_slice(&p);
    Ok(())
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Projects onto the dual exponential cone through `proj_{K*}(v) = v + proj_K(−v)`.
pub fn project_dual_exp(v: &mut [f64], params: &RootFinding) -> Result<()> {
    let mut neg = [-v[0], -v[1], -v[2]];
    project_exp(&mut neg, params)?;
    for (x, p) in v.iter_mut().zip(neg) {
        *x += p;
    }
    Ok(())
}

/// Residual of the ray-ratio equation and its derivative, both multiplied by
/// `e^{−|ρ|}` so that neither overflows.
fn ray_residual(a: f64, b: f64, c: f64, rho: f64) -> (f64, f64) {
    let ep = (rho - rho.abs()).exp();
    let em = (-rho - rho.abs()).exp();
    let e0 = (-rho.abs()).exp();
    let value = ((rho - 1.0) * a + b) * ep - (a - rho * b) * em - (rho * rho - rho + 1.0) * c * e0;
    let slope = (rho * a + b) * ep + (a + b - rho * b) * em - (2.0 * rho - 1.0) * c * e0;
    (value, slope)
}

fn solve_ray_ratio(a: f64, b: f64, c: f64, params: &RootFinding) -> Result<f64> {
    // r > 0 ⇔ (ρ − 1)a + b > 0 and s > 0 ⇔ a − ρb > 0
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    if b > 0.0 {
        upper = upper.min(a / b);
    } else if b < 0.0 {
        lower = lower.max(a / b);
    }
    if a > 0.0 {
        lower = lower.max(1.0 - b / a);
    } else if a < 0.0 {
        upper = upper.min(1.0 - b / a);
    }
    if !(lower < upper) {
        return Err(SolverError::Numerical(format!(
            "empty ray-ratio interval for ({a}, {b}, {c})"
        )));
    }

    let f = |rho: f64| ray_residual(a, b, c, rho);
    // F → +∞ as ρ → +∞ (the e^ρ term has factor (ρ − 1)a + b > 0) and
    // F → −∞ as ρ → −∞, so only the finite ends can be ambiguous.
    let mut lo = lower;
    let mut hi = upper;
    let mut step = 1.0;
    while !hi.is_finite() {
        let probe = lower + step;
        if f(probe).0 > 0.0 {
            hi = probe;
        }
        step *= 2.0;
        if step > 1e6 {
            return Err(SolverError::Numerical("ray ratio not bracketed above".into()));
        }
    }
    step = 1.0;
    while !lo.is_finite() {
        let probe = upper - step;
        if f(probe).0 < 0.0 {
            lo = probe;
        }
        step *= 2.0;
        if step > 1e6 {
            return Err(SolverError::Numerical("ray ratio not bracketed below".into()));
        }
    }
    let (f_lo, f_hi) = (f(lo).0, f(hi).0);
    if f_lo >= 0.0 || f_hi <= 0.0 {
        // rounding at a finite end where r or s vanishes
        return Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi });
    }
    // drive the bracket to machine precision; the residual is scaled by e^{−|ρ|}
    // and a loose residual test would leave ρ too coarse for r·e^ρ
    safeguarded_newton(f, lo, hi, 0.0, params)
}
