use crate::error::{Result, SolverError};

/// Parameters for the scalar root finders used by the cone projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFinding {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RootFinding {
    fn default() -> Self {
        RootFinding {
            max_iter: 100,
            tol: 1e-12,
        }
    }
}

/// Bisection point; geometric when the bracket spans orders of magnitude on
/// one side of zero, so that wide brackets shrink in a few dozen steps.
fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 4.0 * lo {
        (lo.sqrt() * hi.sqrt()).min(0.5 * (lo + hi))
    } else if hi < 0.0 && lo < 4.0 * hi {
        -((-lo).sqrt() * (-hi).sqrt()).min(-0.5 * (lo + hi))
    } else {
        0.5 * (lo + hi)
    }
}

/// Finds a root of a function that changes sign on `[lo, hi]`.
///
/// `f` returns the value and the derivative at a point; both may be multiplied
/// by the same positive factor, since only the sign of the value and the
/// Newton step `value / derivative` are used. `scale` sets the magnitude
/// against which the residual tolerance is measured.
pub(crate) fn safeguarded_newton<F>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    scale: f64,
    params: &RootFinding,
) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(SolverError::Numerical(format!(
            "root not bracketed on [{lo}, {hi}]"
        )));
    }
    let lo_positive = f_lo > 0.0;
    let mut x = midpoint(lo, hi);
    let mut last_width = hi - lo;
    for iter in 0..params.max_iter {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(SolverError::Numerical(format!("non-finite residual at {x}")));
        }
        if fx.abs() <= params.tol * scale {
            return Ok(x);
        }
        if (fx > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
        let newton = x - fx / dfx;
        if (newton - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1.0) && newton >= lo && newton <= hi {
            return Ok(newton);
        }
        // alternate to bisection whenever Newton leaves the bracket or stalls
        let stalled = iter > 0 && width > 0.5 * last_width;
        x = if newton.is_finite() && newton > lo && newton < hi && !stalled {
            newton
        } else {
            midpoint(lo, hi)
        };
        last_width = width;
    }
    Err(SolverError::Numerical(format!(
        "root finder did not converge in {} iterations",
        params.max_iter
    )))
}
