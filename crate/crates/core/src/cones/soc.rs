use super::roots::{safeguarded_newton, RootFinding};
use crate::error::Result;
use crate::linalg::two_norm;

/// Projects `v = (t, x̄)` onto `{(t, x̄) : ‖x̄‖ ≤ t}` in place.
pub fn project_soc(v: &mut [f64]) {
    let Some((t, rest)) = v.split_first_mut() else {
        return;
    };
    let norm = two_norm(rest);
    if norm <= *t {
        return;
    }
    if norm <= -*t {
        *t = 0.0;
        rest.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let half = 0.5 * (*t + norm);
    let alpha = half / norm;
    rest.iter_mut().for_each(|x| *x *= alpha);
    *t = half;
}

/// Projects `v` onto `{z : diag(d) z ∈ K_soc}` in place.
///
/// The stationarity condition `z − v + μ D Q D z = 0` with `Q = diag(−1, I)`
/// gives every tail component in closed form once `μ` is known, and the
/// boundary condition `d₀ z₀ = ‖D̄ z̄‖` leaves a monotone scalar equation in
/// `μ`. A block with a uniform scale is the plain cone.
pub fn project_rescaled_soc(v: &mut [f64], d: &[f64], params: &RootFinding) -> Result<()> {
    debug_assert_eq!(v.len(), d.len());
    if v.len() < 2 || d.windows(2).all(|w| w[0] == w[1]) {
        project_soc(v);
        return Ok(());
    }
    let (v0, d0) = (v[0], d[0]);
    let scaled_tail = d[1..]
        .iter()
        .zip(&v[1..])
        .map(|(di, vi)| (di * vi).powi(2))
        .sum::<f64>()
        .sqrt();
    if scaled_tail <= d0 * v0 {
        return Ok(());
    }
    let unscaled_tail = d[1..]
        .iter()
        .zip(&v[1..])
        .map(|(di, vi)| (vi / di).powi(2))
        .sum::<f64>()
        .sqrt();
    if unscaled_tail <= -v0 / d0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return Ok(());
    }

    // e_i = (d_i/d₀)², w_i = e_i v_i²
    let ratios: Vec<f64> = d[1..].iter().map(|di| (di / d0).powi(2)).collect();
    let weights: Vec<f64> = ratios.iter().zip(&v[1..]).map(|(e, vi)| e * vi * vi).collect();
    let target = v0 * v0;

    if v0 > 0.0 {
        // μ = s/d₀², s ∈ [0, 1]; z_i = v_i / (1 + s e_i)
        let residual = |s: f64| {
            let mut value = -target;
            let mut slope = 0.0;
            for (w, e) in weights.iter().zip(&ratios) {
                let denom = 1.0 + s * e;
                let r = (1.0 - s) / denom;
                value += w * r * r;
                slope -= 2.0 * (1.0 - s) * w * (1.0 + e) / denom.powi(3);
            }
            (value, slope)
        };
        // rounding can leave a point just outside the cone with residual(0) ≤ 0
        let s = if residual(0.0).0 <= 0.0 { 0.0 } else { safeguarded_newton(residual, 0.0, 1.0, 0.0, params)? };
        for (x, e) in v[1..].iter_mut().zip(&ratios) {
            *x /= 1.0 + s * e;
        }
    } else if v0 < 0.0 {
        // μ = 1/(u d₀²), u ∈ (0, 1]; z_i = u v_i / (u + e_i)
        let residual = |u: f64| {
            let mut value = -target;
            let mut slope = 0.0;
            for (w, e) in weights.iter().zip(&ratios) {
                let denom = u + e;
                let r = (1.0 - u) / denom;
                value += w * r * r;
                slope -= 2.0 * r * w * (1.0 + e) / (denom * denom);
            }
            (value, slope)
        };
        let u = if residual(0.0).0 <= 0.0 { 0.0 } else { safeguarded_newton(residual, 0.0, 1.0, 0.0, params)? };
        for (x, e) in v[1..].iter_mut().zip(&ratios) {
            *x *= u / (u + e);
        }
    } else {
        // μ = 1/d₀² exactly
        for (x, e) in v[1..].iter_mut().zip(&ratios) {
            *x /= 1.0 + e;
        }
    }
    let tail = d[1..]
        .iter()
        .zip(&v[1..])
        .map(|(di, zi)| (di * zi).powi(2))
        .sum::<f64>()
        .sqrt();
    v[0] = tail / d0;
    Ok(())
}
