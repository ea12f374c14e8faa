use crate::error::{Error, Result};

/// Compares an analytic gradient against central differences of `f`.
///
/// For every coordinate `i` the checker evaluates
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` and reports the worst
/// `|analytic_i - central_i| / max(1, |central_i|)`. Runs in `f64`
/// because single-precision differences drown in rounding noise at
/// useful step sizes; callers checking an `f32` pipeline lift their
/// parameters through the closure.
pub fn check_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    h: f64,
) -> Result<f64> {
    if analytic.len() != x.len() {
        return Err(Error::config(format!(
            "analytic gradient has {} entries for {} parameters",
            analytic.len(),
            x.len()
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::config(format!("step size {h} must be positive")));
    }

    let mut point = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let saved = point[i];
        point[i] = saved + h;
        let plus = f(&point);
        point[i] = saved - h;
        let minus = f(&point);
        point[i] = saved;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::numeric(format!(
                "objective returned a non-finite value near parameter {i}"
            )));
        }
        let central = (plus - minus) / (2.0 * h);
        let err = (analytic[i] - central).abs() / central.abs().max(1.0);
        if err > worst {
            worst = err;
        }
    }
    Ok(worst)
}
