//! `L²(X^t)` norms of differences between field snapshots.

use crate::assembly::FieldGrid;
use crate::error::{CgoError, Result};
use crate::system::Domain;

/// Trapezoidal `‖u − v‖_{L²(X^t)}` with `X^t = [x̄ − ρ + ct, x̄ + ρ − ct]`; the partial end
/// cells use linear interpolation of `|u − v|²`.
pub fn l2_on_cross_section(u: &FieldGrid, v: &FieldGrid, domain: &Domain) -> Result<f64> {
    if u.axes.len() != 1 || u.axes != v.axes || u.values.len() != v.values.len() {
        return Err(CgoError::GridMismatch {
            detail: "fields must share one one-dimensional axis".into(),
        });
    }
    if (u.t - v.t).abs() > 1e-12 {
        return Err(CgoError::GridMismatch {
            detail: format!("snapshot times differ: {} vs {}", u.t, v.t),
        });
    }
    let axis = u.axes[0];
    let rad = domain.radius_at(u.t);
    let (lo, hi) = (domain.center[0] - rad, domain.center[0] + rad);
    if lo < axis.min || hi > axis.node(axis.n - 1) {
        return Err(CgoError::GridMismatch {
            detail: format!("grid does not cover X^t = [{lo}, {hi}]"),
        });
    }
    let f = |i: usize| (&u.values[i] - &v.values[i]).norm_squared();
    let mut sum = 0.0;
    for i in 0..axis.n - 1 {
        let (x0, x1) = (axis.node(i), axis.node(i + 1));
        let a = x0.max(lo);
        let b = x1.min(hi);
        if b <= a {
            continue;
        }
        let (f0, f1) = (f(i), f(i + 1));
        let at = |x: f64| f0 + (f1 - f0) * (x - x0) / (x1 - x0);
        sum += 0.5 * (b - a) * (at(a) + at(b));
    }
    Ok(sum.sqrt())
}

/// `(t, ‖u(t) − v(t)‖_{L²(X^t)})` for matching snapshot lists.
pub fn l2_error_curve(u: &[FieldGrid], v: &[FieldGrid], domain: &Domain) -> Result<Vec<(f64, f64)>> {
    if u.len() != v.len() {
        return Err(CgoError::GridMismatch {
            detail: format!("{} snapshots vs {}", u.len(), v.len()),
        });
    }
    u.iter()
        .zip(v)
        .map(|(a, b)| Ok((a.t, l2_on_cross_section(a, b, domain)?)))
        .collect()
}
