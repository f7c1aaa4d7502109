use nalgebra::{DMatrix, DVector};

/// Relative pivot floor below which a positive semi-definite system is
/// treated as rank deficient.
const PIVOT_FLOOR: f64 = 1e-12;

/// Solves `a x = b` for symmetric positive-definite `a`; `None` when `a` is
/// numerically singular.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..a.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::MAX, f64::min);
    if min_pivot < PIVOT_FLOOR * scale {
        return None;
    }
    Some(chol.solve(b))
}
