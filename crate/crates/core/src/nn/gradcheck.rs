use crate::dense::DenseMatrix;

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central-difference check of `analytic_grad` against `f` around `p`.
/// Returns the largest relative error over all entries.
pub fn finite_diff_check<F>(
    mut f: F,
    p: &DenseMatrix,
    analytic_grad: &DenseMatrix,
    step: f64,
) -> f64
where
    F: FnMut(&DenseMatrix) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    assert_eq!(p.shape(), analytic_grad.shape(), "gradient shape mismatch");
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    for k in 0..p.values().len() {
        let orig = p.values()[k];
        probe.values_mut()[k] = orig + step;
        let up = f(&probe);
        probe.values_mut()[k] = orig - step;
        let down = f(&probe);
        probe.values_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(analytic_grad.values()[k], numeric));
    }
    worst
}
