//! Finite-difference gradient oracle.
//!
//! Test support: numerically differentiates a black-box scalar function by
//! central differences, independently of the tape's analytic rules. Lives in
//! the library so downstream crates can reuse it in their own test suites.

/// Central finite differences of `f` at `x`, one entry per coordinate.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = xs[i];
        xs[i] = orig + eps;
        let fp = f(&xs);
        xs[i] = orig - eps;
        let fm = f(&xs);
        xs[i] = orig;
        out.push((fp - fm) / (2.0 * eps));
    }
    out
}

/// Central differences at a subset of coordinates. Returns (index, derivative).
pub fn central_difference_at(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    indices: &[usize],
    eps: f64,
) -> Vec<(usize, f64)> {
    let mut xs = x.to_vec();
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let orig = xs[i];
        xs[i] = orig + eps;
        let fp = f(&xs);
        xs[i] = orig - eps;
        let fm = f(&xs);
        xs[i] = orig;
        out.push((i, (fp - fm) / (2.0 * eps)));
    }
    out
}

/// Worst relative disagreement between analytic and numeric gradients.
/// The denominator is floored so that near-zero pairs compare absolutely.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-5))
        .fold(0.0, f64::max)
}
