//! Central finite differences, the independent oracle for the gradient
//! contract. Kept separate from every analytic gradient path on purpose.

use ndarray::Array2;

use super::problem::{gradient, DifferentiableObjective};
use super::EngineError;

/// Floor applied to relative-error denominators.
const DENOM_FLOOR: f64 = 1e-12;

/// Worst-case relative error between the analytic gradient and central
/// differences with step `h`, over the given coordinates.
pub fn finite_diff_check_coords<O: DifferentiableObjective + ?Sized>(
    objective: &O,
    logits: &Array2<f64>,
    h: f64,
    coords: &[(usize, usize)],
) -> Result<f64, EngineError> {
    let (_, analytic) = gradient(objective, logits.view())?;
    let mut work = logits.clone();
    let mut worst: f64 = 0.0;
    for &(i, k) in coords {
        let orig = work[(i, k)];
        work[(i, k)] = orig + h;
        let f_plus = objective.value(work.view())?;
        work[(i, k)] = orig - h;
        let f_minus = objective.value(work.view())?;
        work[(i, k)] = orig;
        let numeric = (f_plus - f_minus) / (2.0 * h);
        let a = analytic[(i, k)];
        let denom = a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// [`finite_diff_check_coords`] over every coordinate of the logits matrix.
pub fn finite_diff_check<O: DifferentiableObjective + ?Sized>(
    objective: &O,
    logits: &Array2<f64>,
    h: f64,
) -> Result<f64, EngineError> {
    let (n, k) = logits.dim();
    let coords: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..k).map(move |c| (i, c))).collect();
    finite_diff_check_coords(objective, logits, h, &coords)
}
