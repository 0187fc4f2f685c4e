//! Central finite-difference gradient checking.

use crate::error::{Error, Result};

/// Compare an analytic gradient against central finite differences of `f`
/// at `point`, over the given coordinates (all coordinates if empty).
///
/// Returns the maximum over checked coordinates of
/// `|analytic - central| / max(1, |central|)`.
pub fn finite_diff_check<F>(
    f: F,
    analytic: &[f64],
    point: &[f64],
    step: f64,
    coords: &[usize],
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::config(format!("finite-difference step {step} must be positive")));
    }
    if analytic.len() != point.len() {
        return Err(Error::shape(format!(
            "analytic gradient length {} does not match point length {}",
            analytic.len(),
            point.len()
        )));
    }
    let all: Vec<usize>;
    let coords = if coords.is_empty() {
        all = (0..point.len()).collect();
        &all
    } else {
        coords
    };
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        if i >= point.len() {
            return Err(Error::shape(format!(
                "coordinate {i} out of range for {} parameters",
                point.len()
            )));
        }
        x[i] = point[i] + step;
        let up = f(&x)?;
        x[i] = point[i] - step;
        let down = f(&x)?;
        x[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite function value near coordinate {i}"
            )));
        }
        let central = (up - down) / (2.0 * step);
        let rel = (analytic[i] - central).abs() / central.abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
