//! Central-difference gradient verification for the hand-written backward
//! passes.

use crate::error::{Error, Result};

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central finite differences of `loss` around
/// `params`, returning the per-parameter relative errors.
pub fn grad_check_errors(
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    if params.len() != analytic.len() {
        return Err(Error::shape(format!(
            "{} parameters but {} analytic gradients",
            params.len(),
            analytic.len()
        )));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::invalid(format!("step size must be > 0, got {eps}")));
    }
    let mut scratch = params.to_vec();
    let mut errors = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        scratch[i] = params[i] + eps;
        let up = loss(&scratch)?;
        scratch[i] = params[i] - eps;
        let down = loss(&scratch)?;
        scratch[i] = params[i];
        let numeric = (up - down) / (2.0 * eps);
        errors.push(relative_error(analytic[i], numeric));
    }
    Ok(errors)
}

/// Maximum relative error over all parameters.
pub fn grad_check(
    loss: impl FnMut(&[f64]) -> Result<f64>,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<f64> {
    let errors = grad_check_errors(loss, params, analytic, eps)?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_verifies() {
        // f(p) = sum p_i^2, df/dp_i = 2 p_i
        let params = [0.3, -1.2, 2.0];
        let analytic = [0.6, -2.4, 4.0];
        let max = grad_check(
            |p| Ok(p.iter().map(|v| v * v).sum()),
            &params,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(max <= 1e-8, "max error {max}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let params = [1.0];
        let analytic = [3.0];
        let max = grad_check(|p| Ok(p[0] * p[0]), &params, &analytic, 1e-5).unwrap();
        assert!(max > 1e-1);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(grad_check(|_| Ok(0.0), &[1.0], &[1.0, 2.0], 1e-5).is_err());
        assert!(grad_check(|_| Ok(0.0), &[1.0], &[1.0], 0.0).is_err());
    }
}
