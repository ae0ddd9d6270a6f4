//! Scalar kernels shared by the tape ops and the non-differentiable oracles.

use crate::error::{Error, Result};

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ'(x) = σ(x)σ(−x)`, kept positive where `σ(x)` itself rounds to 1.
#[inline]
pub fn sigmoid_slope(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `H(x)`: 1 strictly above zero, 0 otherwise.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `eps * ln(sum_i exp(x_i / eps))`, shifted by the maximum.
pub fn lse(xs: &[f64], eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if xs.is_empty() {
        return Err(Error::Input("log-sum-exp of an empty vector".into()));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Input("NaN in log-sum-exp argument".into()));
    }
    Ok(lse_unchecked(xs, eps))
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "temperature must be positive and finite, got {eps}"
        )))
    }
}

#[inline]
pub(crate) fn lse_unchecked(xs: &[f64], eps: f64) -> f64 {
    let (arg, m) = xs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        });
    if m == f64::NEG_INFINITY {
        return m;
    }
    let rest: f64 = xs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &x)| ((x - m) / eps).exp())
        .sum();
    m + eps * rest.ln_1p()
}

/// Gradient of [`lse`] with respect to its arguments: `softmax(x / eps)`.
pub fn lse_grad(xs: &[f64], eps: f64) -> Result<Vec<f64>> {
    let out = lse(xs, eps)?;
    Ok(xs.iter().map(|&x| ((x - out) / eps).exp()).collect())
}
