//! Boltzmann-Shannon entropy kernel, its Bregman distance and the
//! Kullback-Leibler divergence.
//!
//! The kernel is `phi(X) = sum X_e (ln X_e - 1)` with the convention
//! `0 ln 0 = 0`. For this kernel the Bregman distance coincides with the
//! KL divergence; both are implemented independently and the equality is
//! exercised by the test suite.

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Second arguments of `bregman`/`kl` must stay above this floor. Smaller
/// entries are a symptom of multiplicative underflow in the caller and are
/// rejected instead of clamped.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

fn check_nonneg(x: &Tensor3, what: &'static str) -> Result<()> {
    for (index, &v) in x.data().iter().enumerate() {
        if !(v >= 0.0) {
            return Err(Error::EntropyDomain {
                what,
                index,
                value: v,
            });
        }
    }
    Ok(())
}

fn check_positive(y: &Tensor3, what: &'static str) -> Result<()> {
    for (index, &v) in y.data().iter().enumerate() {
        if !(v >= POSITIVITY_FLOOR) {
            return Err(Error::EntropyDomain {
                what,
                index,
                value: v,
            });
        }
    }
    Ok(())
}

/// `phi(X) = sum X_e (ln X_e - 1)` with `0 ln 0 = 0`. Requires `X >= 0`.
pub fn phi(x: &Tensor3) -> Result<f64> {
    check_nonneg(x, "phi argument")?;
    let mut acc = 0.0;
    for &v in x.data() {
        if v > 0.0 {
            acc += v * (v.ln() - 1.0);
        }
    }
    Ok(acc)
}

/// Bregman distance `phi(X) - phi(Y) - <ln Y, X - Y>` for `X >= 0`, `Y > 0`.
pub fn bregman(x: &Tensor3, y: &Tensor3) -> Result<f64> {
    if x.dims() != y.dims() {
        return Err(Error::DimMismatch {
            left: x.dims(),
            right: y.dims(),
        });
    }
    check_positive(y, "bregman second argument")?;
    let px = phi(x)?;
    let py = phi(y)?;
    let mut cross = 0.0;
    for (&xv, &yv) in x.data().iter().zip(y.data()) {
        cross += yv.ln() * (xv - yv);
    }
    Ok(px - py - cross)
}

/// `KL(X, Y) = sum (x ln(x / y) - x + y)` for `X >= 0`, `Y > 0`.
pub fn kl(x: &Tensor3, y: &Tensor3) -> Result<f64> {
    if x.dims() != y.dims() {
        return Err(Error::DimMismatch {
            left: x.dims(),
            right: y.dims(),
        });
    }
    check_nonneg(x, "kl first argument")?;
    check_positive(y, "kl second argument")?;
    let mut acc = 0.0;
    for (&xv, &yv) in x.data().iter().zip(y.data()) {
        if xv > 0.0 {
            acc += xv * (xv / yv).ln() - xv + yv;
        } else {
            acc += yv;
        }
    }
    Ok(acc)
}
