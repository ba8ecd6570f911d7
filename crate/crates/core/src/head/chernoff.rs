//! Closed-form Chernoff distance between Dirichlet distributions.
//!
//! For `m = τ·a + (1 - τ)·b`,
//!
//! ```text
//! J(a, b) = ln Γ(Σm) + τ Σ ln Γ(a^k) + (1-τ) Σ ln Γ(b^k)
//!         - Σ ln Γ(m^k) - τ ln Γ(Σa) - (1-τ) ln Γ(Σb)
//! ```
//!
//! which is `-ln ∫ p_a^τ p_b^(1-τ)`. At `τ = ½` this is the Bhattacharyya
//! distance.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::{digamma_unchecked, ln_gamma_unchecked};
use crate::types::DirichletParams;

pub const BHATTACHARYYA_TAU: f64 = 0.5;

fn check(a: &[f64], b: &[f64], tau: f64) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument("tau must lie in (0, 1)"));
    }
    for (index, &value) in a.iter().chain(b).enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter {
                index: index % a.len(),
                value,
            });
        }
    }
    Ok(())
}

pub fn chernoff(a: &DirichletParams, b: &DirichletParams, tau: f64) -> Result<f64> {
    chernoff_raw(a.alpha(), b.alpha(), tau)
}

/// [`chernoff`] on raw parameter slices.
pub fn chernoff_raw(a: &[f64], b: &[f64], tau: f64) -> Result<f64> {
    check(a, b, tau)?;
    Ok(chernoff_unchecked(a, b, tau))
}

pub(crate) fn chernoff_unchecked(a: &[f64], b: &[f64], tau: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rest = 1.0 - tau;
    let (mut sum_a, mut sum_b, mut sum_m) = (0.0, 0.0, 0.0);
    let mut value = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let m = tau * x + rest * y;
        sum_a += x;
        sum_b += y;
        sum_m += m;
        value += tau * ln_gamma_unchecked(x) + rest * ln_gamma_unchecked(y) - ln_gamma_unchecked(m);
    }
    let j = value + ln_gamma_unchecked(sum_m)
        - tau * ln_gamma_unchecked(sum_a)
        - rest * ln_gamma_unchecked(sum_b);
    // Rounding can leave a tiny negative for nearly equal arguments.
    j.max(0.0)
}

/// `∂J/∂a^k = τ [ψ(Σm) + ψ(a^k) - ψ(m^k) - ψ(Σa)]`.
pub fn chernoff_grad(a: &DirichletParams, b: &DirichletParams, tau: f64) -> Result<Vec<f64>> {
    chernoff_grad_raw(a.alpha(), b.alpha(), tau)
}

pub fn chernoff_grad_raw(a: &[f64], b: &[f64], tau: f64) -> Result<Vec<f64>> {
    check(a, b, tau)?;
    let mut out = alloc::vec![0.0; a.len()];
    chernoff_grad_into(a, b, tau, &mut out);
    Ok(out)
}

pub(crate) fn chernoff_grad_into(a: &[f64], b: &[f64], tau: f64, out: &mut [f64]) {
    let rest = 1.0 - tau;
    let sum_a: f64 = a.iter().sum();
    let sum_m: f64 = a.iter().zip(b).map(|(x, y)| tau * x + rest * y).sum();
    let shared = digamma_unchecked(sum_m) - digamma_unchecked(sum_a);
    for ((g, &x), &y) in out.iter_mut().zip(a).zip(b) {
        let m = tau * x + rest * y;
        *g = tau * (shared + digamma_unchecked(x) - digamma_unchecked(m));
    }
}
