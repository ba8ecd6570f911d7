//! Conjugate truth inference for the Dirichlet-multinomial crowd model.
//!
//! With `q_t ~ Dirichlet(α₀)` and answers drawn i.i.d. from `q_t`, the
//! posterior after observing counts `n_t` is `Dirichlet(α₀ + n_t)`. The
//! solvability `π = 1 - q^cs` then follows `Beta(Σ_{k<C} α^k, α^cs)` and
//! the conditional `p = q^{1..C} / π` follows `Dirichlet(α¹, …, α^C)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::ln;
use crate::special::ln_gamma_unchecked;
use crate::types::{CategoryScheme, CountVector, DirichletParams, SoftLabel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter { index: 0, value: a });
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter { index: 1, value: b });
        }
        Ok(Self { a, b })
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// `α₀ = 1_{C+1}`.
pub fn uniform_prior(scheme: &CategoryScheme) -> DirichletParams {
    uniform_prior_of_len(scheme.len())
}

pub fn uniform_prior_of_len(len: usize) -> DirichletParams {
    DirichletParams::new(alloc::vec![1.0; len]).expect("ones are valid parameters")
}

/// `α_t = α₀ + n_t`.
pub fn posterior(prior: &DirichletParams, counts: &CountVector) -> Result<DirichletParams> {
    if prior.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            actual: counts.len(),
        });
    }
    DirichletParams::new(
        prior
            .alpha()
            .iter()
            .zip(counts.counts())
            .map(|(a, &n)| a + n as f64)
            .collect(),
    )
}

/// Posterior of the solvability probability `π = 1 - q^cs`.
pub fn marginal_solvability(alpha: &DirichletParams) -> BetaParams {
    let (proper, cs) = alpha.alpha().split_at(alpha.len() - 1);
    BetaParams {
        a: proper.iter().sum(),
        b: cs[0],
    }
}

/// Posterior of the conditional distribution over proper categories.
/// For `C = 1` the result is the degenerate one-component vector.
pub fn marginal_conditional(alpha: &DirichletParams) -> DirichletParams {
    DirichletParams::new(alpha.alpha()[..alpha.len() - 1].to_vec())
        .expect("sub-vector of valid parameters")
}

/// Posterior mode `(α - 1) / Σ(α - 1)`.
///
/// The closed form only holds when every `α^k ≥ 1` and not all equal one.
/// Otherwise the mode is taken on the clamped vector `max(α - 1, 0)`, and
/// when that vanishes the posterior mean is returned.
pub fn posterior_mode(alpha: &DirichletParams) -> SoftLabel {
    let shifted: Vec<f64> = alpha.alpha().iter().map(|a| (a - 1.0).max(0.0)).collect();
    let total: f64 = shifted.iter().sum();
    if total > 0.0 {
        SoftLabel::from_raw(shifted.iter().map(|v| v / total).collect())
    } else {
        posterior_mean(alpha)
    }
}

/// Posterior predictive distribution `α / Σα`.
pub fn posterior_mean(alpha: &DirichletParams) -> SoftLabel {
    let total = alpha.alpha_sum();
    SoftLabel::from_raw(alpha.alpha().iter().map(|a| a / total).collect())
}

/// `ln B(α) = Σ ln Γ(α^k) - ln Γ(Σ α^k)`.
pub fn ln_multivariate_beta(alpha: &DirichletParams) -> f64 {
    alpha
        .alpha()
        .iter()
        .map(|&a| ln_gamma_unchecked(a))
        .sum::<f64>()
        - ln_gamma_unchecked(alpha.alpha_sum())
}

/// Log density of `Dirichlet(α)` at an interior simplex point.
pub fn dirichlet_ln_pdf(alpha: &DirichletParams, q: &[f64]) -> Result<f64> {
    if q.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            actual: q.len(),
        });
    }
    let kernel: f64 = alpha
        .alpha()
        .iter()
        .zip(q)
        .map(|(&a, &x)| if a == 1.0 { 0.0 } else { (a - 1.0) * ln(x) })
        .sum();
    Ok(kernel - ln_multivariate_beta(alpha))
}
