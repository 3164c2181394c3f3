//! Closed-form limit objects: the eigenfunctions `k`, `ℓ` of the limit
//! generator, the harmonic functions `k*`, `ℓ*`, the survival expectation
//! `E_x exp(-γ L₀(τ))`, the mean of `L₀(τ)` and the half-line functions
//! `k₁`, `k₂` of the odd/even split.
//!
//! Everywhere `s = √(2λ)`; with that reading `k'' = 2λk`, `k(a) = 0`,
//! `k'(a) = 1` and `k'(0+) - k'(0-) = 2γ k(0)` all hold.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Smallest λ accepted by the λ-dependent closed forms.
pub const MIN_LAMBDA: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    /// Only read by the λ-dependent quantities ([`k_limit`], [`l_limit`] and the resolvent).
    pub lambda: f64,
}

impl LimitParams {
    /// Interval and killing mass; λ defaults to 1.
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        if !(a < 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(param("interval", format!("need a < 0 < b, got a = {a}, b = {b}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(param("gamma", format!("must be nonnegative, got {gamma}")));
        }
        Ok(Self {
            a,
            b,
            gamma,
            lambda: 1.0,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= MIN_LAMBDA && lambda.is_finite()) {
            return Err(param("lambda", format!("must be at least {MIN_LAMBDA}, got {lambda}")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    /// `√(2λ)`.
    pub fn slam(&self) -> f64 {
        (2.0 * self.lambda).sqrt()
    }

    /// Common denominator `b - a - 2γab` of `k*` and `ℓ*`.
    pub fn harmonic_denominator(&self) -> f64 {
        self.b - self.a - 2.0 * self.gamma * self.a * self.b
    }
}

fn iverson(p: bool) -> f64 {
    if p {
        1.0
    } else {
        0.0
    }
}

pub fn k_limit(x: f64, p: &LimitParams) -> f64 {
    let s = p.slam();
    (s * (x - p.a)).sinh() / s - p.gamma / p.lambda * (s * p.a).sinh() * (s * x).sinh() * iverson(x >= 0.0)
}

pub fn l_limit(x: f64, p: &LimitParams) -> f64 {
    let s = p.slam();
    (s * (p.b - x)).sinh() / s - p.gamma / p.lambda * (s * p.b).sinh() * (s * x).sinh() * iverson(x <= 0.0)
}

/// One-sided derivative `k'(x±)`; at `x = 0` the `side` selects the limit.
pub fn k_limit_slope(x: f64, p: &LimitParams, right: bool) -> f64 {
    let s = p.slam();
    let jump = if x > 0.0 || (x == 0.0 && right) { 1.0 } else { 0.0 };
    (s * (x - p.a)).cosh() - p.gamma / p.lambda * s * (s * p.a).sinh() * (s * x).cosh() * jump
}

/// One-sided derivative `ℓ'(x±)`.
pub fn l_limit_slope(x: f64, p: &LimitParams, right: bool) -> f64 {
    let s = p.slam();
    let jump = if x < 0.0 || (x == 0.0 && !right) { 1.0 } else { 0.0 };
    -(s * (p.b - x)).cosh() - p.gamma / p.lambda * s * (s * p.b).sinh() * (s * x).cosh() * jump
}

pub fn k_star(x: f64, p: &LimitParams) -> f64 {
    (x - p.a - 2.0 * p.gamma * p.a * x * iverson(x >= 0.0)) / p.harmonic_denominator()
}

pub fn l_star(x: f64, p: &LimitParams) -> f64 {
    (p.b - x - 2.0 * p.gamma * p.b * x * iverson(x <= 0.0)) / p.harmonic_denominator()
}

/// `E_x exp(-γ L₀(τ)) = ℓ*(x) + k*(x)`.
pub fn survival_expectation(x: f64, p: &LimitParams) -> f64 {
    let (a, b, g) = (p.a, p.b, p.gamma);
    (b - a - g * (a + b) * x + g * (b - a) * x.abs()) / p.harmonic_denominator()
}

/// The same expectation in the piecewise-affine form obtained by conditioning
/// on whether the path visits 0 before leaving through the near end.
pub fn survival_affine(x: f64, p: &LimitParams) -> f64 {
    let at_zero = (p.b - p.a) / p.harmonic_denominator();
    if x >= 0.0 {
        x / p.b + (p.b - x) / p.b * at_zero
    } else {
        x / p.a + (p.a - x) / p.a * at_zero
    }
}

/// Mean `2(-a)b/(b-a)` of the exponential law of `L₀(τ)` under `P₀`.
pub fn exp_law_mean(a: f64, b: f64) -> f64 {
    2.0 * (-a) * b / (b - a)
}

/// `E_x L₀(τ) = 2(x∧0 - a)(b - x∨0)/(b - a)`, the Green function at 0.
pub fn mean_local_time(x: f64, a: f64, b: f64) -> f64 {
    2.0 * (x.min(0.0) - a) * (b - x.max(0.0)) / (b - a)
}

/// Probability that Brownian motion on `(0, b]`, killed at 0, is captured at `b`.
pub fn k1(x: f64, b: f64) -> f64 {
    x / b
}

/// Capture probability at `b` with an elastic barrier of strength `γ` at 0.
pub fn k2(x: f64, b: f64, gamma: f64) -> f64 {
    (1.0 + gamma * x) / (1.0 + gamma * b)
}

/// `½(J₁⁻¹k₁ + J₂⁻¹k₂)(x)`, odd extension of `k₁` plus even extension of `k₂`.
pub fn blocks_k_star(x: f64, b: f64, gamma: f64) -> f64 {
    0.5 * (x.signum() * k1(x.abs(), b) + k2(x.abs(), b, gamma))
}

/// `½(J₂⁻¹k₂ - J₁⁻¹k₁)(x)`.
pub fn blocks_l_star(x: f64, b: f64, gamma: f64) -> f64 {
    0.5 * (k2(x.abs(), b, gamma) - x.signum() * k1(x.abs(), b))
}
