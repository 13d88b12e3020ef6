//! Martingales `M^φ_t = E[φ(A_∞) | F_t] = Z_t φ̂(A_t) + (1 − Z_t) φ(A_t)` of
//! an honest time under condition (A), where `A_∞` is Exp(1).

use crate::error::{LabError, Result};
use crate::laguerre::{hat_transform, shared_integrator, Integrability, ScalarFunction};
use crate::stats::McEstimate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// `φ` with its hat transform and antiderivative.
#[derive(Debug, Clone)]
pub struct PhiMartingaleSpec {
    pub phi: ScalarFunction,
    pub phi_hat: ScalarFunction,
    /// `Φ(x) = ∫₀ˣ φ`
    pub big_phi: ScalarFunction,
    pub integrability: Integrability,
}

impl PhiMartingaleSpec {
    /// Checks `∫ e^{−x}|φ| < ∞` and `∫ e^{−x}|φ|x < ∞`.
    pub fn new(phi: ScalarFunction) -> Result<Self> {
        let integrability = phi.require_integrable()?;
        if !integrability.has_first_moment() {
            return Err(LabError::Integrability(format!(
                "∫exp(-x)|φ|x not finite for {}",
                phi.name()
            )));
        }
        Ok(PhiMartingaleSpec {
            phi_hat: hat_transform(&phi)?,
            big_phi: phi.antiderivative(),
            phi,
            integrability,
        })
    }

    pub fn name(&self) -> &str {
        self.phi.name()
    }

    /// `max |φ̂ − Dφ̂ − φ|` over `grid`, `D` the central difference of step `h`.
    pub fn hat_defect(&self, grid: &[f64], h: f64) -> f64 {
        grid.iter()
            .map(|&x| {
                let d = (self.phi_hat.eval(x + h) - self.phi_hat.eval(x - h)) / (2.0 * h);
                (self.phi_hat.eval(x) - d - self.phi.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `Z φ̂(A) + (1 − Z) φ(A)`.
pub fn m_phi(spec: &PhiMartingaleSpec, z: f64, a: f64) -> f64 {
    let mut v = 0.0;
    if z != 0.0 {
        v += z * spec.phi_hat.eval(a);
    }
    if z != 1.0 {
        v += (1.0 - z) * spec.phi.eval(a);
    }
    v
}

/// `φ(A)(1 − Z) − Φ(A) + tail`, with `tail = E[Φ(A_∞) | F_t]`.
pub fn leminermee_value(spec: &PhiMartingaleSpec, z: f64, a: f64, tail: f64) -> f64 {
    spec.phi.eval(a) * (1.0 - z) - spec.big_phi.eval(a) + tail
}

/// `E[Φ(A_∞) | F_t]` through the hat transform of `Φ`.
pub fn leminermee_tail(spec: &PhiMartingaleSpec, z: f64, a: f64) -> Result<f64> {
    let hat = hat_transform(&spec.big_phi)?;
    Ok(z * hat.eval(a) + (1.0 - z) * spec.big_phi.eval(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValuesAtL {
    /// `M^φ_L = φ̂(A_L)`
    pub terminal: f64,
    /// `E[φ(A_∞) | F_L] = φ(A_L)`
    pub conditional: f64,
}

pub fn values_at_l(spec: &PhiMartingaleSpec, a_l: f64) -> ValuesAtL {
    ValuesAtL {
        terminal: spec.phi_hat.eval(a_l),
        conditional: spec.phi.eval(a_l),
    }
}

/// `sup over grid of |φ̂ − φ|`.
pub fn corimport_residual(spec: &PhiMartingaleSpec, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&y| (spec.phi_hat.eval(y) - spec.phi.eval(y)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedValues {
    /// `E[M^φ_L] = ∫ x e^{−x} φ(x) dx`
    pub at_l: f64,
    /// `E[M^φ_∞] = ∫ e^{−x} φ(x) dx`
    pub at_infinity: f64,
}

pub fn expected_values(spec: &PhiMartingaleSpec) -> Result<ExpectedValues> {
    let integ = shared_integrator();
    let bp = spec.phi.breakpoints();
    Ok(ExpectedValues {
        at_l: integ.integrate(|x| x * spec.phi.eval(x), bp)?,
        at_infinity: integ.integrate(|x| spec.phi.eval(x), bp)?,
    })
}

/// `E[φ(e₁ + e₂)]` by sampling `e₁ + e₂ ~ Gamma(2, 1)`.
pub fn gamma2_cross_check(spec: &PhiMartingaleSpec, n: usize, seed: u64) -> Result<McEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = || -(1.0 - rng.random::<f64>()).ln();
    let xs: Vec<f64> = (0..n).map(|_| spec.phi.eval(e() + e())).collect();
    McEstimate::from_samples(&xs)
}

/// `α₁ = ∫ e^{−x} (1 − x) φ(x) dx`.
pub fn alpha1(spec: &PhiMartingaleSpec) -> Result<f64> {
    shared_integrator().integrate(|x| (1.0 - x) * spec.phi.eval(x), spec.phi.breakpoints())
}

/// `E[M^φ_L] − E[M^φ_∞]`, which equals `−α₁`.
pub fn s1_gap(spec: &PhiMartingaleSpec) -> Result<f64> {
    if !spec.integrability.is_square_integrable() {
        return Err(LabError::Integrability(format!(
            "∫exp(-x)φ² not finite for {}",
            spec.name()
        )));
    }
    let e = expected_values(spec)?;
    Ok(e.at_l - e.at_infinity)
}

/// Rejects `φ` that decreases anywhere on `[0, 50]`.
pub fn require_nondecreasing(phi: &ScalarFunction) -> Result<()> {
    let mut prev = phi.eval(0.0);
    for i in 1..=5000 {
        let v = phi.eval(i as f64 * 0.01);
        if v < prev - 1e-12 * prev.abs().max(1.0) {
            return Err(LabError::NotMonotone);
        }
        prev = v;
    }
    Ok(())
}

/// `max_t |sup_{s≤t} M^φ_s − φ̂(A_t)|` along a series of `(Z_t, A_t)`.
pub fn supremum_defect(spec: &PhiMartingaleSpec, series: &[(f64, f64)]) -> Result<f64> {
    require_nondecreasing(&spec.phi)?;
    let mut sup = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &(z, a) in series {
        sup = sup.max(m_phi(spec, z, a));
        worst = worst.max((sup - spec.phi_hat.eval(a)).abs());
    }
    Ok(worst)
}

/// The test functions of the family checks.
pub fn function_suite() -> Vec<ScalarFunction> {
    let mut v = vec![
        ScalarFunction::constant(1.0),
        ScalarFunction::constant(5.0),
        ScalarFunction::identity(),
        ScalarFunction::new("x^2", |x| x * x),
        ScalarFunction::new("exp(-x)", |x| (-x).exp()),
    ];
    v.extend((1..=4).map(ScalarFunction::laguerre));
    v.push(ScalarFunction::step(1.0));
    v
}

/// Whether a suite member is constant (by name).
pub fn is_constant(phi: &ScalarFunction) -> bool {
    phi.name().starts_with("const")
}
