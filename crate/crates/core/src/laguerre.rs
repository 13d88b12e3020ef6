//! Laguerre orthonormal basis of `L²(exp(-x) dx)`, series expansion and the
//! hat transform `φ̂(x) = ∫₀^∞ exp(-y) φ(x + y) dy`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{LabError, Result};
use crate::quadrature::{ExpIntegrator, QuadratureRule};

/// Default cap on polynomial degree.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Orthonormal Laguerre polynomial `Lₙ(x)`, with `L₀ = 1`, `L₁ = 1 − x`.
pub fn laguerre_eval(n: usize, x: f64) -> Result<f64> {
    laguerre_eval_capped(n, x, DEFAULT_DEGREE_CAP)
}

pub fn laguerre_eval_capped(n: usize, x: f64, cap: usize) -> Result<f64> {
    if n > cap {
        return Err(LabError::DegreeOverflow { degree: n, cap });
    }
    Ok(laguerre_unchecked(n, x))
}

fn laguerre_unchecked(n: usize, x: f64) -> f64 {
    // (k+1) L_{k+1} = (2k + 1 − x) L_k − k L_{k−1}
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `[L₀(x), …, L_N(x)]` in one recurrence pass.
pub fn laguerre_all(degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree >= 1 {
        out.push(1.0 - x);
    }
    for k in 1..degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// `|∫ exp(-x) Lₘ Lₙ dx − δₘₙ|` by quadrature.
pub fn orthonormality_defect(m: usize, n: usize, rule: &QuadratureRule) -> Result<f64> {
    if m + n > rule.exact_degree() {
        return Err(LabError::DegreeOverflow {
            degree: m + n,
            cap: rule.exact_degree(),
        });
    }
    let q = rule.sum(|x| laguerre_unchecked(m, x) * laguerre_unchecked(n, x));
    let delta = if m == n { 1.0 } else { 0.0 };
    Ok((q - delta).abs())
}

/// Moments of `|φ|` against `exp(-x) dx`, computed once per function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrability {
    /// `∫ exp(-x) |φ|`
    pub abs_mass: f64,
    /// `∫ exp(-x) |φ| x`
    pub abs_first_moment: f64,
    /// `∫ exp(-x) φ²`
    pub square_mass: f64,
}

impl Integrability {
    pub fn is_integrable(&self) -> bool {
        self.abs_mass.is_finite()
    }

    pub fn has_first_moment(&self) -> bool {
        self.abs_first_moment.is_finite()
    }

    pub fn is_square_integrable(&self) -> bool {
        self.square_mass.is_finite()
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function of one variable, evaluated lazily.
///
/// `breakpoints` lists the points where the function (or its derivative) may
/// jump; integrals are split there. Integrability moments are cached on
/// first use.
#[derive(Clone)]
pub struct ScalarFunction {
    name: String,
    eval: Evaluator,
    breakpoints: Vec<f64>,
    integrability: Arc<OnceLock<Integrability>>,
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("name", &self.name)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl ScalarFunction {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarFunction {
            name: name.into(),
            eval: Arc::new(f),
            breakpoints: Vec::new(),
            integrability: Arc::new(OnceLock::new()),
        }
    }

    pub fn with_breakpoints(mut self, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        self.breakpoints = breakpoints;
        self
    }

    pub fn constant(c: f64) -> Self {
        ScalarFunction::new(format!("const({c})"), move |_| c)
    }

    pub fn identity() -> Self {
        ScalarFunction::new("x", |x| x)
    }

    pub fn laguerre(n: usize) -> Self {
        ScalarFunction::new(format!("L{n}"), move |x| laguerre_unchecked(n, x))
    }

    /// Indicator `1_{x > c}`.
    pub fn step(c: f64) -> Self {
        ScalarFunction::new(format!("1(x>{c})"), move |x| if x > c { 1.0 } else { 0.0 })
            .with_breakpoints(vec![c])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Integrability moments (cached).
    pub fn integrability(&self) -> Integrability {
        *self.integrability.get_or_init(|| {
            let integ = shared_integrator();
            let bp = &self.breakpoints;
            Integrability {
                abs_mass: integ.moment_estimate(|x| self.eval(x).abs(), bp),
                abs_first_moment: integ.moment_estimate(|x| self.eval(x).abs() * x, bp),
                square_mass: integ.moment_estimate(|x| self.eval(x).powi(2), bp),
            }
        })
    }

    pub fn require_integrable(&self) -> Result<Integrability> {
        let i = self.integrability();
        if i.is_integrable() {
            Ok(i)
        } else {
            Err(LabError::Integrability(format!(
                "∫exp(-x)|φ| not finite for {}",
                self.name
            )))
        }
    }

    /// `x ↦ φ(x) + λ ψ(x)`.
    pub fn add_scaled(&self, lambda: f64, other: &ScalarFunction) -> ScalarFunction {
        let (f, g) = (self.clone(), other.clone());
        let mut bp = self.breakpoints.clone();
        bp.extend_from_slice(&other.breakpoints);
        ScalarFunction::new(format!("{}+{lambda}*{}", f.name, g.name), move |x| {
            f.eval(x) + lambda * g.eval(x)
        })
        .with_breakpoints(bp)
    }

    /// Antiderivative `Φ(x) = ∫₀ˣ φ(y) dy` (Gauss–Legendre, split at breakpoints).
    pub fn antiderivative(&self) -> ScalarFunction {
        let f = self.clone();
        let rule = shared_integrator().base().legendre.clone();
        let bp = self.breakpoints.clone();
        let name = format!("Int[{}]", self.name);
        let pieces = bp.clone();
        ScalarFunction::new(name, move |x| {
            let sign = if x < 0.0 { -1.0 } else { 1.0 };
            let (lo, hi) = if x < 0.0 { (x, 0.0) } else { (0.0, x) };
            let mut total = 0.0;
            let mut left = lo;
            for &b in pieces.iter().filter(|&&b| b > lo && b < hi) {
                total += rule.integrate_interval(|y| f.eval(y), left, b);
                left = b;
            }
            total += rule.integrate_interval(|y| f.eval(y), left, hi);
            sign * total
        })
        .with_breakpoints(bp)
    }
}

/// Process-wide default integrator (order 64 with doubling to 128).
pub fn shared_integrator() -> &'static ExpIntegrator {
    static INTEGRATOR: OnceLock<ExpIntegrator> = OnceLock::new();
    INTEGRATOR.get_or_init(ExpIntegrator::default)
}

/// Coefficients `α₀..α_N` of `φ` in the orthonormal Laguerre basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreExpansion {
    pub coefficients: Vec<f64>,
    /// `∫ exp(-x) φ²`
    pub norm_sq: f64,
    /// `‖φ‖² − Σ αₙ²`, the squared L² distance to the truncated series.
    pub residual: f64,
}

impl LaguerreExpansion {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients.get(n).copied().unwrap_or(0.0)
    }

    /// `Σ αₙ Lₙ(x)`.
    pub fn synthesize(&self, x: f64) -> f64 {
        laguerre_all(self.degree(), x)
            .iter()
            .zip(&self.coefficients)
            .map(|(l, a)| l * a)
            .sum()
    }
}

/// Expands `φ` to degree `degree` using `rule`.
///
/// Functions with breakpoints are integrated piecewise at the rule's order.
pub fn expand(
    phi: &ScalarFunction,
    degree: usize,
    rule: &QuadratureRule,
) -> Result<LaguerreExpansion> {
    if degree > DEFAULT_DEGREE_CAP {
        return Err(LabError::DegreeOverflow {
            degree,
            cap: DEFAULT_DEGREE_CAP,
        });
    }
    let integ = phi.integrability();
    if !integ.is_square_integrable() {
        return Err(LabError::Integrability(format!(
            "∫exp(-x)φ² not finite for {}",
            phi.name()
        )));
    }
    let coefficients: Vec<f64> = if phi.breakpoints().is_empty() {
        let mut acc = vec![0.0; degree + 1];
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let fx = phi.eval(x);
            for (a, l) in acc.iter_mut().zip(laguerre_all(degree, x)) {
                *a += w * fx * l;
            }
        }
        acc
    } else {
        let rules = crate::quadrature::ExpRules {
            laguerre: rule.clone(),
            legendre: QuadratureRule::gauss_legendre(rule.len())?,
        };
        (0..=degree)
            .map(|n| {
                rules.integrate_from(
                    |x| phi.eval(x) * laguerre_unchecked(n, x),
                    0.0,
                    phi.breakpoints(),
                )
            })
            .collect()
    };
    if coefficients.iter().any(|a| !a.is_finite()) {
        return Err(LabError::Integrability("non-finite coefficient".into()));
    }
    let norm_sq = integ.square_mass;
    let captured: f64 = coefficients.iter().map(|a| a * a).sum();
    Ok(LaguerreExpansion {
        coefficients,
        norm_sq,
        residual: norm_sq - captured,
    })
}

/// `‖φ − Σ αₙ Lₙ‖²` in `L²(exp(-x) dx)`, evaluated by quadrature.
pub fn expansion_error(phi: &ScalarFunction, expansion: &LaguerreExpansion) -> Result<f64> {
    shared_integrator().integrate(
        |x| (phi.eval(x) - expansion.synthesize(x)).powi(2),
        phi.breakpoints(),
    )
}

/// `φ̂(x) = ∫₀^∞ exp(-y) φ(x + y) dy = exp(x) ∫ₓ^∞ exp(-y) φ(y) dy`.
pub fn hat_transform(phi: &ScalarFunction) -> Result<ScalarFunction> {
    phi.require_integrable()?;
    let f = phi.clone();
    let integ = shared_integrator();
    let bp = phi.breakpoints().to_vec();
    let pieces = bp.clone();
    Ok(
        ScalarFunction::new(format!("hat[{}]", phi.name()), move |x| {
            // ∫₀^∞ exp(-y) φ(x+y) dy with y-breakpoints at (b − x)
            let shifted: Vec<f64> = pieces.iter().map(|b| b - x).filter(|&b| b > 0.0).collect();
            integ
                .integrate(|y| f.eval(x + y), &shifted)
                .unwrap_or_else(|_| integ.integrate_finest(|y| f.eval(x + y), 0.0, &shifted))
        })
        .with_breakpoints(bp),
    )
}

/// `max_x |φ̂(x) − Dφ̂(x) − φ(x)|` with `D` the central difference of step `h`.
pub fn hat_identity_defect(phi: &ScalarFunction, grid: &[f64], h: f64) -> Result<f64> {
    let hat = hat_transform(phi)?;
    let mut worst: f64 = 0.0;
    for &x in grid {
        let d = (hat.eval(x + h) - hat.eval(x - h)) / (2.0 * h);
        let defect = (hat.eval(x) - d - phi.eval(x)).abs();
        if !defect.is_finite() {
            return Err(LabError::Integrability(format!(
                "non-finite defect at x={x}"
            )));
        }
        worst = worst.max(defect);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule64() -> QuadratureRule {
        QuadratureRule::gauss_laguerre(64).unwrap()
    }

    /// Direct-sum oracle: `Lₙ(x) = Σₖ (−1)ᵏ C(n,k) xᵏ / k!`.
    fn laguerre_direct(n: usize, x: f64) -> f64 {
        let mut total = 0.0;
        let mut binom = 1.0;
        let mut kfact = 1.0;
        for k in 0..=n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
                kfact *= k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * binom * x.powi(k as i32) / kfact;
        }
        total
    }

    #[test]
    fn low_degree_values() {
        for (x, v) in [(0.0, 1.0), (1.0, 0.0), (2.0, -1.0)] {
            assert_eq!(laguerre_eval(1, x).unwrap(), v);
        }
        assert_eq!(laguerre_eval(0, 7.3).unwrap(), 1.0);
        assert!((laguerre_eval(2, 1.0).unwrap() - laguerre_direct(2, 1.0)).abs() < 1e-15);
        assert!((laguerre_eval(2, 1.0).unwrap() + 0.5).abs() < 1e-15);
        let x: f64 = 1.7;
        let l4 = (24.0 - 96.0 * x + 72.0 * x * x - 16.0 * x.powi(3) + x.powi(4)) / 24.0;
        assert!((laguerre_eval(4, x).unwrap() - l4).abs() < 1e-13);
    }

    #[test]
    fn recurrence_matches_direct_sum() {
        for n in 0..12 {
            for &x in &[0.1, 0.9, 3.0, 7.5] {
                let r = laguerre_eval(n, x).unwrap();
                let d = laguerre_direct(n, x);
                assert!((r - d).abs() < 1e-10 * d.abs().max(1.0), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn degree_cap_is_enforced() {
        assert_eq!(
            laguerre_eval(65, 1.0),
            Err(LabError::DegreeOverflow {
                degree: 65,
                cap: 64
            })
        );
        assert!(laguerre_eval_capped(100, 1.0, 128).is_ok());
    }

    #[test]
    fn orthonormality() {
        let rule = rule64();
        assert!(orthonormality_defect(3, 3, &rule).unwrap() < 1e-10);
        assert!(orthonormality_defect(2, 5, &rule).unwrap() < 1e-10);
        assert!(orthonormality_defect(0, 0, &rule).unwrap() < 1e-14);
        for m in 0..20 {
            for n in 0..20 {
                assert!(orthonormality_defect(m, n, &rule).unwrap() < 1e-10);
            }
        }
        assert!(orthonormality_defect(64, 64, &rule).is_err());
    }

    #[test]
    fn expansion_of_basis_and_polynomials() {
        let rule = rule64();
        let e = expand(&ScalarFunction::laguerre(2), 6, &rule).unwrap();
        for (n, a) in e.coefficients.iter().enumerate() {
            let want = if n == 2 { 1.0 } else { 0.0 };
            assert!((a - want).abs() < 1e-10);
        }
        let e = expand(&ScalarFunction::identity(), 5, &rule).unwrap();
        assert!((e.coefficient(0) - 1.0).abs() < 1e-10);
        assert!((e.coefficient(1) + 1.0).abs() < 1e-10);
        assert!(e.coefficients[2..].iter().all(|a| a.abs() < 1e-10));
        let sq = ScalarFunction::new("x^2", |x| x * x);
        let e = expand(&sq, 5, &rule).unwrap();
        for (n, want) in [(0, 2.0), (1, -4.0), (2, 2.0)] {
            assert!((e.coefficient(n) - want).abs() < 1e-10);
        }
        assert!(e.residual.abs() < 1e-9);
    }

    #[test]
    fn expansion_error_decreases_to_zero_at_degree() {
        let rule = rule64();
        let cubic = ScalarFunction::new("cubic", |x| 1.0 - 2.0 * x + 0.5 * x.powi(3));
        let errs: Vec<f64> = (0..=4)
            .map(|n| expansion_error(&cubic, &expand(&cubic, n, &rule).unwrap()).unwrap())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
        assert!(errs[3] < 1e-10);
    }

    #[test]
    fn parseval_bound_for_step() {
        let rule = rule64();
        let step = ScalarFunction::step(1.0);
        let e = expand(&step, 30, &rule).unwrap();
        assert!(e.residual > -1e-10);
        assert!((e.norm_sq - (-1.0f64).exp()).abs() < 1e-12);
        // α₀ = ∫ exp(-x) 1(x>1) = e^{-1}
        assert!((e.coefficient(0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hat_transform_closed_forms() {
        let one = hat_transform(&ScalarFunction::constant(1.0)).unwrap();
        let id = hat_transform(&ScalarFunction::identity()).unwrap();
        let l1 = hat_transform(&ScalarFunction::laguerre(1)).unwrap();
        let ex = hat_transform(&ScalarFunction::new("e^-x", |x| (-x).exp())).unwrap();
        let step = hat_transform(&ScalarFunction::step(1.0)).unwrap();
        for &x in &[0.0, 0.3, 1.0, 2.5, 9.0] {
            assert!((one.eval(x) - 1.0).abs() < 1e-13);
            assert!((id.eval(x) - (x + 1.0)).abs() < 1e-12);
            assert!((l1.eval(x) + x).abs() < 1e-12);
            assert!((ex.eval(x) - 0.5 * (-x).exp()).abs() < 1e-13);
            let want = if x < 1.0 { (x - 1.0).exp() } else { 1.0 };
            assert!((step.eval(x) - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn hat_identity_defects() {
        let grid: Vec<f64> = (1..40).map(|i| i as f64 * 0.2).collect();
        let h = 1e-4;
        assert!(hat_identity_defect(&ScalarFunction::constant(3.0), &grid, h).unwrap() < 1e-8);
        assert!(hat_identity_defect(&ScalarFunction::identity(), &grid, h).unwrap() < 1e-6);
        let ex = ScalarFunction::new("e^-x", |x| (-x).exp());
        assert!(hat_identity_defect(&ex, &grid, h).unwrap() < 1e-6);
    }

    #[test]
    fn hat_identity_defect_is_second_order() {
        let f = ScalarFunction::new("x²e^(-x/3)", |x: f64| x * x * (-x / 3.0).exp());
        let grid = [0.5, 1.0, 2.0];
        let d1 = hat_identity_defect(&f, &grid, 1e-2).unwrap();
        let d2 = hat_identity_defect(&f, &grid, 5e-3).unwrap();
        let ratio = d1 / d2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn non_integrable_function_is_rejected() {
        let f = ScalarFunction::new("e^{2x}", |x| (2.0 * x).exp());
        assert!(hat_transform(&f).is_err());
        assert!(expand(&f, 3, &rule64()).is_err());
    }

    #[test]
    fn hat_dominates_for_nondecreasing() {
        let f = ScalarFunction::new("sqrt", |x: f64| x.max(0.0).sqrt());
        let hat = hat_transform(&f).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..50 {
            let x = i as f64 * 0.2;
            let h = hat.eval(x);
            assert!(h >= f.eval(x));
            assert!(h >= last);
            last = h;
        }
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        let phi = ScalarFunction::laguerre(1).antiderivative();
        for &x in &[0.0, 0.5, 3.0] {
            assert!((phi.eval(x) - (x - 0.5 * x * x)).abs() < 1e-12);
        }
        let s = ScalarFunction::step(1.0).antiderivative();
        assert!((s.eval(3.0) - 2.0).abs() < 1e-12);
        assert!(s.eval(0.7).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn hat_transform_is_linear(lambda in -5.0f64..5.0, x in 0.0f64..6.0, a in 0usize..5, b in 0usize..5) {
            let f = ScalarFunction::laguerre(a);
            let g = ScalarFunction::laguerre(b).add_scaled(0.5, &ScalarFunction::new("e", |t| (-t).exp()));
            let lhs = hat_transform(&f.add_scaled(lambda, &g)).unwrap().eval(x);
            let rhs = hat_transform(&f).unwrap().eval(x) + lambda * hat_transform(&g).unwrap().eval(x);
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn parseval_never_exceeds_norm(c0 in -2.0f64..2.0, c2 in -2.0f64..2.0, c5 in -2.0f64..2.0) {
            let f = ScalarFunction::new("mix", move |x| {
                c0 + c2 * laguerre_unchecked(2, x) + c5 * laguerre_unchecked(5, x) + (-x).exp()
            });
            let e = expand(&f, 10, &rule64()).unwrap();
            prop_assert!(e.residual > -1e-10);
        }
    }
}
