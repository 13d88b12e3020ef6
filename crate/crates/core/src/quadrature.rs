//! Gaussian quadrature rules.
//!
//! Gauss–Laguerre rules integrate against `exp(-x) dx` on `(0, ∞)`;
//! Gauss–Legendre rules cover finite pieces (breakpoints of Borel
//! integrands, the `sin²` substitution used by the arcsine kernels).

use crate::error::{LabError, Result};

/// Largest Gauss–Laguerre order we build. Past this the smallest weights
/// underflow `f64`.
pub const MAX_LAGUERRE_ORDER: usize = 128;

/// Default order for every exp-weighted integral in the crate.
pub const DEFAULT_ORDER: usize = 64;

/// Nodes and positive weights of a Gaussian rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss–Laguerre rule with `n` nodes for the weight `exp(-x)` on `(0, ∞)`.
    ///
    /// Exact for polynomials of degree `≤ 2n − 1`.
    pub fn gauss_laguerre(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_LAGUERRE_ORDER {
            return Err(LabError::Quadrature(format!(
                "Gauss-Laguerre order {n} outside 1..={MAX_LAGUERRE_ORDER}"
            )));
        }
        // Eigenvalues of the Jacobi matrix (diagonal 2k+1, off-diagonal k+1)
        // seed the nodes.
        let mut diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
        let mut off: Vec<f64> = (0..n).map(|k| (k + 1) as f64).collect();
        off[n - 1] = 0.0;
        implicit_ql(&mut diag, &mut off)?;
        diag.sort_by(f64::total_cmp);
        // Polish each eigenvalue with Newton on Lₙ, then take Christoffel
        // weights wᵢ = 1 / Σ_{k<n} Lₖ(xᵢ)², a sum of positive terms.
        let nf = n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &x0 in &diag {
            let mut z = x0;
            for _ in 0..4 {
                let (p, q) = laguerre_pair(n, z);
                let dp = nf * (p - q) / z;
                let dz = p / dp;
                z -= dz;
                if dz.abs() <= 2.0 * f64::EPSILON * z {
                    break;
                }
            }
            if z.is_nan() || z <= 0.0 || (z - x0).abs() > 1e-6 * x0.max(1.0) {
                return Err(LabError::Quadrature(format!(
                    "Newton polish drifted at node {x0}"
                )));
            }
            let mut prev = 0.0;
            let mut cur = 1.0;
            let mut norm = 0.0;
            for k in 0..n {
                norm += cur * cur;
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0 - z) * cur - kf * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            nodes.push(z);
            weights.push(1.0 / norm);
        }
        let rule = QuadratureRule { nodes, weights };
        rule.validate()?;
        Ok(rule)
    }

    /// Gauss–Legendre rule with `n` nodes on `[-1, 1]`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Quadrature("Gauss-Legendre order 0".into()));
        }
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        let rule = QuadratureRule { nodes, weights };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<()> {
        let increasing = self.nodes.windows(2).all(|w| w[0] < w[1]);
        let positive = self.weights.iter().all(|&w| w > 0.0 && w.is_finite());
        if increasing && positive {
            Ok(())
        } else {
            Err(LabError::Quadrature(
                "rule failed node/weight invariants".into(),
            ))
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.len() - 1
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn sum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `∫ₐᵇ f` for a Legendre rule mapped onto `[a, b]`.
    pub fn integrate_interval<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        half * self.sum(|t| f(mid + half * t))
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (`diag`, `off` with `off[i]` coupling `i` and `i+1`). On return `diag`
/// holds the eigenvalues.
fn implicit_ql(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LabError::Quadrature("QL iteration did not converge".into()));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// `(Lₙ(z), Lₙ₋₁(z))` for the classical Laguerre polynomials.
fn laguerre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

/// Paired Laguerre + Legendre rules of one order, used for piecewise
/// exp-weighted integrals `∫₀^∞ exp(-x) g(x) dx`.
#[derive(Debug, Clone)]
pub struct ExpRules {
    pub laguerre: QuadratureRule,
    pub legendre: QuadratureRule,
}

impl ExpRules {
    pub fn new(order: usize) -> Result<Self> {
        Ok(ExpRules {
            laguerre: QuadratureRule::gauss_laguerre(order)?,
            legendre: QuadratureRule::gauss_legendre(order)?,
        })
    }

    /// `∫_{start}^∞ exp(-x) g(x) dx`, split at the given breakpoints so that
    /// each piece is smooth.
    pub fn integrate_from<F: Fn(f64) -> f64>(&self, g: F, start: f64, breakpoints: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut left = start;
        for &b in breakpoints.iter().filter(|&&b| b > start) {
            total += self
                .legendre
                .integrate_interval(|x| (-x).exp() * g(x), left, b);
            left = b;
        }
        total + (-left).exp() * self.laguerre.sum(|y| g(y + left))
    }
}

/// Exp-weighted integrator with adaptive order doubling: an integral is
/// accepted once two successive orders agree to `rel_tol`.
#[derive(Debug, Clone)]
pub struct ExpIntegrator {
    levels: Vec<ExpRules>,
    rel_tol: f64,
}

impl Default for ExpIntegrator {
    fn default() -> Self {
        ExpIntegrator::new(DEFAULT_ORDER).expect("default quadrature order is valid")
    }
}

impl ExpIntegrator {
    /// Base order `order`, doubled up to [`MAX_LAGUERRE_ORDER`].
    pub fn new(order: usize) -> Result<Self> {
        let mut levels = vec![ExpRules::new(order)?];
        let mut n = order * 2;
        while n <= MAX_LAGUERRE_ORDER {
            levels.push(ExpRules::new(n)?);
            n *= 2;
        }
        Ok(ExpIntegrator {
            levels,
            rel_tol: 1e-9,
        })
    }

    pub fn base(&self) -> &ExpRules {
        &self.levels[0]
    }

    pub fn order(&self) -> usize {
        self.levels[0].laguerre.len()
    }

    /// Adaptive `∫_{start}^∞ exp(-x) g(x) dx`.
    pub fn integrate_from<F: Fn(f64) -> f64>(
        &self,
        g: F,
        start: f64,
        breakpoints: &[f64],
    ) -> Result<f64> {
        let mut prev = self.levels[0].integrate_from(&g, start, breakpoints);
        if !prev.is_finite() {
            return Err(LabError::Integrability("non-finite quadrature sum".into()));
        }
        if self.levels.len() == 1 {
            return Ok(prev);
        }
        for rules in &self.levels[1..] {
            let next = rules.integrate_from(&g, start, breakpoints);
            if !next.is_finite() {
                return Err(LabError::Integrability("non-finite quadrature sum".into()));
            }
            if (next - prev).abs() <= self.rel_tol * next.abs().max(1e-300) + 1e-14 {
                return Ok(next);
            }
            prev = next;
        }
        Err(LabError::Quadrature(format!(
            "successive orders disagree beyond {:e}",
            self.rel_tol
        )))
    }

    /// Finiteness probe for `∫ exp(-x) g`. Integrands with kinks (such as
    /// `|φ|`) converge slowly under order doubling, so finiteness is judged
    /// from the decay of `x² exp(-x) g(x)` far out instead. Returns `∞` when
    /// the tail does not decay.
    pub fn moment_estimate<F: Fn(f64) -> f64>(&self, g: F, breakpoints: &[f64]) -> f64 {
        let tail: Vec<f64> = [64.0f64, 128.0, 256.0, 512.0]
            .iter()
            .map(|&x| (x * x * (-x).exp() * g(x)).abs())
            .collect();
        let decays = tail.iter().all(|t| t.is_finite())
            && tail.windows(2).all(|w| w[1] <= w[0].max(1e-300))
            && tail[3] < 1e-6;
        let hi = self.levels[self.levels.len() - 1].integrate_from(&g, 0.0, breakpoints);
        if decays && hi.is_finite() {
            hi
        } else {
            f64::INFINITY
        }
    }

    /// Highest-order value without the agreement check, for integrands with
    /// interior singular derivatives where doubling converges slowly.
    pub fn integrate_finest<F: Fn(f64) -> f64>(
        &self,
        g: F,
        start: f64,
        breakpoints: &[f64],
    ) -> f64 {
        self.levels[self.levels.len() - 1].integrate_from(g, start, breakpoints)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F, breakpoints: &[f64]) -> Result<f64> {
        self.integrate_from(g, 0.0, breakpoints)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    #[test]
    fn laguerre_rule_is_exact_on_monomials() {
        for n in [8, 16, 64] {
            let rule = QuadratureRule::gauss_laguerre(n).unwrap();
            for k in 0..=rule.exact_degree() {
                let q = rule.sum(|x| x.powi(k as i32));
                let exact = factorial(k);
                assert!(
                    ((q - exact) / exact).abs() < 1e-10,
                    "n={n} k={k} q={q} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn rule_invariants() {
        for n in [1, 2, 5, 64, 128] {
            let rule = QuadratureRule::gauss_laguerre(n).unwrap();
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            assert!(rule.nodes()[0] > 0.0);
        }
        assert!(QuadratureRule::gauss_laguerre(0).is_err());
        assert!(QuadratureRule::gauss_laguerre(256).is_err());
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = QuadratureRule::gauss_legendre(20).unwrap();
        let v = rule.integrate_interval(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0);
        assert!((v - (256.0 / 8.0 + 8.0)).abs() < 1e-12);
        let odd = QuadratureRule::gauss_legendre(7).unwrap();
        assert!(odd.nodes()[3].abs() < 1e-15);
    }

    #[test]
    fn piecewise_exp_integral_handles_steps() {
        let rules = ExpRules::new(64).unwrap();
        let v = rules.integrate_from(|x| if x > 1.0 { 1.0 } else { 0.0 }, 0.0, &[1.0]);
        assert!((v - (-1.0f64).exp()).abs() < 1e-14);
        let integ = ExpIntegrator::default();
        let w = integ.integrate(|x| x * x, &[]).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
    }
}
