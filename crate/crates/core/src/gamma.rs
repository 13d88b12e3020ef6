//! Closed forms for the last zero `γ = sup{t ≤ 1 : B_t = 0}`.
//!
//! All integrals over `(0, 1)` against `dz / (π√(z(1−z)))` go through
//! [`arcsine_average`], which substitutes `z = sin²φ` and integrates in `φ`.

use crate::brownian::BrownianPath;
use crate::error::{LabError, Result};
use crate::laguerre::{shared_integrator, ScalarFunction};
use crate::quadrature::QuadratureRule;
use crate::stats::{correlation, ks_test, KsReference, KsResult, McEstimate, MIN_MOMENT_SAMPLES};
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::sync::OnceLock;

/// `θ(x) = √(2/π) ∫_x^∞ exp(−v²/2) dv`.
#[inline]
pub fn theta(x: f64) -> f64 {
    erfc(x / SQRT_2)
}

/// `θ(x) = ∫₀¹ dv exp(−x²/2v) / (π√(v(1−v)))`, by quadrature.
pub fn theta_alternate(x: f64) -> f64 {
    let c = 0.5 * x * x;
    arcsine_average(|v| (-c / v).exp(), &[])
}

fn legendre(n: usize) -> &'static QuadratureRule {
    static L128: OnceLock<QuadratureRule> = OnceLock::new();
    static L32: OnceLock<QuadratureRule> = OnceLock::new();
    let cell = if n == 128 { &L128 } else { &L32 };
    cell.get_or_init(|| QuadratureRule::gauss_legendre(n).expect("Legendre rule"))
}

/// `(1/π) ∫₀¹ F(z) dz / √(z(1−z))` with a fixed 128-point rule per angular
/// panel. Panels refine geometrically toward `z = 0` and split at
/// `z_breaks`, where `F` may jump.
pub fn arcsine_average<F: Fn(f64) -> f64>(f: F, z_breaks: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = (1..=5).map(|k| FRAC_PI_2 / 4f64.powi(k)).collect();
    cuts.extend(
        z_breaks
            .iter()
            .filter(|&&z| z > 0.0 && z < 1.0)
            .map(|z| z.sqrt().asin()),
    );
    cuts.push(0.0);
    cuts.push(FRAC_PI_2);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rule = legendre(128);
    let total: f64 = cuts
        .windows(2)
        .map(|w| {
            rule.integrate_interval(
                |p| {
                    let s = p.sin();
                    f(s * s)
                },
                w[0],
                w[1],
            )
        })
        .sum();
    2.0 * total / PI
}

/// `E[g(W)]` for a standard normal `W`, split at `breaks`.
fn normal_expectation<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = Vec::new();
    let mut x = lo;
    while x < hi {
        cuts.push(x);
        x += 1.0;
    }
    cuts.push(hi);
    cuts.extend(breaks.iter().filter(|&&b| b > lo && b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rule = legendre(32);
    let norm = (2.0 * PI).sqrt();
    cuts.windows(2)
        .map(|w| rule.integrate_interval(|v| g(v) * (-0.5 * v * v).exp() / norm, w[0], w[1]))
        .sum()
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..1.0).contains(&t) {
        Ok(())
    } else {
        Err(LabError::TimeOutOfRange(t))
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabError::Quadrature(format!("{what} is not finite")))
    }
}

/// `Z_t = P[γ > t | F_t] = θ(|b| / √(1 − t))`.
pub fn z_gamma(b: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(theta(b.abs() / (1.0 - t).sqrt()))
}

/// The kernel of `E[h(γ) 1_{γ>t} | B_t = b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalKernel {
    pub t: f64,
    pub b: f64,
}

impl ConditionalKernel {
    pub fn new(t: f64, b: f64) -> Result<Self> {
        check_time(t)?;
        Ok(ConditionalKernel { t, b })
    }

    /// `(1/π) ∫₀¹ dz h(t + z(1−t)) exp(−b²/(2z(1−t))) / √(z(1−z))`.
    pub fn integrate(&self, h: &ScalarFunction) -> Result<f64> {
        let s = 1.0 - self.t;
        let c = self.b * self.b / (2.0 * s);
        let breaks: Vec<f64> = h.breakpoints().iter().map(|&u| (u - self.t) / s).collect();
        let v = arcsine_average(
            |z| {
                let w = if c == 0.0 { 1.0 } else { (-c / z).exp() };
                if w == 0.0 {
                    0.0
                } else {
                    w * h.eval(self.t + z * s)
                }
            },
            &breaks,
        );
        finite(v, "conditional kernel integral")
    }
}

/// `E[h(γ) 1_{γ>t} | F_t]` given `B_t = b`.
pub fn conditional_h(h: &ScalarFunction, t: f64, b: f64) -> Result<f64> {
    ConditionalKernel::new(t, b)?.integrate(h)
}

/// `N^h_t = E[h(γ) | F_t] = h(γ_t)(1 − Z_t) + E[h(γ) 1_{γ>t} | F_t]`, with
/// `γ_t` the last zero before `t`.
pub fn h_martingale(h: &ScalarFunction, t: f64, b: f64, gamma_t: f64) -> Result<f64> {
    let z = z_gamma(b, t)?;
    let tail = conditional_h(h, t, b)?;
    let head = if z < 1.0 {
        h.eval(gamma_t) * (1.0 - z)
    } else {
        0.0
    };
    finite(head + tail, "h-martingale")
}

/// `N^h_γ = (1/π) ∫₀¹ dv h(γ + v(1−γ)) / √(v(1−v))`, to be set against
/// `E[N^h_∞ | F_γ] = h(γ)`.
pub fn n_h_at_gamma(h: &ScalarFunction, gamma: f64) -> Result<f64> {
    conditional_h(h, gamma, 0.0)
}

/// `E[f(s·R)]` for a Rayleigh `R`: `∫₀^∞ e^{−u} f(s√(2u)) du`.
fn rayleigh_mean(f: &ScalarFunction, s: f64, sign: f64) -> f64 {
    let breaks: Vec<f64> = if s > 0.0 {
        f.breakpoints()
            .iter()
            .filter(|&&x| x * sign > 0.0)
            .map(|&x| x * x / (2.0 * s * s))
            .collect()
    } else {
        Vec::new()
    };
    let g = |u: f64| f.eval(sign * s * (2.0 * u).sqrt());
    let integ = shared_integrator();
    integ
        .integrate(g, &breaks)
        .unwrap_or_else(|_| integ.integrate_finest(g, 0.0, &breaks))
}

/// `E|f(B₁)| < ∞` by the tail-decay probe of the Laguerre integrator.
fn require_gaussian_integrable(f: &ScalarFunction) -> Result<()> {
    let mut breaks: Vec<f64> = f.breakpoints().iter().map(|&x| 0.5 * x * x).collect();
    breaks.sort_by(f64::total_cmp);
    let m = shared_integrator().moment_estimate(
        |u| {
            let x = (2.0 * u).sqrt();
            f.eval(x).abs() + f.eval(-x).abs()
        },
        &breaks,
    );
    if m.is_finite() {
        Ok(())
    } else {
        Err(LabError::Integrability(format!(
            "E|f(B₁)| not finite for {}",
            f.name()
        )))
    }
}

/// `E[f(B₁) | F_γ] = ½ ∫ dx |x| e^{−x²/2} f(x√(1−γ))`.
pub fn conditional_f_given_gamma(f: &ScalarFunction, gamma: f64) -> Result<f64> {
    check_time(gamma)?;
    require_gaussian_integrable(f)?;
    let s = (1.0 - gamma).sqrt();
    let v = 0.5 * (rayleigh_mean(f, s, 1.0) + rayleigh_mean(f, s, -1.0));
    finite(v, "E[f(B₁) | F_γ]")
}

/// `P_s f(b) = E[f(b + √s W)]`.
pub fn heat_semigroup(f: &ScalarFunction, s: f64, b: f64) -> f64 {
    if s <= 0.0 {
        return f.eval(b);
    }
    let r = s.sqrt();
    let breaks: Vec<f64> = f.breakpoints().iter().map(|&x| (x - b) / r).collect();
    normal_expectation(|w| f.eval(b + r * w), -13.0, 13.0, &breaks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MfPerp {
    /// `P_{1−t}f(b) − N^{h_f}_t` with `h_f(γ) = E[f(B₁) | F_γ]`
    pub direct: f64,
    /// `M^{f,1} − M^{f,2} − M^{f,3}` as displayed
    pub decomposed: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl MfPerp {
    pub fn discrepancy(&self) -> f64 {
        self.decomposed - self.direct
    }
}

/// `M^{f,⊥}_t` computed two ways, for even `f`, given `B_t = b` and the last
/// zero `γ_t` before `t`.
pub fn m_f_perp(f: &ScalarFunction, t: f64, b: f64, gamma_t: f64) -> Result<MfPerp> {
    check_time(t)?;
    check_time(gamma_t)?;
    require_gaussian_integrable(f)?;
    let s = 1.0 - t;
    let fc = f.clone();
    let h_f = ScalarFunction::new(format!("E[{}(B1)|F_gamma]", f.name()), move |g| {
        if g >= 1.0 {
            return fc.eval(0.0);
        }
        let r = (1.0 - g).sqrt();
        0.5 * (rayleigh_mean(&fc, r, 1.0) + rayleigh_mean(&fc, r, -1.0))
    });
    let direct = heat_semigroup(f, s, b) - h_martingale(&h_f, t, b, gamma_t)?;

    let r = s.sqrt();
    let beta = b / r;
    let pos_breaks: Vec<f64> = f
        .breakpoints()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x / r)
        .collect();
    // ∫₀^∞ dw f(√s w)(p(w+β) + p(w−β)), p the standard normal density
    let m1 = {
        let hi = 13.0 + beta.abs();
        let p = |w: f64| (-0.5 * w * w).exp();
        let rule = legendre(32);
        let mut cuts: Vec<f64> = (0..=(hi.ceil() as usize)).map(|k| k as f64).collect();
        cuts.extend(pos_breaks.iter().filter(|&&x| x < hi));
        cuts.extend([beta.abs()]);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                rule.integrate_interval(|v| f.eval(r * v) * (p(v + beta) + p(v - beta)), w[0], w[1])
            })
            .sum::<f64>()
            / (2.0 * PI).sqrt()
    };
    let m2 = theta(beta.abs()) * rayleigh_mean(f, (1.0 - gamma_t).sqrt(), 1.0);
    let c = b * b / (2.0 * s);
    let m3 = arcsine_average(
        |w| {
            let k = if c == 0.0 { 1.0 } else { (-c / w).exp() };
            if k == 0.0 {
                0.0
            } else {
                k * rayleigh_mean(f, r * (1.0 - w).sqrt(), 1.0)
            }
        },
        &[],
    );
    let out = MfPerp {
        direct,
        decomposed: m1 - m2 - m3,
        m1,
        m2,
        m3,
    };
    finite(out.direct, "direct M^{f,⊥}")?;
    finite(out.decomposed, "decomposed M^{f,⊥}")?;
    Ok(out)
}

/// How the balayage martingale is stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// `T` = end of the path.
    Horizon,
    /// `T` = first passage of the level.
    Level(f64),
}

/// `X_t = x(g_{t∧T}) B_{t∧T}` on the grid of a dense path.
pub fn balayage_martingale<X: Fn(f64) -> f64>(
    path: &BrownianPath,
    x: X,
    stop: StopRule,
) -> Result<Vec<f64>> {
    let hit = match stop {
        StopRule::Horizon => None,
        StopRule::Level(l) => path.hitting_time(l)?.time().map(|t| (t, l)),
    };
    let zeros = path.running_last_zero();
    let mut out = Vec::with_capacity(zeros.len());
    let mut frozen = None;
    for (k, &g) in zeros.iter().enumerate() {
        let t = k as f64 * path.dt;
        if let Some((th, level)) = hit {
            if t >= th {
                let v = *frozen.get_or_insert_with(|| x(path.last_zero_before(th)) * level);
                out.push(v);
                continue;
            }
        }
        out.push(x(g) * path.values[k]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImhofChecks {
    /// `m = |B₁|/√(1−γ)` against the Rayleigh law
    pub ks: KsResult,
    /// `max |corr|` between `{m, sgn B₁}` and `{γ, 1_{γ≤1/2}}`
    pub indep: f64,
    pub corr_m_gamma: f64,
    pub corr_m_sign: f64,
    pub corr_sign_gamma: f64,
    pub m_second_moment: McEstimate,
}

/// Checks on samples of `(γ, B₁)`.
pub fn imhof_checks(samples: &[(f64, f64)]) -> Result<ImhofChecks> {
    if samples.len() < MIN_MOMENT_SAMPLES {
        return Err(LabError::TooFewSamples {
            need: MIN_MOMENT_SAMPLES,
            got: samples.len(),
        });
    }
    let gamma: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let early: Vec<f64> = gamma
        .iter()
        .map(|&g| if g <= 0.5 { 1.0 } else { 0.0 })
        .collect();
    let m: Vec<f64> = samples
        .iter()
        .map(|&(g, b)| b.abs() / (1.0 - g).sqrt())
        .collect();
    let sign: Vec<f64> = samples.iter().map(|s| s.1.signum()).collect();
    let ks = ks_test(&m, KsReference::Rayleigh)?;
    let corr_m_gamma = correlation(&m, &gamma);
    let corr_sign_gamma = correlation(&sign, &gamma);
    let indep = [
        corr_m_gamma,
        correlation(&m, &early),
        corr_sign_gamma,
        correlation(&sign, &early),
    ]
    .iter()
    .fold(0.0f64, |a, c| a.max(c.abs()));
    let m2: Vec<f64> = m.iter().map(|v| v * v).collect();
    Ok(ImhofChecks {
        ks,
        indep,
        corr_m_gamma,
        corr_m_sign: correlation(&m, &sign),
        corr_sign_gamma,
        m_second_moment: McEstimate::from_samples(&m2)?,
    })
}
