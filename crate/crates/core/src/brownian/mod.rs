//! Brownian sampling on a fine grid of step `dt`.
//!
//! Two drivers produce the same fine-grid law:
//! * [`simulate`] materializes every step (the dense [`BrownianPath`]);
//! * [`adaptive::drive`] takes large steps far from the levels of interest
//!   and refines by Brownian-bridge midpoints near them, so only the fine
//!   steps that can carry a zero, a crossing or band occupation are drawn.
//!
//! Per fine step the sampler keeps one uniform `u`. Given the endpoints
//! `(a, b)` it decides bridge touches of any level and, through
//! [`cell_local_time`], draws the local time at zero inside the step from its
//! exact conditional law.

pub mod adaptive;
mod path;
pub mod scenario;

pub use path::{simulate, BrownianPath, HitOutcome, PathConfig};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_2_PI, PI};

/// Bridge events below this probability are treated as impossible.
pub const NEGLIGIBLE: f64 = 1e-14;

/// Independent stream per `(seed, domain, path)`.
#[derive(Debug, Clone)]
pub struct PathRng(ChaCha8Rng);

impl PathRng {
    pub fn new(seed: u128, domain: u64, path_id: u64) -> Self {
        let mut key = [0u8; 32];
        key[..16].copy_from_slice(&seed.to_le_bytes());
        key[16..24].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(path_id);
        PathRng(rng)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        1.0 - self.0.random::<f64>()
    }

    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Probability that a Brownian bridge of duration `h` from `a` to `b`
/// reaches `level`.
#[inline]
pub fn touch_probability(level: f64, a: f64, b: f64, h: f64) -> f64 {
    let (x, y) = (a - level, b - level);
    if x * y <= 0.0 {
        1.0
    } else {
        (-2.0 * x * y / h).exp()
    }
}

/// Whether the bridge reaches `level`, using the step's uniform.
#[inline]
pub fn touches(level: f64, a: f64, b: f64, h: f64, u: f64) -> bool {
    u <= touch_probability(level, a, b, h)
}

/// Local time at zero of the bridge from `a` to `b` over `h`, sampled from
/// `P(ℓ > y) = exp(−((|a|+|b|+y)² − (b−a)²) / 2h)` by inversion of `u`.
/// Zero exactly when the bridge does not touch zero.
#[inline]
pub fn cell_local_time(a: f64, b: f64, h: f64, u: f64) -> f64 {
    let c = a.abs() + b.abs();
    let d2 = (b - a) * (b - a);
    let r = d2 - 2.0 * h * u.ln();
    if r <= c * c {
        0.0
    } else {
        r.sqrt() - c
    }
}

/// Tanaka increment `|b| − |a| − sgn(a)(b − a)` with `sgn(0) = 0`.
#[inline]
pub fn tanaka_increment(a: f64, b: f64) -> f64 {
    let s = if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    };
    b.abs() - a.abs() - s * (b - a)
}

/// Time the straight segment from `a` to `b` over `h` spends in `[−ε, ε]`.
pub fn band_occupation(a: f64, b: f64, h: f64, eps: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo <= 0.0 {
        return if lo.abs() <= eps { h } else { 0.0 };
    }
    let overlap = (hi.min(eps) - lo.max(-eps)).max(0.0);
    h * overlap / (hi - lo)
}

/// Fractional position of a located zero inside a step (sign change or
/// sampled touch), by V-interpolation `|a| / (|a| + |b|)`.
#[inline]
pub fn zero_fraction(a: f64, b: f64) -> f64 {
    let s = a.abs() + b.abs();
    if s == 0.0 {
        0.0
    } else {
        a.abs() / s
    }
}

/// `λ` weight of a cell `[u0, u1]`: makes `E[w ℓ_cell]` equal
/// `E[√(2/π) ∫ dℓ_u / √(1 − u)]` over the cell.
#[inline]
pub fn lambda_weight(u0: f64, u1: f64) -> f64 {
    let (s0, s1) = (u0.max(0.0).sqrt(), u1.min(1.0).sqrt());
    if s1 - s0 <= 0.0 {
        return (2.0 / PI).sqrt() / (1.0 - u0).sqrt();
    }
    (2.0 / PI).sqrt() * (s1.asin() - s0.asin()) / (s1 - s0)
}

/// `E[ℓ_t] = √(2t/π)`.
pub fn expected_local_time(t: f64) -> f64 {
    (FRAC_2_PI * t).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let mut a = PathRng::new(42, 1, 7);
        let mut b = PathRng::new(42, 1, 7);
        let mut c = PathRng::new(42, 1, 8);
        let mut d = PathRng::new(42, 2, 7);
        let xa: Vec<f64> = (0..5).map(|_| a.normal()).collect();
        let xb: Vec<f64> = (0..5).map(|_| b.normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa[0], c.normal());
        assert_ne!(xa[0], d.normal());
        assert!((0..1000).all(|_| {
            let u = a.uniform();
            u > 0.0 && u <= 1.0
        }));
    }

    #[test]
    fn touch_probabilities() {
        assert_eq!(touch_probability(0.0, -0.1, 0.2, 1e-4), 1.0);
        assert_eq!(touch_probability(1.0, 1.0, 0.5, 1e-4), 1.0);
        let p = touch_probability(0.0, 0.01, 0.01, 1e-4);
        assert!((p - (-2.0f64).exp()).abs() < 1e-15);
        // monotone in the level above both endpoints
        assert!(touch_probability(1.0, 0.9, 0.95, 0.01) > touch_probability(1.1, 0.9, 0.95, 0.01));
    }

    #[test]
    fn cell_local_time_consistent_with_touch() {
        let h = 1e-4;
        for &(a, b) in &[(0.01, 0.02), (-0.005, 0.003), (0.0, 0.01), (0.03, 0.04)] {
            for i in 1..200 {
                let u = i as f64 / 200.0;
                let l = cell_local_time(a, b, h, u);
                assert!(l >= 0.0);
                assert_eq!(
                    l > 0.0,
                    u < touch_probability(0.0, a, b, h),
                    "a={a} b={b} u={u}"
                );
            }
        }
    }

    #[test]
    fn cell_local_time_mean_matches_bridge_formula() {
        // E[ℓ | a, b] = ½ erfc((|a|+|b|)/√(2h)) / p_h(b − a)
        let (a, b, h) = (0.004, -0.002, 1e-4);
        let m = 200_000;
        let mean: f64 = (0..m)
            .map(|i| cell_local_time(a, b, h, (i as f64 + 0.5) / m as f64))
            .sum::<f64>()
            / m as f64;
        let c = a.abs() + b.abs();
        let p = (-(b - a) * (b - a) / (2.0 * h)).exp() / (2.0 * PI * h).sqrt();
        let want = 0.5 * statrs::function::erf::erfc(c / (2.0 * h).sqrt()) / p;
        assert!((mean - want).abs() < 1e-4 * want, "{mean} {want}");
    }

    #[test]
    fn tanaka_and_band() {
        assert_eq!(tanaka_increment(0.1, 0.2), 0.0);
        assert!((tanaka_increment(0.1, -0.05) - 0.1).abs() < 1e-15);
        assert_eq!(tanaka_increment(0.0, -0.3), 0.3);
        assert!((band_occupation(-0.2, 0.2, 1.0, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(band_occupation(0.2, 0.3, 1.0, 0.1), 0.0);
        assert_eq!(band_occupation(0.05, 0.05, 2.0, 0.1), 2.0);
    }

    #[test]
    fn lambda_weights_sum_to_one_in_mean() {
        let n = 10_000;
        let total: f64 = (0..n)
            .map(|k| {
                let (u0, u1) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
                lambda_weight(u0, u1) * (expected_local_time(u1) - expected_local_time(u0))
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
