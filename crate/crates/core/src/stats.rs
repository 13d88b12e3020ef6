//! Monte Carlo summaries, Kolmogorov–Smirnov tests and moment dictionaries.

use crate::error::{LabError, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Fixed-point scale of [`Accumulator`] sums.
const FIXED_SCALE: f64 = 4294967296.0; // 2^32

/// Samples needed by the moment-dictionary tests.
pub const MIN_MOMENT_SAMPLES: usize = 10_000;

/// `2.576`: two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub ci99: (f64, f64),
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<McEstimate> {
        let mut acc = Accumulator::default();
        for &x in xs {
            acc.push(x)?;
        }
        Ok(acc.estimate())
    }

    /// `(mean − target) / stderr`; zero when both vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY * d.signum()
        }
    }
}

/// Count, sum and sum of squares in 2^-32 fixed point, so that merging
/// shards in any grouping gives the same estimate bit for bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accumulator {
    n: u64,
    sum: i128,
    sum_sq: i128,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) -> Result<()> {
        let q = x * FIXED_SCALE;
        let q2 = x * x * FIXED_SCALE;
        if !q.is_finite() || q.abs() >= 1.0e36 || q2 >= 1.0e36 {
            return Err(LabError::NonFinite);
        }
        self.n += 1;
        self.sum += q.round() as i128;
        self.sum_sq += q2.round() as i128;
        Ok(())
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn estimate(&self) -> McEstimate {
        if self.n == 0 {
            return McEstimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                n: 0,
                ci99: (f64::NAN, f64::NAN),
            };
        }
        let n = self.n as f64;
        let mean = self.sum as f64 / FIXED_SCALE / n;
        let var = if self.n > 1 {
            ((self.sum_sq as f64 / FIXED_SCALE - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let stderr = (var / n).sqrt();
        McEstimate {
            mean,
            stderr,
            n: self.n,
            ci99: (mean - Z99 * stderr, mean + Z99 * stderr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KsReference {
    /// Exp(1)
    Exponential,
    /// density `ρ exp(−ρ²/2)`
    Rayleigh,
    /// Uniform(0, 1)
    Uniform,
    /// two-sample comparison
    Empirical,
}

impl KsReference {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            KsReference::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            KsReference::Rayleigh => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-0.5 * x * x).exp_m1()
                }
            }
            KsReference::Uniform => x.clamp(0.0, 1.0),
            KsReference::Empirical => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: u64,
    pub reference: KsReference,
}

/// Kolmogorov limiting survival function `P(K > x)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // theta-function form, converges fast for small x
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * PI * PI / (8.0 * x * x)).exp();
        }
        return (1.0 - (2.0 * PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn sorted_finite(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(LabError::NonFinite);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample test against a continuous reference law.
pub fn ks_test(samples: &[f64], reference: KsReference) -> Result<KsResult> {
    if samples.len() < 100 {
        return Err(LabError::TooFewSamples {
            need: 100,
            got: samples.len(),
        });
    }
    if reference == KsReference::Empirical {
        return Err(LabError::InvalidConfig(
            "one-sample test needs a continuous reference".into(),
        ));
    }
    let v = sorted_finite(samples)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = reference.cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n.sqrt() * d),
        n: v.len() as u64,
        reference,
    })
}

/// Two-sample test; `n` in the result is the effective size `n₁n₂/(n₁+n₂)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    for s in [a, b] {
        if s.len() < 100 {
            return Err(LabError::TooFewSamples {
                need: 100,
                got: s.len(),
            });
        }
    }
    let (x, y) = (sorted_finite(a)?, sorted_finite(b)?);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(ne.sqrt() * d),
        n: ne.round() as u64,
        reference: KsReference::Empirical,
    })
}

/// Sample Pearson correlation; zero if either side is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// A named test function of the features.
pub struct TestFunction<'a, F> {
    pub name: String,
    pub g: Box<dyn Fn(&F) -> f64 + Sync + 'a>,
}

impl<'a, F> TestFunction<'a, F> {
    pub fn new(name: impl Into<String>, g: impl Fn(&F) -> f64 + Sync + 'a) -> Self {
        TestFunction {
            name: name.into(),
            g: Box::new(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTest {
    /// `(test function, E[target·g], z-score)`
    pub moments: Vec<(String, McEstimate, f64)>,
    pub max_abs_z: f64,
}

/// z-scores of `E[target · g(features)] = 0` over a dictionary.
pub fn conditional_moment_test<F>(
    target: &[f64],
    features: &[F],
    dictionary: &[TestFunction<'_, F>],
) -> Result<MomentTest> {
    let n = target.len().min(features.len());
    if n < MIN_MOMENT_SAMPLES {
        return Err(LabError::TooFewSamples {
            need: MIN_MOMENT_SAMPLES,
            got: n,
        });
    }
    let mut moments = Vec::with_capacity(dictionary.len());
    let mut max_abs_z: f64 = 0.0;
    for tf in dictionary {
        let mut acc = Accumulator::default();
        let mut support = false;
        for (y, f) in target.iter().zip(features) {
            let g = (tf.g)(f);
            support |= g != 0.0;
            acc.push(y * g)?;
        }
        if !support {
            return Err(LabError::DegenerateFeature(tf.name.clone()));
        }
        let est = acc.estimate();
        let z = est.z_score(0.0);
        max_abs_z = max_abs_z.max(z.abs());
        moments.push((tf.name.clone(), est, z));
    }
    Ok(MomentTest { moments, max_abs_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp_samples(seed: u64, n: usize) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect()
    }

    #[test]
    fn estimate_basics() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-9);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.stderr - sd / 2.0).abs() < 1e-9);
        assert!((e.ci99.1 - e.mean - 2.576 * e.stderr).abs() < 1e-12);
        assert!(McEstimate::from_samples(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn shard_merge_is_partition_invariant(
            xs in proptest::collection::vec(-1e3f64..1e3, 1..200),
            cut in 0usize..200,
        ) {
            let cut = cut.min(xs.len());
            let whole = McEstimate::from_samples(&xs).unwrap();
            let mut a = Accumulator::default();
            let mut b = Accumulator::default();
            for &x in &xs[..cut] { a.push(x).unwrap(); }
            for &x in &xs[cut..] { b.push(x).unwrap(); }
            b.merge(&a);
            prop_assert_eq!(b.estimate(), whole);
        }
    }

    #[test]
    fn kolmogorov_survival_values() {
        // reference values of the Kolmogorov distribution
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 1e-3);
        assert!((kolmogorov_survival(0.5) - 0.9639).abs() < 1e-3);
        // both series agree where they meet
        let x: f64 = 1.0;
        let small = {
            let mut s = 0.0;
            for k in 1..=20 {
                let j = (2 * k - 1) as f64;
                s += (-j * j * PI * PI / (8.0 * x * x)).exp();
            }
            1.0 - (2.0 * PI).sqrt() / x * s
        };
        assert!((small - kolmogorov_survival(1.0)).abs() < 1e-12);
    }

    #[test]
    fn ks_calibration() {
        let passes = (0..100)
            .filter(|&s| {
                ks_test(&exp_samples(s, 2000), KsReference::Exponential)
                    .unwrap()
                    .p_value
                    > 0.01
            })
            .count();
        assert!(passes >= 95, "{passes}");
        let c = ks_test(&vec![0.5; 1000], KsReference::Exponential).unwrap();
        assert!(c.p_value < 1e-10);
        assert!(c.statistic <= 1.0);
        assert!(ks_test(&[1.0; 10], KsReference::Exponential).is_err());
    }

    #[test]
    fn two_sample() {
        let a = exp_samples(1, 5000);
        let b = exp_samples(2, 5000);
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &shifted).unwrap().p_value < 1e-6);
    }

    #[test]
    fn moment_dictionary() {
        let n = 20_000;
        let zero = vec![0.0; n];
        let feats: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let dict = vec![
            TestFunction::new("1", |_: &f64| 1.0),
            TestFunction::new("x", |x: &f64| *x),
        ];
        assert_eq!(
            conditional_moment_test(&zero, &feats, &dict)
                .unwrap()
                .max_abs_z,
            0.0
        );
        let noise: Vec<f64> = exp_samples(3, n).iter().map(|e| e - 1.0).collect();
        assert!(
            conditional_moment_test(&noise, &feats, &dict)
                .unwrap()
                .max_abs_z
                < 4.0
        );
        let biased: Vec<f64> = noise.iter().map(|e| e + 0.1).collect();
        assert!(
            conditional_moment_test(&biased, &feats, &dict)
                .unwrap()
                .max_abs_z
                > 5.0
        );
        let dead = vec![TestFunction::new("0", |_: &f64| 0.0)];
        assert!(matches!(
            conditional_moment_test(&noise, &feats, &dead),
            Err(LabError::DegenerateFeature(_))
        ));
        assert!(conditional_moment_test(&noise[..10], &feats[..10], &dict).is_err());
    }

    #[test]
    fn correlation_bounds() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        assert!((correlation(&x, &x) - 1.0).abs() < 1e-12);
        assert_eq!(correlation(&x, &[1.0; 100]), 0.0);
    }
}
