use super::{Experiment, Lab, Relation};
use crate::brownian::scenario::GammaRecord;
use crate::error::Result;
use crate::gamma::{
    conditional_f_given_gamma, conditional_h, h_martingale, imhof_checks, m_f_perp, n_h_at_gamma,
    theta,
};
use crate::laguerre::ScalarFunction;
use crate::phi::{alpha1, PhiMartingaleSpec};
use crate::stats::{conditional_moment_test, ks_test, KsReference, McEstimate, TestFunction};
use std::f64::consts::PI;

/// Moment and law thresholds.
const Z_MAX: f64 = 3.0;
const P_MIN: f64 = 0.01;
/// Accuracy of quadrature-oracle constants.
const ALPHA_TOL: f64 = 1e-9;

fn estimate(xs: &[f64]) -> Result<McEstimate> {
    McEstimate::from_samples(xs)
}

/// Dictionary `{1, γ, γ²}` on γ-scenario records.
fn gamma_polynomials<'a>() -> Vec<TestFunction<'a, f64>> {
    vec![
        TestFunction::new("1", |_| 1.0),
        TestFunction::new("gamma", |g: &f64| *g),
        TestFunction::new("gamma^2", |g: &f64| g * g),
    ]
}

pub(super) fn e4(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    e.param(
        "first_passage_sampler",
        "adaptive, horizon doubling, bridge local time",
    );
    let fp = lab.passage_records()?;
    let censored = fp.iter().filter(|r| r.t1.is_none()).count();
    let half_l: Vec<f64> = fp
        .iter()
        .filter(|r| r.t1.is_some())
        .map(|r| 0.5 * r.local_time)
        .collect();
    let half_tanaka: Vec<f64> = fp
        .iter()
        .filter(|r| r.t1.is_some())
        .map(|r| 0.5 * r.local_time_tanaka)
        .collect();
    e.value("first_passage.censored", censored as f64);
    let k = ks_test(&half_l, KsReference::Exponential)?;
    let m = estimate(&half_l)?;
    e.check("half_local_time.ks_p", k.p_value, Relation::Gt, P_MIN);
    e.check(
        "half_local_time.mean_error",
        (m.mean - 1.0).abs(),
        Relation::Lt,
        0.02,
    );
    e.ks("half_local_time", k);
    e.estimate("half_local_time", m);
    let kt = ks_test(&half_tanaka, KsReference::Exponential)?;
    e.value("half_local_time_tanaka.ks_p", kt.p_value);
    e.estimate("half_local_time_tanaka", estimate(&half_tanaka)?);

    let g = lab.gamma_records()?;
    let lam: Vec<f64> = g.iter().map(|r| r.lambda_inf).collect();
    let k = ks_test(&lam, KsReference::Exponential)?;
    let m = estimate(&lam)?;
    e.check("lambda_inf.ks_p", k.p_value, Relation::Gt, P_MIN);
    e.check(
        "lambda_inf.mean_error",
        (m.mean - 1.0).abs(),
        Relation::Lt,
        0.02,
    );
    e.ks("lambda_inf", k);
    e.estimate("lambda_inf", m);
    let fine: Vec<f64> = fp.iter().map(|r| r.fine_steps as f64).collect();
    e.estimate("first_passage.fine_steps", estimate(&fine)?);
    Ok(e.settle())
}

pub(super) fn e5(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    e.param("A_infinity", "half the local time at T1");
    e.param(
        "M_rho",
        "phi_hat(A) at the last zero before T1, where Z = 1 - B+ equals 1",
    );
    let fp = lab.passage_records()?;
    let a: Vec<f64> = fp
        .iter()
        .filter(|r| r.t1.is_some())
        .map(|r| 0.5 * r.local_time)
        .collect();
    let gap_of = |spec: &PhiMartingaleSpec| -> Result<McEstimate> {
        let gaps: Vec<f64> = a
            .iter()
            .map(|&x| spec.phi_hat.eval(x) - spec.phi.eval(x))
            .collect();
        estimate(&gaps)
    };
    for n in [0usize, 2, 3] {
        let spec = PhiMartingaleSpec::new(ScalarFunction::laguerre(n))?;
        let m = gap_of(&spec)?;
        e.check(
            format!("L{n}.gap_z"),
            m.z_score(0.0).abs(),
            Relation::Lt,
            Z_MAX,
        );
        e.estimate(format!("L{n}.gap"), m);
    }
    let spec = PhiMartingaleSpec::new(ScalarFunction::laguerre(1))?;
    let m = gap_of(&spec)?;
    e.check("L1.gap_error", (m.mean + 1.0).abs(), Relation::Lt, 0.03);
    e.estimate("L1.gap", m);
    for phi in [
        ScalarFunction::identity(),
        ScalarFunction::new("x^2", |x| x * x),
        ScalarFunction::new("exp(-x)", |x| (-x).exp()),
    ] {
        let spec = PhiMartingaleSpec::new(phi)?;
        let a1 = alpha1(&spec)?;
        let m = gap_of(&spec)?;
        let name = spec.name().to_string();
        e.value(format!("{name}.alpha1"), a1);
        // α₁ carries the quadrature tolerance; x has a zero-variance gap
        let bound = Z_MAX * m.stderr + ALPHA_TOL;
        e.check(
            format!("{name}.|gap+alpha1|"),
            (m.mean + a1).abs(),
            Relation::Le,
            bound,
        );
        e.estimate(format!("{name}.gap"), m);
    }
    Ok(e.settle())
}

/// Equal-width γ bins over `[0, 1]`.
const GAMMA_BINS: usize = 5;

pub(super) fn e6(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    let g = lab.gamma_records()?;
    let gammas: Vec<f64> = g.iter().map(|r| r.gamma).collect();

    let odd: Vec<f64> = g.iter().map(|r| r.b_one).collect();
    let mut dict = gamma_polynomials();
    dict.push(TestFunction::new("1(gamma<=1/2)", |g: &f64| {
        f64::from(u8::from(*g <= 0.5))
    }));
    e.param("odd.dictionary", "1, gamma, gamma^2, 1(gamma<=1/2)");
    let t = conditional_moment_test(&odd, &gammas, &dict)?;
    e.check("odd.max_z", t.max_abs_z, Relation::Lt, Z_MAX);
    for (name, est, _) in &t.moments {
        e.estimate(format!("odd.E[B1*{name}]"), *est);
    }

    let sq = ScalarFunction::new("x^2", |x| x * x);
    let cf: Vec<f64> = gammas
        .iter()
        .map(|&g| conditional_f_given_gamma(&sq, g))
        .collect::<Result<_>>()?;
    let closed = cf
        .iter()
        .zip(&gammas)
        .map(|(c, g)| (c - 2.0 * (1.0 - g)).abs())
        .fold(0.0, f64::max);
    e.check("even.quadrature_vs_2(1-gamma)", closed, Relation::Lt, 1e-8);
    let m = estimate(&cf)?;
    e.check("even.mean_error", (m.mean - 1.0).abs(), Relation::Lt, 0.02);
    e.estimate("even.E[f(B1)|F_gamma]", m);
    e.param("even.bins", format!("{GAMMA_BINS} equal gamma bins"));
    let mut worst: f64 = 0.0;
    for b in 0..GAMMA_BINS {
        let (lo, hi) = (
            b as f64 / GAMMA_BINS as f64,
            (b + 1) as f64 / GAMMA_BINS as f64,
        );
        let d: Vec<f64> = g
            .iter()
            .zip(&cf)
            .filter(|(r, _)| r.gamma >= lo && (r.gamma < hi || b + 1 == GAMMA_BINS))
            .map(|(r, c)| r.b_one * r.b_one - c)
            .collect();
        let est = estimate(&d)?;
        worst = worst.max(est.z_score(0.0).abs());
        e.estimate(format!("even.bin{b}.B1^2-closed_form"), est);
    }
    e.check("even.max_bin_z", worst, Relation::Lt, Z_MAX);
    Ok(e.settle())
}

/// `(t, b)` grid of the discrepancy surface.
const SURFACE_T: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const SURFACE_B: [f64; 6] = [-1.5, -0.5, 0.0, 0.3, 1.0, 2.0];

pub(super) fn e7(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    let g = lab.gamma_records()?;
    let sq = ScalarFunction::new("x^2", |x| x * x);
    let gammas: Vec<f64> = g.iter().map(|r| r.gamma).collect();
    let direct: Vec<f64> = g
        .iter()
        .map(|r| Ok(r.b_one * r.b_one - conditional_f_given_gamma(&sq, r.gamma)?))
        .collect::<Result<_>>()?;
    e.param("s2.f", "x^2");
    e.param(
        "s2.value",
        "terminal direct value f(B1) - E[f(B1) | F_gamma]",
    );
    e.param("s2.dictionary", "1, gamma, gamma^2");
    let t = conditional_moment_test(&direct, &gammas, &gamma_polynomials())?;
    e.check("s2.max_z", t.max_abs_z, Relation::Lt, Z_MAX);
    for (name, est, _) in &t.moments {
        e.estimate(format!("s2.E[M*{name}]"), *est);
    }

    e.param("surface.t", format!("{SURFACE_T:?}"));
    e.param("surface.b", format!("{SURFACE_B:?}"));
    e.param("surface.gamma_t", "t/2");
    let one = ScalarFunction::constant(1.0);
    let (mut worst, mut direct_one) = (0.0f64, 0.0f64);
    for &t in &SURFACE_T {
        for &b in &SURFACE_B {
            let m = m_f_perp(&one, t, b, 0.5 * t)?;
            let want = 1.0 - 2.0 * theta(b.abs() / (1.0 - t).sqrt());
            worst = worst.max((m.discrepancy() - want).abs());
            direct_one = direct_one.max(m.direct.abs());
            let m2 = m_f_perp(&sq, t, b, 0.5 * t)?;
            e.value(format!("x^2.discrepancy(t={t},b={b})"), m2.discrepancy());
        }
    }
    e.check("const.discrepancy_vs_1-2theta", worst, Relation::Lt, 1e-6);
    e.value("const.max_abs_direct", direct_one);
    e.note(
        "for f = 1 the displayed M^{f,1} - M^{f,2} - M^{f,3} equals 1 - 2 theta(|b|/sqrt(1-t)) while the direct value is 0; \
         a prefactor 1 - Z_t instead of Z_t on the second term would remove the gap",
    );
    Ok(e.settle_observed())
}

pub(super) fn e8(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    e.param("h", "u");
    let g = lab.gamma_records()?;
    let h = ScalarFunction::new("u", |u| u);
    let n_gamma: Vec<f64> = g
        .iter()
        .map(|r| n_h_at_gamma(&h, r.gamma))
        .collect::<Result<_>>()?;
    let closed = n_gamma
        .iter()
        .zip(g)
        .map(|(v, r)| (v - 0.5 * (1.0 + r.gamma)).abs())
        .fold(0.0, f64::max);
    e.check("N_gamma_vs_(1+gamma)/2", closed, Relation::Lt, 1e-8);
    let mn = estimate(&n_gamma)?;
    let mh = estimate(&g.iter().map(|r| r.gamma).collect::<Vec<_>>())?;
    e.check(
        "E[N_gamma].error",
        (mn.mean - 0.75).abs(),
        Relation::Lt,
        0.01,
    );
    e.check(
        "E[h(gamma)].error",
        (mh.mean - 0.5).abs(),
        Relation::Lt,
        0.01,
    );
    e.estimate("N_gamma", mn);
    e.estimate("h(gamma)", mh);
    let diff: Vec<f64> = n_gamma.iter().zip(g).map(|(v, r)| v - r.gamma).collect();
    let d = estimate(&diff)?;
    e.value("gap_z", d.z_score(0.0));
    e.estimate("N_gamma-h(gamma)", d);
    e.note("E[N^h_gamma] differs from E[h(gamma)]: N^h stopped at gamma does not recover h(gamma)");
    Ok(e.settle())
}

pub(super) fn e9(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    let g = lab.gamma_records()?;
    type Weight = (&'static str, fn(f64) -> f64);
    let xs: [Weight; 2] = [("1", |_| 1.0), ("cos(2 pi g)", |g| (2.0 * PI * g).cos())];
    e.param("x", "1, cos(2 pi g)");
    e.param("T", "first passage of 1");
    for (name, x) in xs {
        let d: Vec<f64> = g
            .iter()
            .map(|r| x(r.g_stopped[1]) * r.b_stopped[1] - x(r.g_stopped[0]) * r.b_stopped[0])
            .collect();
        let m = estimate(&d)?;
        e.check(
            format!("x={name}.E[X1-X_half]_z"),
            m.z_score(0.0).abs(),
            Relation::Lt,
            Z_MAX,
        );
        e.estimate(format!("x={name}.X1-X_half"), m);
    }
    let band = lab.config.scenario().zero_band();
    let within = g.iter().filter(|r| r.stopped_zero_gap <= band).count();
    e.value(
        "last_zero_step_within_band_fraction",
        within as f64 / g.len() as f64,
    );
    e.note("B vanishes at the located last zero by construction; the fraction above measures how often a grid endpoint of its step lies in the zero band");
    Ok(e.settle())
}

pub(super) fn e11(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    let g = lab.gamma_records()?;
    let s: Vec<(f64, f64)> = g.iter().map(|r| (r.gamma, r.b_one)).collect();
    let c = imhof_checks(&s)?;
    let bound = 3.0 / (s.len() as f64).sqrt();
    e.check("rayleigh.ks_p", c.ks.p_value, Relation::Gt, P_MIN);
    e.check(
        "|corr(m, gamma)|",
        c.corr_m_gamma.abs(),
        Relation::Lt,
        bound,
    );
    e.check(
        "|corr(m, sgn B1)|",
        c.corr_m_sign.abs(),
        Relation::Lt,
        bound,
    );
    e.check(
        "|corr(sgn B1, gamma)|",
        c.corr_sign_gamma.abs(),
        Relation::Lt,
        bound,
    );
    e.ks("m", c.ks);
    e.value("indep", c.indep);
    e.estimate("m^2", c.m_second_moment);
    Ok(e.settle())
}

/// `|B_{1/2}|` bins of the propangulaire dictionary.
const B_BINS: [(f64, f64); 3] = [(0.0, 0.3), (0.3, 0.8), (0.8, f64::INFINITY)];

pub(super) fn e12(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    let g = lab.gamma_records()?;
    let hs = [
        ScalarFunction::constant(1.0),
        ScalarFunction::new("u", |u| u),
        ScalarFunction::new("u^2", |u| u * u),
        ScalarFunction::step(0.75),
    ];
    e.param("t", 0.5);
    e.param("dictionary", format!("|B_t| bins {B_BINS:?}"));
    let dict: Vec<TestFunction<'_, f64>> = B_BINS
        .iter()
        .map(|&(lo, hi)| {
            TestFunction::new(format!("{lo}<=|B|<{hi}"), move |b: &f64| {
                f64::from(u8::from(b.abs() >= lo && b.abs() < hi))
            })
        })
        .collect();
    let bs: Vec<f64> = g.iter().map(|r| r.b[1]).collect();
    for (j, h) in hs.iter().enumerate() {
        let d: Vec<f64> = g
            .iter()
            .map(|r| Ok(r.h_integrals[j] - conditional_h(h, 0.5, r.b[1])?))
            .collect::<Result<_>>()?;
        let t = conditional_moment_test(&d, &bs, &dict)?;
        let key = format!("h={}", h.name());
        if h.breakpoints().is_empty() {
            e.check(format!("{key}.max_z"), t.max_abs_z, Relation::Lt, Z_MAX);
        } else {
            e.value(format!("{key}.max_z"), t.max_abs_z);
            e.note(format!(
                "discontinuous h = {}: max z {:.2}, recorded without a verdict",
                h.name(),
                t.max_abs_z
            ));
        }
        for (name, est, _) in &t.moments {
            e.estimate(format!("{key}.{name}"), *est);
        }
    }
    drift_checks(g, &hs[1..3], &mut e)?;
    Ok(e.settle())
}

/// `E[N^h_{t₂} − N^h_{t₁}] = 0` along the checkpoints.
fn drift_checks(g: &[GammaRecord], hs: &[ScalarFunction], e: &mut Experiment) -> Result<()> {
    use crate::brownian::scenario::CHECKPOINTS;
    for h in hs {
        let vals: Vec<[f64; 3]> = g
            .iter()
            .map(|r| {
                let mut v = [0.0; 3];
                for i in 0..3 {
                    v[i] = h_martingale(h, CHECKPOINTS[i], r.b[i], r.last_zero[i])?;
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        for (i, j) in [(0, 1), (1, 2)] {
            let d: Vec<f64> = vals.iter().map(|v| v[j] - v[i]).collect();
            let m = estimate(&d)?;
            let key = format!("h={}.N({})-N({})", h.name(), CHECKPOINTS[j], CHECKPOINTS[i]);
            e.check(
                format!("{key}_z"),
                m.z_score(0.0).abs(),
                Relation::Lt,
                Z_MAX,
            );
            e.estimate(key, m);
        }
    }
    Ok(())
}
