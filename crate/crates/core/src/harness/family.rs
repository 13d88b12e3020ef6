use super::{Experiment, Lab, Relation};
use crate::brownian::scenario::{GammaRecord, CHECKPOINTS};
use crate::error::Result;
use crate::gamma::{theta, z_gamma};
use crate::laguerre::ScalarFunction;
use crate::phi::{
    alpha1, corimport_residual, expected_values, function_suite, gamma2_cross_check, is_constant,
    m_phi, s1_gap, PhiMartingaleSpec,
};
use crate::stats::McEstimate;

const Z_MAX: f64 = 3.0;
/// Share of paths the pathwise grid checks must cover.
const PATH_SHARE: f64 = 0.99;

/// `Z` at the right end of the step holding `γ`; zero at `t = 1` off the
/// axis.
fn z_after(r: &GammaRecord) -> Result<f64> {
    if r.t_after_gamma < 1.0 {
        z_gamma(r.b_after_gamma, r.t_after_gamma)
    } else {
        Ok(if r.b_after_gamma == 0.0 { 1.0 } else { 0.0 })
    }
}

/// `1 − Z` allowed by a zero band of `2√dt` at time `t`.
fn grid_tolerance(t: f64, dt: f64) -> f64 {
    if t < 1.0 {
        1.0 - theta(2.0 * dt.sqrt() / (1.0 - t).sqrt())
    } else {
        1.0
    }
}

pub(super) fn e10(lab: &Lab, mut e: Experiment) -> Result<Experiment> {
    lab.scenario_params(&mut e);
    e.param(
        "suite",
        function_suite()
            .iter()
            .map(|f| f.name().to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    e.param("Z, A", "z_gamma(B_t, t), lambda_t");
    e.param("corimport_grid", "[0, 5] step 0.01");
    let g = lab.gamma_records()?;
    let dt = lab.config.dt;
    let grid: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
    let cp = CHECKPOINTS.len() - 1;
    let (mut const_res, mut nonconst_res) = (0.0f64, f64::INFINITY);
    let mut worst_share: f64 = 1.0;
    let mut worst_gap: f64 = 0.0;
    for phi in function_suite() {
        let spec = PhiMartingaleSpec::new(phi.clone())?;
        let name = spec.name().to_string();
        let res = corimport_residual(&spec, &grid);
        e.value(format!("{name}.corimport_residual"), res);
        if is_constant(&phi) {
            const_res = const_res.max(res);
            continue;
        }
        nonconst_res = nonconst_res.min(res);

        if spec.integrability.is_square_integrable() {
            worst_gap = worst_gap.max((s1_gap(&spec)? + alpha1(&spec)?).abs());
        }

        // E[M_{3/4}] = M_0 = φ̂(0)
        let m0 = spec.phi_hat.eval(0.0);
        let d: Vec<f64> = g
            .iter()
            .map(|r| Ok(m_phi(&spec, z_gamma(r.b[cp], CHECKPOINTS[cp])?, r.lambda[cp]) - m0))
            .collect::<Result<_>>()?;
        let m = McEstimate::from_samples(&d)?;
        e.check(
            format!("{name}.drift_z"),
            m.z_score(0.0).abs(),
            Relation::Lt,
            Z_MAX,
        );
        e.estimate(format!("{name}.M({})-M(0)", CHECKPOINTS[cp]), m);

        // M^φ just after γ against φ̂(λ_γ)
        let mut ok = 0usize;
        for r in g {
            let a = r.lambda_inf;
            let hat = spec.phi_hat.eval(a);
            let scale = (hat - spec.phi.eval(a)).abs().max(1.0);
            let tol = grid_tolerance(r.t_after_gamma, dt);
            let dev = (m_phi(&spec, z_after(r)?, a) - hat).abs();
            ok += usize::from(dev <= 10.0 * tol * scale);
        }
        let share = ok as f64 / g.len() as f64;
        e.value(format!("{name}.at_gamma_share"), share);
        worst_share = worst_share.min(share);
    }
    e.check("corimport.constants", const_res, Relation::Lt, 1e-10);
    e.check(
        "corimport.non_constants_min",
        nonconst_res,
        Relation::Ge,
        0.4,
    );
    e.check("at_gamma.min_share", worst_share, Relation::Ge, PATH_SHARE);
    e.check("s1_gap_plus_alpha1", worst_gap, Relation::Lt, 1e-9);

    // φ(x) = x: expected values, supremum and H¹ norm
    let spec = PhiMartingaleSpec::new(ScalarFunction::identity())?;
    let ev = expected_values(&spec)?;
    e.value("x.expected_at_l", ev.at_l);
    e.value("x.expected_at_infinity", ev.at_infinity);
    let at_l: Vec<f64> = g.iter().map(|r| spec.phi_hat.eval(r.lambda_inf)).collect();
    let at_inf: Vec<f64> = g.iter().map(|r| spec.phi.eval(r.lambda_inf)).collect();
    let (ml, mi) = (
        McEstimate::from_samples(&at_l)?,
        McEstimate::from_samples(&at_inf)?,
    );
    e.check("x.at_l_z", ml.z_score(ev.at_l).abs(), Relation::Lt, Z_MAX);
    e.check(
        "x.at_infinity_z",
        mi.z_score(ev.at_infinity).abs(),
        Relation::Lt,
        Z_MAX,
    );
    e.estimate("x.M_L", ml);
    e.estimate("x.M_infinity", mi);
    e.estimate(
        "x.gamma2_cross_check",
        gamma2_cross_check(&spec, g.len(), 0x5eed)?,
    );

    let within = g.iter().filter(|r| r.sup_ratio <= 5.0).count();
    e.param("supremum.tolerance", "5 grid tolerances on zero steps");
    e.check(
        "x.supremum_share",
        within as f64 / g.len() as f64,
        Relation::Ge,
        PATH_SHARE,
    );
    let sup: Vec<f64> = g.iter().map(|r| r.sup_m).collect();
    let ms = McEstimate::from_samples(&sup)?;
    e.check(
        "x.h1_norm_z",
        ms.z_score(ev.at_l).abs(),
        Relation::Lt,
        Z_MAX,
    );
    e.estimate("x.sup_M", ms);
    Ok(e.settle())
}
