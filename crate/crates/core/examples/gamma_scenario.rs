//! Adaptive γ-scenario batch: λ_∞ against Exp(1) and the Imhof checks.
use stoplab::brownian::scenario::{gamma_batch, ScenarioConfig};
use stoplab::gamma::imhof_checks;
use stoplab::stats::{ks_test, KsReference, McEstimate};

fn main() -> stoplab::Result<()> {
    let cfg = ScenarioConfig {
        seed: 11,
        dt: 1e-3,
        n: 20_000,
    };
    let recs = gamma_batch(&cfg)?;
    let lam: Vec<f64> = recs.iter().map(|r| r.lambda_inf).collect();
    let ks = ks_test(&lam, KsReference::Exponential)?;
    let m = McEstimate::from_samples(&lam)?;
    println!(
        "λ_∞: mean {:.4} ± {:.4}, KS p = {:.3}",
        m.mean, m.stderr, ks.p_value
    );
    let g = McEstimate::from_samples(&recs.iter().map(|r| r.gamma).collect::<Vec<_>>())?;
    println!("γ: mean {:.4} (arcsine law: 0.5)", g.mean);
    let im = imhof_checks(&recs.iter().map(|r| (r.gamma, r.b_one)).collect::<Vec<_>>())?;
    println!(
        "m = |B1|/√(1−γ): Rayleigh KS p = {:.3}, E[m²] = {:.3}, max |corr| = {:.4}",
        im.ks.p_value, im.m_second_moment.mean, im.indep
    );
    Ok(())
}
