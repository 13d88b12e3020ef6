//! Paths run to the first passage of 1: half the local time there is Exp(1).
use stoplab::brownian::scenario::{first_passage_batch, ScenarioConfig};
use stoplab::stats::{ks_test, KsReference, McEstimate};

fn main() -> stoplab::Result<()> {
    let cfg = ScenarioConfig {
        seed: 5,
        dt: 1e-3,
        n: 10_000,
    };
    let recs = first_passage_batch(&cfg)?;
    let censored = recs.iter().filter(|r| r.t1.is_none()).count();
    let a: Vec<f64> = recs
        .iter()
        .filter(|r| r.t1.is_some())
        .map(|r| 0.5 * r.local_time)
        .collect();
    let ks = ks_test(&a, KsReference::Exponential)?;
    let m = McEstimate::from_samples(&a)?;
    println!(
        "ℓ_T1 / 2: mean {:.4} ± {:.4}, KS p = {:.3}, censored {censored}",
        m.mean, m.stderr, ks.p_value
    );
    let early = recs
        .iter()
        .filter(|r| r.t1.is_some_and(|t| t <= 1.0))
        .count();
    println!(
        "P(T1 ≤ 1) ≈ {:.4} (exact 0.3173)",
        early as f64 / recs.len() as f64
    );
    Ok(())
}
