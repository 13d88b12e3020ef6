//! A dense Brownian path with its hitting time, last zero, local time and
//! the λ process.
use stoplab::brownian::{simulate, PathConfig};

fn main() -> stoplab::Result<()> {
    let cfg = PathConfig {
        dt: 1e-4,
        seed: 7,
        ..PathConfig::default()
    };
    for id in 0..4 {
        let p = simulate(&cfg, id)?;
        let lam = p.lambda_process()?;
        println!(
            "path {id}: B1 = {:+.4}, T1 = {:?}, g1 = {:.4}, ℓ1 = {:.4} (Tanaka {:.4}), λ = {:.4}",
            p.values.last().unwrap(),
            p.hitting_time(1.0)?.time(),
            p.last_zero_before(1.0),
            p.bridge_local_time().last().unwrap(),
            p.local_time().last().unwrap(),
            lam.last().unwrap()
        );
    }
    Ok(())
}
