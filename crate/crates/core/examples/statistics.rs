//! Shard-invariant Monte Carlo estimates, KS tests and a moment dictionary.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stoplab::stats::{conditional_moment_test, ks_test, Accumulator, KsReference, TestFunction};

fn main() -> stoplab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..20_000)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();

    let mut whole = Accumulator::default();
    let mut shards = [(); 4].map(|_| Accumulator::default());
    for (i, &x) in xs.iter().enumerate() {
        whole.push(x)?;
        shards[i % 4].push(x)?;
    }
    let mut merged = Accumulator::default();
    shards.iter().for_each(|s| merged.merge(s));
    println!("whole {:?}", whole.estimate());
    println!(
        "merged shards identical: {}",
        whole.estimate() == merged.estimate()
    );

    let ks = ks_test(&xs, KsReference::Exponential)?;
    println!(
        "KS vs Exp(1): D = {:.4}, p = {:.3}",
        ks.statistic, ks.p_value
    );

    let feats: Vec<f64> = (0..xs.len()).map(|_| rng.random()).collect();
    let centred: Vec<f64> = xs.iter().map(|x| x - 1.0).collect();
    let dict = [
        TestFunction::new("1", |_: &f64| 1.0),
        TestFunction::new("u", |u: &f64| *u),
    ];
    let t = conditional_moment_test(&centred, &feats, &dict)?;
    println!("E[(X − 1) g(U)] = 0: max |z| = {:.2}", t.max_abs_z);
    Ok(())
}
