//! Runs registry entries through the library and prints the CSV report.
//! `cargo run --release --example run_experiment -- E8 E11`
use stoplab::harness::{report_csv, Lab, LabConfig, Report};

fn main() -> stoplab::Result<()> {
    let ids: Vec<String> = std::env::args().skip(1).collect();
    let ids = if ids.is_empty() {
        vec!["E2".to_string(), "E14".to_string()]
    } else {
        ids
    };
    let config = LabConfig {
        n: 20_000,
        dt: 1e-3,
        tree_steps: 8,
        ..LabConfig::default()
    };
    let lab = Lab::new(config.clone())?;
    let experiments = ids
        .iter()
        .map(|id| lab.run(id))
        .collect::<stoplab::Result<Vec<_>>>()?;
    for e in &experiments {
        eprintln!("{} [{}] {}", e.id, e.anchor, e.verdict.as_str());
    }
    print!("{}", report_csv(&Report::new(&config, experiments)));
    Ok(())
}
