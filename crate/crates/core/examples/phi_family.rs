//! The martingales M^φ = Z φ̂(A) + (1 − Z) φ(A) over the function suite.
use stoplab::phi::{
    corimport_residual, expected_values, function_suite, m_phi, s1_gap, values_at_l,
    PhiMartingaleSpec,
};

fn main() -> stoplab::Result<()> {
    let grid: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10} {:>12}",
        "φ", "M(½, 1)", "E at L", "E at ∞", "s1 gap", "|φ̂ − φ|"
    );
    for phi in function_suite() {
        let spec = PhiMartingaleSpec::new(phi)?;
        let ev = expected_values(&spec)?;
        let gap = s1_gap(&spec)
            .map(|g| format!("{g:+.6}"))
            .unwrap_or_else(|_| "-".into());
        println!(
            "{:<10} {:>10.6} {:>10.6} {:>10.6} {:>10} {:>12.3e}",
            spec.name(),
            m_phi(&spec, 0.5, 1.0),
            ev.at_l,
            ev.at_infinity,
            gap,
            corimport_residual(&spec, &grid)
        );
    }
    let x = PhiMartingaleSpec::new(stoplab::laguerre::ScalarFunction::identity())?;
    let v = values_at_l(&x, 2.0);
    println!(
        "φ = x, A_L = 2: M_L = {}, E[φ(A_∞) | F_L] = {}",
        v.terminal, v.conditional
    );
    Ok(())
}
