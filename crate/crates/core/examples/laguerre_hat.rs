//! Gauss–Laguerre rules, Laguerre expansions and the hat transform.
use stoplab::laguerre::{expand, hat_identity_defect, hat_transform, ScalarFunction};
use stoplab::quadrature::QuadratureRule;

fn main() -> stoplab::Result<()> {
    let rule = QuadratureRule::gauss_laguerre(32)?;
    let m3 = rule.sum(|x| x * x * x);
    println!(
        "32-point rule: {} nodes, exact to degree {}, ∫x³e^-x = {m3}",
        rule.len(),
        rule.exact_degree()
    );

    let phi = ScalarFunction::new("x^2", |x| x * x);
    let ex = expand(&phi, 4, &rule)?;
    let coeffs: Vec<String> = (0..=4)
        .map(|n| format!("{:.6}", ex.coefficient(n)))
        .collect();
    println!("x² in the Laguerre basis: [{}]", coeffs.join(", "));

    for phi in [
        ScalarFunction::identity(),
        ScalarFunction::new("exp(-x)", |x| (-x).exp()),
        ScalarFunction::step(1.0),
    ] {
        let hat = hat_transform(&phi)?;
        let grid = [0.5, 2.0, 4.0];
        let vals: Vec<String> = grid
            .iter()
            .map(|&x| format!("{:.6}", hat.eval(x)))
            .collect();
        let d = hat_identity_defect(&phi, &[0.5, 2.0, 4.0], 1e-4)?;
        println!(
            "hat[{}] at {grid:?} = [{}], |ψ − ψ' − φ| ≤ {d:.1e}",
            phi.name(),
            vals.join(", ")
        );
    }
    Ok(())
}
