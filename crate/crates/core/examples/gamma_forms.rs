//! Closed forms around γ, the last zero before 1.
use stoplab::gamma::{
    conditional_f_given_gamma, conditional_h, m_f_perp, n_h_at_gamma, theta, z_gamma,
};
use stoplab::laguerre::ScalarFunction;

fn main() -> stoplab::Result<()> {
    let u = ScalarFunction::new("u", |u| u);
    let (t, b) = (0.5, 0.4);
    println!("Z_t = P(γ > t | B_t = b) = {:.6}", z_gamma(b, t)?);
    println!("E[γ 1(γ>t) | F_t] = {:.6}", conditional_h(&u, t, b)?);
    for g in [0.2, 0.6] {
        println!(
            "γ = {g}: N^u at γ = {:.6} (1+γ)/2 = {:.6}",
            n_h_at_gamma(&u, g)?,
            0.5 * (1.0 + g)
        );
    }
    let sq = ScalarFunction::new("x^2", |x| x * x);
    println!(
        "E[B1² | F_γ] at γ = 0.3: {:.6}",
        conditional_f_given_gamma(&sq, 0.3)?
    );
    let one = ScalarFunction::constant(1.0);
    for b in [0.0, 0.5, 1.5] {
        let m = m_f_perp(&one, t, b, 0.2)?;
        println!(
            "f = 1, b = {b}: direct {:+.2e}, displayed sum {:+.6}, 1 − 2θ = {:+.6}",
            m.direct,
            m.decomposed,
            1.0 - 2.0 * theta(b / (1.0 - t).sqrt())
        );
    }
    Ok(())
}
