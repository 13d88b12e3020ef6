//! Exact Azéma triples, the three forms of T(M) and the Kunita–Watanabe
//! split on a small dyadic tree.
use stoplab::tree::{
    azema_triple, closing_martingale, expectation_at_rho, kunita_watanabe, s1_functional,
    DyadicTree, RandomTime,
};

fn main() -> stoplab::Result<()> {
    let tree = DyadicTree::new(6)?;
    let rho = RandomTime::last_max(&tree);
    let tr = azema_triple(&tree, &rho);
    println!("ρ = last time at the running maximum, N = {}", tree.steps());
    println!("invariant defects {:?}", tr.invariant_defects(&tree));

    let s = tree.walk();
    let sq: Vec<f64> = s.terminal().iter().map(|x| x * x * x).collect();
    for (name, m) in [
        ("S", s.clone()),
        ("E[S_N³ | F_t]", closing_martingale(&tree, &sq)),
    ] {
        let v = s1_functional(&tree, &m, &tr);
        let e = expectation_at_rho(&tree, &m, &rho);
        println!(
            "{name:>14}: T = {:+.6} (bracket) {:+.6} (μ form) {:+.6} (A form); E[M_ρ] − E[M_N] = {:+.6}",
            v.bracket,
            v.mu_form,
            v.a_form,
            e.direct - tree.mean(m.terminal())
        );
        let kw = kunita_watanabe(&tree, &m, &tr.mu);
        println!(
            "{:>14}  KW reconstruction error {:.1e}, membership {:+.6}",
            "",
            kw.reconstruction_error(&tree, &m, &tr.mu),
            kw.membership
        );
    }
    Ok(())
}
