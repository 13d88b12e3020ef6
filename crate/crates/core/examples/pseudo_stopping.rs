//! Exhaustive search for pseudo-stopping times on a three-step tree.
use stoplab::tree::{all_random_times, pseudo_stopping_search, DyadicTree};

fn main() -> stoplab::Result<()> {
    let tree = DyadicTree::new(3)?;
    let found = pseudo_stopping_search(&tree, all_random_times(&tree)?);
    let proper: Vec<_> = found.iter().filter(|p| !p.is_stopping_time).collect();
    println!(
        "{} pseudo-stopping times, {} of them not stopping times",
        found.len(),
        proper.len()
    );
    if let Some(p) = proper.first() {
        println!("example ρ by path: {:?}", p.rho.values());
        println!(
            "max |E[M_ρ] − M_0| over the Walsh basis: {:.1e}",
            p.basis_defect
        );
    }
    Ok(())
}
