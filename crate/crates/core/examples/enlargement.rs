//! Drift corrections that turn M into a martingale of the progressively
//! enlarged filtration, under each discrete convention.
use stoplab::tree::{
    enlargement_residual, stopped_violation, Convention, DyadicTree, EnlargementMode, RandomTime,
};

fn main() -> stoplab::Result<()> {
    let tree = DyadicTree::new(7)?;
    let l = RandomTime::last_in_set(&tree, |p, t| tree.integer_walk(p, t) == 0);
    let m = tree.walk();
    println!("L = last zero of the walk, honest: {}", l.is_honest(&tree));
    println!(
        "no correction: violation {:.3e}",
        stopped_violation(&tree, &m, &l)
    );
    for c in Convention::all() {
        let s = enlargement_residual(&tree, &m, &l, EnlargementMode::Stopped, c)?;
        let h = enlargement_residual(&tree, &m, &l, EnlargementMode::Honest, c)?;
        println!(
            "{:<18} stopped {:.3e}  honest {:.3e}  skipped drift terms {}",
            c.label(),
            s.violation,
            h.violation,
            s.flagged + h.flagged
        );
    }
    Ok(())
}
