use super::azema::{azema_triple, optional_bracket, predictable_bracket};
use super::{AdaptedProcess, DyadicTree, Martingale, RandomTime};
use crate::error::Result;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnlargementMode {
    /// `M_{t∧ρ} − ∫_0^{t∧ρ} d⟨M,μ⟩_s / Z_{s−}`
    Stopped,
    /// `M_t − ∫_0^{t∧L} d⟨M,μ⟩_s / Z_{s−} + ∫_L^t d⟨M,μ⟩_s / (1 − Z_{s−})`
    Honest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BracketKind {
    /// `Σ E[ΔM ΔM′ | F_{s−1}]`
    Predictable,
    /// `Σ ΔM ΔM′`
    Optional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeftLimit {
    /// `Z_{s−} ↦ Z_{s−1}`
    Previous,
    /// `Z_{s−} ↦ Z_s`
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Convention {
    pub bracket: BracketKind,
    pub left_limit: LeftLimit,
}

impl Convention {
    pub const CANONICAL: Convention = Convention {
        bracket: BracketKind::Predictable,
        left_limit: LeftLimit::Previous,
    };

    pub fn all() -> [Convention; 4] {
        let mut out = [Convention::CANONICAL; 4];
        let mut i = 0;
        for bracket in [BracketKind::Predictable, BracketKind::Optional] {
            for left_limit in [LeftLimit::Previous, LeftLimit::Current] {
                out[i] = Convention {
                    bracket,
                    left_limit,
                };
                i += 1;
            }
        }
        out
    }

    pub fn label(&self) -> &'static str {
        match (self.bracket, self.left_limit) {
            (BracketKind::Predictable, LeftLimit::Previous) => "predictable/Z(s-1)",
            (BracketKind::Predictable, LeftLimit::Current) => "predictable/Z(s)",
            (BracketKind::Optional, LeftLimit::Previous) => "optional/Z(s-1)",
            (BracketKind::Optional, LeftLimit::Current) => "optional/Z(s)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnlargementOutcome {
    /// `M̃_t` per path, row-major `[path · (N+1) + t]`.
    pub residual: Vec<f64>,
    /// `max |E[ΔM̃_{t+1} | F^ρ_t]|`
    pub violation: f64,
    /// Drift terms skipped because their denominator vanished.
    pub flagged: usize,
}

/// Max over `F^ρ_t` atoms of the mean one-step increment of a path-indexed
/// process `x[path · (N+1) + t]`.
fn progressive_violation(tree: &DyadicTree, rho: &RandomTime, x: &[f64]) -> f64 {
    let n = tree.steps();
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let mut sums: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
        for p in 0..tree.path_count() {
            let r = rho.at(p);
            let key = (tree.node(p, t), if r <= t { r } else { 0 });
            let e = sums.entry(key).or_insert((0.0, 0));
            e.0 += x[p * (n + 1) + t + 1] - x[p * (n + 1) + t];
            e.1 += 1;
        }
        for (s, c) in sums.values() {
            worst = worst.max((s / *c as f64).abs());
        }
    }
    worst
}

/// Violation of the `F^ρ` martingale property by `M_{t∧ρ}` with no drift
/// removed.
pub fn stopped_violation(tree: &DyadicTree, m: &Martingale, rho: &RandomTime) -> f64 {
    let n = tree.steps();
    let mut x = vec![0.0; tree.path_count() * (n + 1)];
    for p in 0..tree.path_count() {
        for t in 0..=n {
            x[p * (n + 1) + t] = m.at(p, t.min(rho.at(p)));
        }
    }
    progressive_violation(tree, rho, &x)
}

pub fn enlargement_residual(
    tree: &DyadicTree,
    m: &Martingale,
    rho: &RandomTime,
    mode: EnlargementMode,
    convention: Convention,
) -> Result<EnlargementOutcome> {
    if mode == EnlargementMode::Honest {
        rho.check_honest(tree)?;
    }
    let n = tree.steps();
    let triple = azema_triple(tree, rho);
    let bracket: AdaptedProcess = match convention.bracket {
        BracketKind::Predictable => predictable_bracket(tree, m, &triple.mu),
        BracketKind::Optional => optional_bracket(tree, m, &triple.mu),
    };
    let mut residual = vec![0.0; tree.path_count() * (n + 1)];
    let mut flagged = 0;
    for p in 0..tree.path_count() {
        let r = rho.at(p);
        let row = &mut residual[p * (n + 1)..(p + 1) * (n + 1)];
        let mut drift = 0.0;
        row[0] = m.at(p, 0);
        for s in 1..=n {
            let d = bracket.at(p, s) - bracket.at(p, s - 1);
            let z = match convention.left_limit {
                LeftLimit::Previous => triple.z.at(p, s - 1),
                LeftLimit::Current => triple.z.at(p, s),
            };
            let before = r >= s;
            let (num, den) = if before { (d, z) } else { (-d, 1.0 - z) };
            let active = before || mode == EnlargementMode::Honest;
            if active {
                if den > 0.0 {
                    drift += num / den;
                } else {
                    flagged += 1;
                }
            }
            let level = match mode {
                EnlargementMode::Stopped => m.at(p, s.min(r)),
                EnlargementMode::Honest => m.at(p, s),
            };
            row[s] = level - drift;
        }
    }
    let violation = progressive_violation(tree, rho, &residual);
    Ok(EnlargementOutcome {
        residual,
        violation,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_tree, closing_martingale};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stopping_time_has_no_drift() {
        let tree = build_tree(2).unwrap();
        let t = RandomTime::first_in_set(&tree, |p, s| tree.integer_walk(p, s) == 1);
        let s = tree.walk();
        let out = enlargement_residual(
            &tree,
            &s,
            &t,
            EnlargementMode::Stopped,
            Convention::CANONICAL,
        )
        .unwrap();
        assert_eq!(out.violation, 0.0);
        for p in 0..4 {
            for u in 0..=2 {
                assert_eq!(out.residual[p * 3 + u], s.at(p, u.min(t.at(p))));
            }
        }
    }

    #[test]
    fn constant_martingale_has_no_violation() {
        let tree = build_tree(5).unwrap();
        let c = closing_martingale(&tree, &vec![4.0; 32]);
        let l = RandomTime::last_max(&tree);
        for conv in Convention::all() {
            for mode in [EnlargementMode::Stopped, EnlargementMode::Honest] {
                let out = enlargement_residual(&tree, &c, &l, mode, conv).unwrap();
                assert_eq!(out.violation, 0.0, "{} {mode:?}", conv.label());
            }
        }
    }

    #[test]
    fn canonical_convention_is_exact_on_honest_max() {
        let tree = build_tree(2).unwrap();
        let l = RandomTime::last_max(&tree);
        let s = tree.walk();
        for mode in [EnlargementMode::Stopped, EnlargementMode::Honest] {
            let out = enlargement_residual(&tree, &s, &l, mode, Convention::CANONICAL).unwrap();
            assert!(out.violation < 1e-15, "{mode:?}");
        }
        let alt = Convention {
            bracket: BracketKind::Predictable,
            left_limit: LeftLimit::Current,
        };
        let out = enlargement_residual(&tree, &s, &l, EnlargementMode::Honest, alt).unwrap();
        assert!(out.violation > 1e-3 || out.flagged > 0);
    }

    #[test]
    fn canonical_convention_exact_for_random_honest_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8 {
            let tree = build_tree(n).unwrap();
            let level = rng.random_range(-1..=1);
            let l = RandomTime::last_in_set(&tree, |p, t| tree.integer_walk(p, t) <= level);
            let x: Vec<f64> = (0..tree.path_count())
                .map(|_| rng.random::<f64>())
                .collect();
            let m = closing_martingale(&tree, &x);
            let out = enlargement_residual(
                &tree,
                &m,
                &l,
                EnlargementMode::Honest,
                Convention::CANONICAL,
            )
            .unwrap();
            assert!(out.violation < 1e-13, "n={n} {}", out.violation);
            let st = enlargement_residual(
                &tree,
                &m,
                &l,
                EnlargementMode::Stopped,
                Convention::CANONICAL,
            )
            .unwrap();
            assert!(st.violation < 1e-13);
        }
    }

    #[test]
    fn stopped_mode_works_for_any_random_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = build_tree(6).unwrap();
        let rho = RandomTime::from_fn(&tree, |_| rng.random_range(1..=6)).unwrap();
        let s = tree.walk();
        let out = enlargement_residual(
            &tree,
            &s,
            &rho,
            EnlargementMode::Stopped,
            Convention::CANONICAL,
        )
        .unwrap();
        assert!(out.violation < 1e-13);
        assert!(enlargement_residual(
            &tree,
            &s,
            &rho,
            EnlargementMode::Honest,
            Convention::CANONICAL
        )
        .is_err());
    }

    #[test]
    fn stopped_martingale_violation_detects_non_stopping_time() {
        let tree = build_tree(2).unwrap();
        let s = tree.walk();
        assert!(stopped_violation(&tree, &s, &RandomTime::last_max(&tree)) > 0.1);
        let t = RandomTime::constant(&tree, 1).unwrap();
        assert_eq!(stopped_violation(&tree, &s, &t), 0.0);
    }
}
