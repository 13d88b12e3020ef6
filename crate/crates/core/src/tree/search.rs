use super::azema::{azema_triple, expectation_with};
use super::enlargement::stopped_violation;
use super::{closing_martingale, DyadicTree, Martingale, RandomTime};
use crate::error::{LabError, Result};
use std::collections::BTreeSet;

/// Largest family the exhaustive enumerators will produce.
pub const FAMILY_CAP: usize = 1_000_000;

/// Terminal value of the Walsh martingale `Π_{i∈S} ε_i`, with step `i`
/// in `S` when bit `i − 1` of `mask` is set.
pub fn walsh_terminal(tree: &DyadicTree, mask: usize) -> Vec<f64> {
    (0..tree.path_count())
        .map(|p| {
            let neg = (1..=tree.steps())
                .filter(|&i| mask >> (i - 1) & 1 == 1 && tree.sign(p, i) < 0)
                .count();
            if neg % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// The `2^N − 1` centered Walsh martingales.
pub fn walsh_basis(tree: &DyadicTree) -> impl Iterator<Item = Martingale> + '_ {
    (1..tree.path_count()).map(move |mask| closing_martingale(tree, &walsh_terminal(tree, mask)))
}

/// Every assignment `paths → 1..=N`.
pub fn all_random_times(tree: &DyadicTree) -> Result<impl Iterator<Item = RandomTime> + '_> {
    let n = tree.steps();
    let paths = tree.path_count();
    let total = (n as f64).powi(paths as i32);
    if total > FAMILY_CAP as f64 {
        return Err(LabError::InvalidRandomTime(format!(
            "{total:e} random times exceed the enumeration cap"
        )));
    }
    let total = total as usize;
    Ok((0..total).map(move |mut code| {
        let values = (0..paths)
            .map(|_| {
                let v = code % n;
                code /= n;
                (v + 1) as u8
            })
            .collect();
        RandomTime::new(tree, values).expect("values in range")
    }))
}

fn stopping_count(n: usize, t: usize) -> f64 {
    if t == n {
        1.0
    } else if t == 0 {
        stopping_count(n, 1).powi(2)
    } else {
        1.0 + stopping_count(n, t + 1).powi(2)
    }
}

/// Assignments on the block of paths below one node at time `t`.
fn stopping_blocks(n: usize, t: usize) -> Vec<Vec<u8>> {
    let width = 1usize << (n - t);
    let mut out = Vec::new();
    if t >= 1 {
        out.push(vec![t as u8; width]);
    }
    if t < n {
        let child = stopping_blocks(n, t + 1);
        for l in &child {
            for r in &child {
                let mut v = l.clone();
                v.extend_from_slice(r);
                out.push(v);
            }
        }
    }
    out
}

pub fn all_stopping_times(tree: &DyadicTree) -> Result<Vec<RandomTime>> {
    let count = stopping_count(tree.steps(), 0);
    if count > FAMILY_CAP as f64 {
        return Err(LabError::InvalidRandomTime(format!(
            "{count:e} stopping times exceed the enumeration cap"
        )));
    }
    Ok(stopping_blocks(tree.steps(), 0)
        .into_iter()
        .map(|v| RandomTime::new(tree, v).expect("values in range"))
        .collect())
}

/// First and last visits to the running extremes and to each level set.
pub fn visit_family(tree: &DyadicTree) -> Vec<RandomTime> {
    let n = tree.steps() as i32;
    let mut out = BTreeSet::new();
    let extreme = |p: usize, t: usize, sign: i32| {
        let s = sign * tree.integer_walk(p, t);
        (1..=tree.steps()).all(|u| sign * tree.integer_walk(p, u) <= s)
    };
    for sign in [1, -1] {
        out.insert(
            RandomTime::first_in_set(tree, |p, t| extreme(p, t, sign))
                .values()
                .to_vec(),
        );
        out.insert(
            RandomTime::last_in_set(tree, |p, t| extreme(p, t, sign))
                .values()
                .to_vec(),
        );
    }
    for level in -n..=n {
        for cmp in [
            |s: i32, l: i32| s == l,
            |s: i32, l: i32| s >= l,
            |s: i32, l: i32| s <= l,
        ] {
            let pred = |p: usize, t: usize| cmp(tree.integer_walk(p, t), level);
            out.insert(RandomTime::first_in_set(tree, pred).values().to_vec());
            out.insert(RandomTime::last_in_set(tree, pred).values().to_vec());
        }
    }
    out.into_iter()
        .map(|v| RandomTime::new(tree, v).expect("values in range"))
        .collect()
}

/// `ρ = T` when the last coin is up, `T′` otherwise, for every ordered pair.
pub fn last_coin_mixtures(tree: &DyadicTree, times: &[RandomTime]) -> Vec<RandomTime> {
    let mut out = Vec::with_capacity(times.len() * times.len());
    for a in times {
        for b in times {
            let v = (0..tree.path_count())
                .map(|p| if p & 1 == 1 { a.at(p) } else { b.at(p) } as u8)
                .collect();
            out.push(RandomTime::new(tree, v).expect("values in range"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoStoppingTime {
    pub rho: RandomTime,
    pub is_stopping_time: bool,
    /// `max over the Walsh basis of |E[M_ρ] − M₀|`
    pub basis_defect: f64,
    /// `max over the Walsh basis of the F^ρ violation of M_{t∧ρ}`
    pub stopped_violation: f64,
}

/// Members of `family` with `A_N ≡ 1`, each checked against the Walsh basis.
pub fn pseudo_stopping_search<I>(tree: &DyadicTree, family: I) -> Vec<PseudoStoppingTime>
where
    I: IntoIterator<Item = RandomTime>,
{
    let basis: Vec<Martingale> = walsh_basis(tree).collect();
    let mut out = Vec::new();
    for rho in family {
        let triple = azema_triple(tree, &rho);
        if triple.a.terminal().iter().any(|a| (a - 1.0).abs() > 1e-13) {
            continue;
        }
        let mut basis_defect: f64 = 0.0;
        let mut violation: f64 = 0.0;
        for m in &basis {
            let e = expectation_with(tree, m, &rho, &triple);
            basis_defect = basis_defect.max((e.direct - m.initial()).abs());
            violation = violation.max(stopped_violation(tree, m, &rho));
        }
        out.push(PseudoStoppingTime {
            is_stopping_time: rho.is_stopping_time(tree),
            rho,
            basis_defect,
            stopped_violation: violation,
        });
    }
    out
}
