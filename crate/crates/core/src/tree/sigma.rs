use super::azema::{azema_triple, predictable_bracket};
use super::{closing_martingale, DyadicTree, Martingale, RandomTime};
use crate::error::{LabError, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaFlavor {
    /// `F_ρ`: atoms are `(ρ, prefix up to ρ)`.
    Optional,
    /// `F_{ρ−}`: atoms are `(ρ, prefix up to ρ − 1)`.
    Predictable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaFieldAtRho {
    pub flavor: SigmaFlavor,
    atom_of: Vec<usize>,
    atoms: Vec<Vec<usize>>,
}

impl SigmaFieldAtRho {
    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom_of(&self, path: usize) -> usize {
        self.atom_of[path]
    }

    /// `E[X | σ]` per path.
    pub fn conditional_expectation(&self, x: &[f64]) -> Vec<f64> {
        let means: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.iter().map(|&p| x[p]).sum::<f64>() / a.len() as f64)
            .collect();
        self.atom_of.iter().map(|&a| means[a]).collect()
    }
}

pub fn sigma_field_at_rho(
    tree: &DyadicTree,
    rho: &RandomTime,
    flavor: SigmaFlavor,
) -> SigmaFieldAtRho {
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut atoms: Vec<Vec<usize>> = Vec::new();
    let mut atom_of = Vec::with_capacity(tree.path_count());
    for p in 0..tree.path_count() {
        let r = rho.at(p);
        let depth = match flavor {
            SigmaFlavor::Optional => r,
            SigmaFlavor::Predictable => r - 1,
        };
        let key = (r, tree.node(p, depth));
        let id = *index.entry(key).or_insert_with(|| {
            atoms.push(Vec::new());
            atoms.len() - 1
        });
        atoms[id].push(p);
        atom_of.push(id);
    }
    SigmaFieldAtRho {
        flavor,
        atom_of,
        atoms,
    }
}

fn values_at(m: &Martingale, rho: &RandomTime) -> Vec<f64> {
    (0..rho.values().len())
        .map(|p| m.at(p, rho.at(p)))
        .collect()
}

/// `max |E[M_N | F_L] − M_L|`.
pub fn s2_defect(tree: &DyadicTree, m: &Martingale, l: &RandomTime) -> f64 {
    let sigma = sigma_field_at_rho(tree, l, SigmaFlavor::Optional);
    let cond = sigma.conditional_expectation(m.terminal());
    cond.iter()
        .zip(values_at(m, l))
        .map(|(c, v)| (c - v).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzemaYorOutcome {
    /// `max |M_L|`
    pub a: f64,
    /// `max |E[M_N | F_L]|`
    pub b: f64,
    /// Whether `a = 0 ⟺ b = 0` held at the given tolerance.
    pub equivalent: bool,
}

pub fn azema_yor_defect(
    tree: &DyadicTree,
    m: &Martingale,
    l: &RandomTime,
    tol: f64,
) -> Result<AzemaYorOutcome> {
    l.check_honest(tree)?;
    let a = values_at(m, l).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sigma = sigma_field_at_rho(tree, l, SigmaFlavor::Optional);
    let b = sigma
        .conditional_expectation(m.terminal())
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    Ok(AzemaYorOutcome {
        a,
        b,
        equivalent: (a <= tol) == (b <= tol),
    })
}

/// The martingale closed by `M_N − E[M_N | F_L]`.
pub fn corilortho_projection(tree: &DyadicTree, m: &Martingale, l: &RandomTime) -> Martingale {
    let sigma = sigma_field_at_rho(tree, l, SigmaFlavor::Optional);
    let cond = sigma.conditional_expectation(m.terminal());
    let x: Vec<f64> = m.terminal().iter().zip(&cond).map(|(a, b)| a - b).collect();
    closing_martingale(tree, &x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionUne {
    /// `max over F_L atoms of |E[Σ_{s>L} Δ⟨M,μ⟩_s / (1 − Z_{s−1}) | F_L]|`
    pub condition: f64,
    pub s2: f64,
    /// Whether `condition = 0 ⟺ s2 = 0` at the given tolerance.
    pub agree: bool,
}

pub fn resolution_une_defect(
    tree: &DyadicTree,
    m: &Martingale,
    l: &RandomTime,
    tol: f64,
) -> Result<ResolutionUne> {
    l.check_honest(tree)?;
    let n = tree.steps();
    let triple = azema_triple(tree, l);
    let bracket = predictable_bracket(tree, m, &triple.mu);
    let mut post = vec![0.0; tree.path_count()];
    for (p, v) in post.iter_mut().enumerate() {
        for s in l.at(p) + 1..=n {
            let d = bracket.at(p, s) - bracket.at(p, s - 1);
            let q = 1.0 - triple.z.at(p, s - 1);
            if q <= 0.0 {
                if d != 0.0 {
                    return Err(LabError::Degenerate { step: s });
                }
                continue;
            }
            *v += d / q;
        }
    }
    let sigma = sigma_field_at_rho(tree, l, SigmaFlavor::Optional);
    let condition = sigma
        .conditional_expectation(&post)
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let s2 = s2_defect(tree, m, l);
    Ok(ResolutionUne {
        condition,
        s2,
        agree: (condition <= tol) == (s2 <= tol),
    })
}

#[cfg(test)]
mod tests {
    use super::super::azema::s1_functional;
    use super::super::build_tree;
    use super::*;

    #[test]
    fn atoms_for_constant_times() {
        let tree = build_tree(4).unwrap();
        let full = sigma_field_at_rho(
            &tree,
            &RandomTime::constant(&tree, 4).unwrap(),
            SigmaFlavor::Optional,
        );
        assert_eq!(full.atoms().len(), 16);
        let first = sigma_field_at_rho(
            &tree,
            &RandomTime::constant(&tree, 1).unwrap(),
            SigmaFlavor::Optional,
        );
        assert_eq!(
            first.atoms(),
            &[(0..8).collect::<Vec<_>>(), (8..16).collect()]
        );
        let pred = sigma_field_at_rho(
            &tree,
            &RandomTime::constant(&tree, 1).unwrap(),
            SigmaFlavor::Predictable,
        );
        assert_eq!(pred.atoms().len(), 1);
    }

    #[test]
    fn honest_max_atoms_and_defects() {
        let tree = DyadicTree::with_scale(2, 1.0).unwrap();
        let l = RandomTime::last_max(&tree);
        let opt = sigma_field_at_rho(&tree, &l, SigmaFlavor::Optional);
        // (1, d) = {dd}, (2, du) = {du}, (1, u) = {ud}, (2, uu) = {uu}
        assert_eq!(opt.atoms(), &[vec![0], vec![1], vec![2], vec![3]]);
        let pred = sigma_field_at_rho(&tree, &l, SigmaFlavor::Predictable);
        // (1, ∅) = {dd, ud}, (2, d) = {du}, (2, u) = {uu}
        assert_eq!(pred.atoms(), &[vec![0, 2], vec![1], vec![3]]);

        let s = tree.walk();
        let d = s2_defect(&tree, &s, &l);
        assert_eq!(d, 1.0);
        let x = corilortho_projection(&tree, &s, &l);
        assert_eq!(s2_defect(&tree, &x, &l), 0.0);
        let r = resolution_une_defect(&tree, &s, &l, 1e-13).unwrap();
        assert!(r.condition > 0.1 && r.agree);
    }

    #[test]
    fn trivial_s2_cases() {
        let tree = build_tree(5).unwrap();
        let c = closing_martingale(&tree, &vec![-1.5; 32]);
        let l = RandomTime::last_max(&tree);
        assert_eq!(s2_defect(&tree, &c, &l), 0.0);
        let ay = azema_yor_defect(&tree, &c, &l, 1e-13).unwrap();
        assert_eq!((ay.a, ay.b), (1.5, 1.5));
        let stop = RandomTime::first_in_set(&tree, |p, t| tree.integer_walk(p, t) == 1);
        let x: Vec<f64> = (0..32).map(|p| (p as f64 * 0.7).cos()).collect();
        let m = closing_martingale(&tree, &x);
        assert!(s2_defect(&tree, &m, &stop) < 1e-15);
        let r = resolution_une_defect(&tree, &m, &stop, 1e-13).unwrap();
        assert!(r.condition < 1e-14 && r.s2 < 1e-14);
        let rc = resolution_une_defect(&tree, &c, &l, 1e-13).unwrap();
        assert!(rc.condition < 1e-15 && rc.s2 == 0.0);
    }

    #[test]
    fn projection_lands_in_s2_kernel_of_s1() {
        // s2_defect = 0 forces T = 0
        let tree = build_tree(7).unwrap();
        let l = RandomTime::last_in_set(&tree, |p, t| tree.integer_walk(p, t) <= 0);
        let x: Vec<f64> = (0..128).map(|p| ((p * 29) % 17) as f64 / 17.0).collect();
        let m = closing_martingale(&tree, &x);
        let y = corilortho_projection(&tree, &m, &l);
        let tr = azema_triple(&tree, &l);
        let ay = azema_yor_defect(&tree, &y, &l, 1e-13).unwrap();
        assert!(ay.b < 1e-14);
        if s2_defect(&tree, &y, &l) < 1e-13 {
            assert!(s1_functional(&tree, &y, &tr).value().abs() < 1e-13);
        }
    }

    #[test]
    fn non_honest_rejected() {
        let tree = build_tree(3).unwrap();
        let rho = RandomTime::from_fn(&tree, |p| if p & 1 == 1 { 1 } else { 2 }).unwrap();
        let s = tree.walk();
        assert!(azema_yor_defect(&tree, &s, &rho, 1e-13).is_err());
        assert!(resolution_une_defect(&tree, &s, &rho, 1e-13).is_err());
    }
}
