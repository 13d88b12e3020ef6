//! Exact finite filtrations: the dyadic random-walk tree.
//!
//! Path `p ∈ 0..2^N` encodes its coin flips in binary, most significant bit
//! first, so the `F_t` atom containing `p` is the node `p >> (N − t)`.
//! Every conditional expectation here is an exact average over a contiguous
//! block of paths.

mod azema;
mod enlargement;
mod search;
mod sigma;

pub use azema::{
    azema_triple, expectation_at_rho, expectation_with, kunita_watanabe, optional_bracket,
    pair_check, predictable_bracket, s1_functional, AzemaTriple, KwDecomposition, PairCheck,
    RhoExpectation, S1Value,
};
pub use enlargement::{
    enlargement_residual, stopped_violation, BracketKind, Convention, EnlargementMode,
    EnlargementOutcome, LeftLimit,
};
pub use search::{
    all_random_times, all_stopping_times, last_coin_mixtures, pseudo_stopping_search, visit_family,
    walsh_basis, walsh_terminal, PseudoStoppingTime, FAMILY_CAP,
};
pub use sigma::{
    azema_yor_defect, corilortho_projection, resolution_une_defect, s2_defect, sigma_field_at_rho,
    AzemaYorOutcome, ResolutionUne, SigmaFieldAtRho, SigmaFlavor,
};

use crate::error::{LabError, Result};
use std::ops::Range;

/// Largest supported number of steps.
pub const DEFAULT_TREE_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicTree {
    steps: usize,
    scale: f64,
}

/// Tree with `N` steps of size `1/√N`.
pub fn build_tree(steps: usize) -> Result<DyadicTree> {
    DyadicTree::new(steps)
}

impl DyadicTree {
    pub fn new(steps: usize) -> Result<Self> {
        DyadicTree::with_scale(steps, 1.0 / (steps.max(1) as f64).sqrt())
    }

    pub fn with_scale(steps: usize, scale: f64) -> Result<Self> {
        if steps == 0 || steps > DEFAULT_TREE_CAP {
            return Err(LabError::TreeSize {
                steps,
                cap: DEFAULT_TREE_CAP,
            });
        }
        Ok(DyadicTree { steps, scale })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn path_count(&self) -> usize {
        1 << self.steps
    }

    pub fn probability(&self) -> f64 {
        1.0 / self.path_count() as f64
    }

    #[inline]
    pub fn node(&self, path: usize, t: usize) -> usize {
        path >> (self.steps - t)
    }

    /// Paths passing through `node` at time `t`.
    #[inline]
    pub fn paths_through(&self, t: usize, node: usize) -> Range<usize> {
        let w = self.steps - t;
        (node << w)..((node + 1) << w)
    }

    /// `±1` for step `i ∈ 1..=N`.
    #[inline]
    pub fn sign(&self, path: usize, i: usize) -> i32 {
        if (path >> (self.steps - i)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Walk position in units of the step size.
    pub fn integer_walk(&self, path: usize, t: usize) -> i32 {
        let ups = (self.node(path, t) as u32).count_ones() as i32;
        2 * ups - t as i32
    }

    /// `S_t = scale · (ups − downs)`.
    pub fn walk(&self) -> Martingale {
        Martingale(AdaptedProcess::from_fn(self.steps, |t, node| {
            self.scale * (2 * (node as u32).count_ones() as i32 - t as i32) as f64
        }))
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.path_count());
        x.iter().sum::<f64>() * self.probability()
    }

    /// `E[X | F_t]` as node values.
    pub fn conditional(&self, x: &[f64], t: usize) -> Vec<f64> {
        let w = 1usize << (self.steps - t);
        x.chunks(w)
            .map(|c| c.iter().sum::<f64>() / w as f64)
            .collect()
    }
}

/// Node-indexed values `X_t(node)` for `t ∈ 0..=N`, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    steps: usize,
    data: Vec<f64>,
}

#[inline]
fn offset(t: usize) -> usize {
    (1 << t) - 1
}

impl AdaptedProcess {
    pub fn zeros(steps: usize) -> Self {
        AdaptedProcess {
            steps,
            data: vec![0.0; (1 << (steps + 1)) - 1],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(steps: usize, mut f: F) -> Self {
        let mut p = AdaptedProcess::zeros(steps);
        for t in 0..=steps {
            for (node, v) in p.level_mut(t).iter_mut().enumerate() {
                *v = f(t, node);
            }
        }
        p
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn level(&self, t: usize) -> &[f64] {
        &self.data[offset(t)..offset(t + 1)]
    }

    pub fn level_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[offset(t)..offset(t + 1)]
    }

    #[inline]
    pub fn get(&self, t: usize, node: usize) -> f64 {
        self.data[offset(t) + node]
    }

    #[inline]
    pub fn at(&self, path: usize, t: usize) -> f64 {
        self.get(t, path >> (self.steps - t))
    }

    pub fn terminal(&self) -> &[f64] {
        self.level(self.steps)
    }

    pub fn along(&self, path: usize) -> Vec<f64> {
        (0..=self.steps).map(|t| self.at(path, t)).collect()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &AdaptedProcess, b: f64) -> AdaptedProcess {
        AdaptedProcess {
            steps: self.steps,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// `max |E[X_{t+1} | F_t] − X_t|`.
    pub fn martingale_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.steps {
            let next = self.level(t + 1);
            for (node, &v) in self.level(t).iter().enumerate() {
                let m = 0.5 * (next[2 * node] + next[2 * node + 1]);
                worst = worst.max((m - v).abs());
            }
        }
        worst
    }

    /// `max |X_t − X_{t−1}|` over decreasing steps, 0 when nondecreasing.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 1..=self.steps {
            let prev = self.level(t - 1);
            for (node, &v) in self.level(t).iter().enumerate() {
                worst = worst.max(prev[node >> 1] - v);
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &AdaptedProcess) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Adapted process with the exact one-step martingale property.
#[derive(Debug, Clone, PartialEq)]
pub struct Martingale(pub AdaptedProcess);

impl Martingale {
    pub fn process(&self) -> &AdaptedProcess {
        &self.0
    }

    pub fn terminal(&self) -> &[f64] {
        self.0.terminal()
    }

    pub fn initial(&self) -> f64 {
        self.0.get(0, 0)
    }

    #[inline]
    pub fn at(&self, path: usize, t: usize) -> f64 {
        self.0.at(path, t)
    }

    pub fn combine(&self, a: f64, other: &Martingale, b: f64) -> Martingale {
        Martingale(self.0.combine(a, &other.0, b))
    }
}

/// `M_t = E[X | F_t]` by backward induction.
pub fn closing_martingale(tree: &DyadicTree, x: &[f64]) -> Martingale {
    assert_eq!(x.len(), tree.path_count(), "terminal value per path");
    let n = tree.steps();
    let mut p = AdaptedProcess::zeros(n);
    p.level_mut(n).copy_from_slice(x);
    for t in (0..n).rev() {
        let (lo, hi) = p.data.split_at_mut(offset(t + 1));
        let cur = &mut lo[offset(t)..];
        let next = &hi[..1 << (t + 1)];
        for (node, v) in cur.iter_mut().enumerate() {
            *v = 0.5 * (next[2 * node] + next[2 * node + 1]);
        }
    }
    Martingale(p)
}

/// Random time with values in `1..=N`, one per path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomTime {
    steps: usize,
    values: Vec<u8>,
}

impl RandomTime {
    pub fn new(tree: &DyadicTree, values: Vec<u8>) -> Result<Self> {
        if values.len() != tree.path_count() {
            return Err(LabError::InvalidRandomTime(format!(
                "{} values for {} paths",
                values.len(),
                tree.path_count()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|&&v| v == 0 || v as usize > tree.steps())
        {
            return Err(LabError::InvalidRandomTime(format!(
                "value {v} outside 1..={}",
                tree.steps()
            )));
        }
        Ok(RandomTime {
            steps: tree.steps(),
            values,
        })
    }

    pub fn from_fn<F: FnMut(usize) -> usize>(tree: &DyadicTree, mut f: F) -> Result<Self> {
        RandomTime::new(tree, (0..tree.path_count()).map(|p| f(p) as u8).collect())
    }

    pub fn constant(tree: &DyadicTree, t: usize) -> Result<Self> {
        RandomTime::from_fn(tree, |_| t)
    }

    /// Last `t ∈ 1..=N` at which the walk sits at its maximum over `1..=N`.
    pub fn last_max(tree: &DyadicTree) -> Self {
        RandomTime::last_in_set(tree, |path, t| {
            let s = tree.integer_walk(path, t);
            (1..=tree.steps()).all(|u| tree.integer_walk(path, u) <= s)
        })
    }

    /// First `t` at which the walk attains its maximum over `1..=N`.
    pub fn first_max(tree: &DyadicTree) -> Self {
        RandomTime::first_in_set(tree, |path, t| {
            let s = tree.integer_walk(path, t);
            (1..=tree.steps()).all(|u| tree.integer_walk(path, u) <= s)
        })
    }

    /// Last `t ∈ 1..=N` with `pred(path, t)`, else `N`. Honest whenever the
    /// predicate is adapted.
    pub fn last_in_set<P: Fn(usize, usize) -> bool>(tree: &DyadicTree, pred: P) -> Self {
        let n = tree.steps();
        RandomTime::from_fn(tree, |p| (1..=n).rev().find(|&t| pred(p, t)).unwrap_or(n))
            .expect("values in range")
    }

    /// First `t ∈ 1..=N` with `pred(path, t)`, else `N`.
    pub fn first_in_set<P: Fn(usize, usize) -> bool>(tree: &DyadicTree, pred: P) -> Self {
        let n = tree.steps();
        RandomTime::from_fn(tree, |p| (1..=n).find(|&t| pred(p, t)).unwrap_or(n))
            .expect("values in range")
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn at(&self, path: usize) -> usize {
        self.values[path] as usize
    }

    /// `{ρ = t} ∈ F_t` for every `t`.
    pub fn is_stopping_time(&self, tree: &DyadicTree) -> bool {
        (1..=self.steps).all(|t| {
            (0..1usize << t).all(|node| {
                let mut r = tree.paths_through(t, node).map(|p| self.at(p) == t);
                let first = r.next().expect("nonempty atom");
                r.all(|b| b == first)
            })
        })
    }

    /// On each `F_t` atom, `ρ` takes a single value on `{ρ ≤ t}`.
    pub fn check_honest(&self, tree: &DyadicTree) -> Result<()> {
        for t in 1..=self.steps {
            for node in 0..1usize << t {
                let mut seen = None;
                for p in tree.paths_through(t, node) {
                    let r = self.at(p);
                    if r <= t {
                        match seen {
                            None => seen = Some(r),
                            Some(s) if s != r => return Err(LabError::NotHonest { time: t }),
                            _ => {}
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_honest(&self, tree: &DyadicTree) -> bool {
        self.check_honest(tree).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn tree_sizes() {
        assert_eq!(build_tree(1).unwrap().path_count(), 2);
        assert!(build_tree(0).is_err());
        assert!(matches!(
            build_tree(25),
            Err(LabError::TreeSize { steps: 25, cap: 24 })
        ));
        let start = Instant::now();
        let t = build_tree(12).unwrap();
        let _ = t.walk();
        assert_eq!(t.path_count(), 4096);
        assert!(start.elapsed().as_millis() < 10);
    }

    #[test]
    fn walk_values_at_horizon() {
        let tree = build_tree(3).unwrap();
        let s = tree.walk();
        let mut vals: Vec<f64> = s.terminal().to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let want: Vec<f64> = [-3.0, -1.0, 1.0, 3.0]
            .iter()
            .map(|v| v / 3f64.sqrt())
            .collect();
        assert_eq!(vals.len(), 4);
        for (a, b) in vals.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(s.0.martingale_defect(), 0.0);
    }

    #[test]
    fn closing_martingales() {
        let tree = DyadicTree::with_scale(5, 1.0).unwrap();
        let c = closing_martingale(&tree, &vec![2.5; 32]);
        assert!(c.0.data.iter().all(|&v| v == 2.5));
        let s = tree.walk();
        assert_eq!(closing_martingale(&tree, s.terminal()), s);
        let sq: Vec<f64> = s.terminal().iter().map(|x| x * x).collect();
        let m = closing_martingale(&tree, &sq);
        for t in 0..=5 {
            for node in 0..1usize << t {
                let st = s.0.get(t, node);
                assert_eq!(m.0.get(t, node), st * st + (5 - t) as f64);
            }
        }
    }

    #[test]
    fn conditional_matches_closing() {
        let tree = build_tree(6).unwrap();
        let x: Vec<f64> = (0..64).map(|p| ((p * 37) % 11) as f64).collect();
        let m = closing_martingale(&tree, &x);
        for t in 0..=6 {
            let c = tree.conditional(&x, t);
            for (node, v) in c.iter().enumerate() {
                assert!((v - m.0.get(t, node)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_time_classification() {
        let tree = build_tree(4).unwrap();
        assert!(RandomTime::constant(&tree, 4)
            .unwrap()
            .is_stopping_time(&tree));
        let hit = RandomTime::first_in_set(&tree, |p, t| tree.integer_walk(p, t) >= 2);
        assert!(hit.is_stopping_time(&tree));
        assert!(hit.is_honest(&tree));
        let lm = RandomTime::last_max(&tree);
        assert!(!lm.is_stopping_time(&tree));
        assert!(lm.is_honest(&tree));
        assert!(RandomTime::new(&tree, vec![0; 16]).is_err());
        assert!(RandomTime::new(&tree, vec![5; 16]).is_err());
        assert!(RandomTime::new(&tree, vec![1; 15]).is_err());
    }

    #[test]
    fn last_max_on_two_steps() {
        let tree = build_tree(2).unwrap();
        let lm = RandomTime::last_max(&tree);
        // ρ = 1 exactly when the second step is down
        assert_eq!(lm.values(), &[1, 2, 1, 2]);
        let fm = RandomTime::first_max(&tree);
        assert_eq!(fm.values(), &[1, 2, 1, 2]);
    }

    #[test]
    fn non_honest_time_detected() {
        let tree = build_tree(3).unwrap();
        // ρ = 1 if the last step is up, else 2: on {ρ ≤ 2} it needs step 3
        let rho = RandomTime::from_fn(&tree, |p| if p & 1 == 1 { 1 } else { 2 }).unwrap();
        assert!(matches!(
            rho.check_honest(&tree),
            Err(LabError::NotHonest { time: 2 })
        ));
    }
}
