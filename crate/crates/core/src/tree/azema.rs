use super::{AdaptedProcess, DyadicTree, Martingale, RandomTime};

/// `Z_t = P[ρ > t | F_t]`, `ΔA_t = P[ρ = t | F_t]`, `μ = A + Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AzemaTriple {
    pub z: AdaptedProcess,
    pub a: AdaptedProcess,
    pub delta_a: AdaptedProcess,
    pub mu: Martingale,
}

impl AzemaTriple {
    /// `max |μ − (A + Z)|`, `E[A_N] − 1`, martingale and monotonicity defects
    /// and the range violation of `Z`, in one pass.
    pub fn invariant_defects(&self, tree: &DyadicTree) -> [f64; 5] {
        let sum = self.a.combine(1.0, &self.z, 1.0);
        let z_range = (0..=tree.steps())
            .flat_map(|t| self.z.level(t).iter())
            .map(|&z| (-z).max(z - 1.0).max(0.0))
            .fold(0.0, f64::max);
        [
            sum.max_abs_diff(&self.mu.0),
            (tree.mean(self.a.terminal()) - 1.0).abs(),
            self.mu.0.martingale_defect(),
            self.a.monotonicity_defect(),
            z_range,
        ]
    }
}

pub fn azema_triple(tree: &DyadicTree, rho: &RandomTime) -> AzemaTriple {
    let n = tree.steps();
    let mut z = AdaptedProcess::zeros(n);
    let mut delta_a = AdaptedProcess::zeros(n);
    for t in 0..=n {
        let width = (1usize << (n - t)) as f64;
        let (zl, dl) = (z.level_mut(t), delta_a.level_mut(t));
        for node in 0..1usize << t {
            let (mut alive, mut now) = (0usize, 0usize);
            for p in tree.paths_through(t, node) {
                let r = rho.at(p);
                if r > t {
                    alive += 1;
                } else if r == t {
                    now += 1;
                }
            }
            zl[node] = alive as f64 / width;
            dl[node] = now as f64 / width;
        }
    }
    let mut a = AdaptedProcess::zeros(n);
    for t in 1..=n {
        let prev = a.level(t - 1).to_vec();
        let d = delta_a.level(t).to_vec();
        for (node, v) in a.level_mut(t).iter_mut().enumerate() {
            *v = prev[node >> 1] + d[node];
        }
    }
    let mu = Martingale(a.combine(1.0, &z, 1.0));
    AzemaTriple { z, a, delta_a, mu }
}

/// `⟨M, M′⟩_t = Σ_{s≤t} E[ΔM_s ΔM′_s | F_{s−1}]`; constant on siblings.
pub fn predictable_bracket(tree: &DyadicTree, m: &Martingale, m2: &Martingale) -> AdaptedProcess {
    let n = tree.steps();
    let mut out = AdaptedProcess::zeros(n);
    for t in 1..=n {
        let (mp, mc) = (m.0.level(t - 1), m.0.level(t));
        let (np, nc) = (m2.0.level(t - 1), m2.0.level(t));
        let prev = out.level(t - 1).to_vec();
        let cur = out.level_mut(t);
        for parent in 0..1usize << (t - 1) {
            let (l, r) = (2 * parent, 2 * parent + 1);
            let inc = 0.5
                * ((mc[l] - mp[parent]) * (nc[l] - np[parent])
                    + (mc[r] - mp[parent]) * (nc[r] - np[parent]));
            cur[l] = prev[parent] + inc;
            cur[r] = prev[parent] + inc;
        }
    }
    out
}

/// `[M, M′]_t = Σ_{s≤t} ΔM_s ΔM′_s`.
pub fn optional_bracket(tree: &DyadicTree, m: &Martingale, m2: &Martingale) -> AdaptedProcess {
    let n = tree.steps();
    let mut out = AdaptedProcess::zeros(n);
    for t in 1..=n {
        let (mp, mc) = (m.0.level(t - 1), m.0.level(t));
        let (np, nc) = (m2.0.level(t - 1), m2.0.level(t));
        let prev = out.level(t - 1).to_vec();
        for (node, v) in out.level_mut(t).iter_mut().enumerate() {
            let parent = node >> 1;
            *v = prev[parent] + (mc[node] - mp[parent]) * (nc[node] - np[parent]);
        }
    }
    out
}

/// The three expressions of `T(M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S1Value {
    /// `E[⟨M, μ⟩_N]`
    pub bracket: f64,
    /// `E[M_N (μ_N − 1)]`
    pub mu_form: f64,
    /// `E[M_N (A_N − 1)]`
    pub a_form: f64,
}

impl S1Value {
    pub fn value(&self) -> f64 {
        self.bracket
    }

    pub fn spread(&self) -> f64 {
        let v = [self.bracket, self.mu_form, self.a_form];
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

pub fn s1_functional(tree: &DyadicTree, m: &Martingale, triple: &AzemaTriple) -> S1Value {
    let bracket = tree.mean(predictable_bracket(tree, m, &triple.mu).terminal());
    let mn = m.terminal();
    let mu_form = tree.mean(
        &mn.iter()
            .zip(triple.mu.terminal())
            .map(|(x, u)| x * (u - 1.0))
            .collect::<Vec<_>>(),
    );
    let a_form = tree.mean(
        &mn.iter()
            .zip(triple.a.terminal())
            .map(|(x, a)| x * (a - 1.0))
            .collect::<Vec<_>>(),
    );
    S1Value {
        bracket,
        mu_form,
        a_form,
    }
}

/// `E[M_ρ]` three ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoExpectation {
    /// Path sum of `M_ρ`.
    pub direct: f64,
    /// `E[Σ_s M_s ΔA_s]`
    pub dual_sum: f64,
    /// `E[M_N A_N]`
    pub terminal: f64,
}

pub fn expectation_at_rho(tree: &DyadicTree, m: &Martingale, rho: &RandomTime) -> RhoExpectation {
    let triple = azema_triple(tree, rho);
    expectation_with(tree, m, rho, &triple)
}

pub fn expectation_with(
    tree: &DyadicTree,
    m: &Martingale,
    rho: &RandomTime,
    triple: &AzemaTriple,
) -> RhoExpectation {
    let n = tree.steps();
    let mut direct = 0.0;
    let mut dual_sum = 0.0;
    let mut terminal = 0.0;
    for p in 0..tree.path_count() {
        direct += m.at(p, rho.at(p));
        for t in 1..=n {
            dual_sum += m.at(p, t) * triple.delta_a.at(p, t);
        }
        terminal += m.at(p, n) * triple.a.at(p, n);
    }
    let w = tree.probability();
    RhoExpectation {
        direct: direct * w,
        dual_sum: dual_sum * w,
        terminal: terminal * w,
    }
}

/// `M = M₀ + ∫k dμ + N` with `⟨N, μ⟩ ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KwDecomposition {
    pub residual: Martingale,
    /// `k_t`, predictable: constant on siblings, `k_0 = 0`.
    pub integrand: AdaptedProcess,
    /// `E[Σ_t k_t Δ⟨μ⟩_t]`
    pub membership: f64,
}

impl KwDecomposition {
    /// `max |M − (N + ∫k dμ)|`.
    pub fn reconstruction_error(&self, tree: &DyadicTree, m: &Martingale, mu: &Martingale) -> f64 {
        let n = tree.steps();
        let mut stoch = AdaptedProcess::zeros(n);
        for t in 1..=n {
            let prev = stoch.level(t - 1).to_vec();
            let (up, uc) = (mu.0.level(t - 1), mu.0.level(t));
            let k = self.integrand.level(t).to_vec();
            for (node, v) in stoch.level_mut(t).iter_mut().enumerate() {
                let parent = node >> 1;
                *v = prev[parent] + k[node] * (uc[node] - up[parent]);
            }
        }
        stoch.combine(1.0, &self.residual.0, 1.0).max_abs_diff(&m.0)
    }
}

pub fn kunita_watanabe(tree: &DyadicTree, m: &Martingale, mu: &Martingale) -> KwDecomposition {
    let n = tree.steps();
    let mut k = AdaptedProcess::zeros(n);
    let mut residual = AdaptedProcess::zeros(n);
    residual.level_mut(0)[0] = m.initial();
    let mut membership = 0.0;
    for t in 1..=n {
        let (mp, mc) = (m.0.level(t - 1), m.0.level(t));
        let (up, uc) = (mu.0.level(t - 1), mu.0.level(t));
        let rprev = residual.level(t - 1).to_vec();
        let mut kl = vec![0.0; 1 << t];
        let mut rl = vec![0.0; 1 << t];
        let parents = 1usize << (t - 1);
        for parent in 0..parents {
            let (l, r) = (2 * parent, 2 * parent + 1);
            let (dml, dmr) = (mc[l] - mp[parent], mc[r] - mp[parent]);
            let (dul, dur) = (uc[l] - up[parent], uc[r] - up[parent]);
            let cov = 0.5 * (dml * dul + dmr * dur);
            let var = 0.5 * (dul * dul + dur * dur);
            let kk = if var > 0.0 { cov / var } else { 0.0 };
            kl[l] = kk;
            kl[r] = kk;
            rl[l] = rprev[parent] + dml - kk * dul;
            rl[r] = rprev[parent] + dmr - kk * dur;
            membership += kk * var / parents as f64;
        }
        k.level_mut(t).copy_from_slice(&kl);
        residual.level_mut(t).copy_from_slice(&rl);
    }
    KwDecomposition {
        residual: Martingale(residual),
        integrand: k,
        membership,
    }
}

/// Every sweep quantity for one `(M, ρ)` pair, computed in single passes
/// over the levels without building intermediate processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    pub s1: S1Value,
    pub rho: RhoExpectation,
    /// `E[M_N]`
    pub terminal_mean: f64,
    /// `max |M − (M₀ + ∫k dμ + N)|` of the Kunita–Watanabe split.
    pub kw_reconstruction: f64,
    /// `max |⟨N, μ⟩_t|`
    pub kw_orthogonality: f64,
    /// `E[Σ_t k_t Δ⟨μ⟩_t]`
    pub kw_membership: f64,
}

/// Four-lane dot product.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc
        .remainder()
        .iter()
        .zip(yc.remainder())
        .map(|(a, b)| a * b)
        .sum();
    for (a, b) in xc.zip(yc) {
        for i in 0..4 {
            acc[i] += a[i] * b[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub fn pair_check(
    tree: &DyadicTree,
    m: &Martingale,
    rho: &RandomTime,
    triple: &AzemaTriple,
) -> PairCheck {
    let n = tree.steps();
    let w = tree.probability();
    let mu = &triple.mu.0;
    let (mut bracket, mut membership, mut dual_sum) = (0.0, 0.0, 0.0);
    let (mut recon, mut orth) = (0.0f64, 0.0f64);
    // residual, stochastic integral and ⟨N, μ⟩, kept at the resolution of
    // the last level where M moved; levels where M is flat change none of them
    let mut state = vec![(m.initial(), 0.0, 0.0)];
    let mut state_level = 0;
    let mut next = Vec::with_capacity(1 << n);
    for t in 1..=n {
        let (mp, mc) = (m.0.level(t - 1), m.0.level(t));
        let da = triple.delta_a.level(t);
        let parents = 1usize << (t - 1);
        let weight = 1.0 / parents as f64;
        dual_sum += 0.5 * weight * dot(mc, da);
        if mc.iter().enumerate().all(|(node, &x)| x == mp[node >> 1]) {
            continue;
        }
        let (up, uc) = (mu.level(t - 1), mu.level(t));
        let shift = t - 1 - state_level;
        next.clear();
        for parent in 0..parents {
            let (l, r) = (2 * parent, 2 * parent + 1);
            let (dml, dmr) = (mc[l] - mp[parent], mc[r] - mp[parent]);
            let (dul, dur) = (uc[l] - up[parent], uc[r] - up[parent]);
            let cov = 0.5 * (dml * dul + dmr * dur);
            let var = 0.5 * (dul * dul + dur * dur);
            let k = if var > 0.0 { cov / var } else { 0.0 };
            bracket += cov * weight;
            membership += k * var * weight;
            let (res, sto, nb) = state[parent >> shift];
            let (rl, rr) = (res + dml - k * dul, res + dmr - k * dur);
            let nb = nb + 0.5 * ((dml - k * dul) * dul + (dmr - k * dur) * dur);
            orth = orth.max(nb.abs());
            let (sl, sr) = (sto + k * dul, sto + k * dur);
            recon = recon
                .max((rl + sl - mc[l]).abs())
                .max((rr + sr - mc[r]).abs());
            next.push((rl, sl, nb));
            next.push((rr, sr, nb));
        }
        std::mem::swap(&mut state, &mut next);
        state_level = t;
    }
    let (mn, un, an) = (m.terminal(), mu.terminal(), triple.a.terminal());
    let mean = mn.iter().sum::<f64>();
    let (mu_dot, a_dot) = (dot(mn, un), dot(mn, an));
    let (mu_form, a_form, terminal) = (mu_dot - mean, a_dot - mean, a_dot);
    let direct: f64 = rho
        .values()
        .iter()
        .enumerate()
        .map(|(p, &r)| m.0.level(r as usize)[p >> (n - r as usize)])
        .sum();
    PairCheck {
        s1: S1Value {
            bracket,
            mu_form: mu_form * w,
            a_form: a_form * w,
        },
        rho: RhoExpectation {
            direct: direct * w,
            dual_sum,
            terminal: terminal * w,
        },
        terminal_mean: mean * w,
        kw_reconstruction: recon,
        kw_orthogonality: orth,
        kw_membership: membership,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_tree, closing_martingale};
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_time(tree: &DyadicTree, seed: u64) -> RandomTime {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RandomTime::from_fn(tree, |_| rng.random_range(1..=tree.steps())).unwrap()
    }

    #[test]
    fn stopping_time_triple() {
        let tree = build_tree(5).unwrap();
        let t = RandomTime::first_in_set(&tree, |p, t| tree.integer_walk(p, t) == -2);
        let tr = azema_triple(&tree, &t);
        for p in 0..tree.path_count() {
            for s in 0..=5 {
                let want_z = if t.at(p) > s { 1.0 } else { 0.0 };
                let want_da = if t.at(p) == s { 1.0 } else { 0.0 };
                assert_eq!(tr.z.at(p, s), want_z);
                assert_eq!(tr.delta_a.at(p, s), want_da);
            }
        }
    }

    #[test]
    fn deterministic_horizon_triple() {
        let tree = build_tree(4).unwrap();
        let tr = azema_triple(&tree, &RandomTime::constant(&tree, 4).unwrap());
        for t in 0..4 {
            assert!(tr.z.level(t).iter().all(|&z| z == 1.0));
            assert!(tr.a.level(t).iter().all(|&a| a == 0.0));
        }
        assert!(tr.a.terminal().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn honest_max_triple_by_hand() {
        let tree = build_tree(2).unwrap();
        let tr = azema_triple(&tree, &RandomTime::last_max(&tree));
        // paths dd, du, ud, uu; ρ = 1 iff the second step is down
        assert_eq!(tr.z.level(1), &[0.5, 0.5]);
        assert_eq!(tr.delta_a.level(1), &[0.5, 0.5]);
        assert_eq!(tr.z.level(2), &[0.0; 4]);
        assert_eq!(tr.a.terminal(), &[0.5, 1.5, 0.5, 1.5]);
        assert_eq!(tr.mu.0.level(1), &[1.0, 1.0]);
        assert_eq!(tr.mu.initial(), 1.0);
    }

    #[test]
    fn brackets() {
        let tree = DyadicTree::with_scale(6, 1.0).unwrap();
        let s = tree.walk();
        let b = predictable_bracket(&tree, &s, &s);
        for t in 0..=6 {
            assert!(b.level(t).iter().all(|&v| v == t as f64));
        }
        let x: Vec<f64> = (0..64).map(|p| ((p * 13) % 7) as f64 - 3.0).collect();
        let y: Vec<f64> = (0..64).map(|p| ((p * 5) % 9) as f64 * 0.25).collect();
        let (m, m2) = (closing_martingale(&tree, &x), closing_martingale(&tree, &y));
        let lhs = predictable_bracket(&tree, &m.combine(2.0, &s, 1.0), &m2);
        let rhs = predictable_bracket(&tree, &m, &m2).combine(
            2.0,
            &predictable_bracket(&tree, &s, &m2),
            1.0,
        );
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let sym = predictable_bracket(&tree, &m2, &m);
        assert_eq!(sym, predictable_bracket(&tree, &m, &m2));
        // M M′ − ⟨M, M′⟩ is a martingale
        let prod = AdaptedProcess::from_fn(6, |t, node| m.0.get(t, node) * m2.0.get(t, node));
        let comp = prod.combine(1.0, &predictable_bracket(&tree, &m, &m2), -1.0);
        assert!(comp.martingale_defect() < 1e-13);
    }

    #[test]
    fn s1_on_honest_max() {
        let tree = DyadicTree::with_scale(2, 1.0).unwrap();
        let rho = RandomTime::last_max(&tree);
        let tr = azema_triple(&tree, &rho);
        let s = tree.walk();
        let v = s1_functional(&tree, &s, &tr);
        // S_2 ∈ {−2, 0, 0, 2}, A_2 ∈ {½, 3/2, ½, 3/2}: E[S_2(A_2 − 1)] = ¼(−2·−½ + 2·½)
        assert_eq!(v.a_form, 0.5);
        assert_eq!(v.mu_form, 0.5);
        assert_eq!(v.bracket, 0.5);
        let e = expectation_at_rho(&tree, &s, &rho);
        // S_ρ: dd → −1, du → 0, ud → 1, uu → 2
        assert_eq!(e.direct, 0.5);
        assert_eq!(e.terminal, 0.5);
        assert_eq!(e.dual_sum, 0.5);
    }

    #[test]
    fn s1_trivial_cases() {
        let tree = build_tree(5).unwrap();
        let c = closing_martingale(&tree, &vec![3.0; 32]);
        let x: Vec<f64> = (0..32).map(|p| (p as f64).sin()).collect();
        let m = closing_martingale(&tree, &x);
        let rho = random_time(&tree, 7);
        let tr = azema_triple(&tree, &rho);
        assert!(s1_functional(&tree, &c, &tr).value().abs() < 1e-14);
        let stop = RandomTime::first_in_set(&tree, |p, t| tree.integer_walk(p, t) == 1);
        let ts = azema_triple(&tree, &stop);
        let v = s1_functional(&tree, &m, &ts);
        assert!(v.value().abs() < 1e-15 && v.spread() < 1e-15);
        let e = expectation_at_rho(&tree, &m, &stop);
        assert!((e.direct - m.initial()).abs() < 1e-15);
        assert!((expectation_at_rho(&tree, &c, &rho).direct - 3.0).abs() < 1e-15);
    }

    #[test]
    fn kunita_watanabe_cases() {
        let tree = build_tree(6).unwrap();
        let rho = RandomTime::last_max(&tree);
        let tr = azema_triple(&tree, &rho);
        let kw = kunita_watanabe(&tree, &tr.mu, &tr.mu);
        for t in 1..=6 {
            for (node, &k) in kw.integrand.level(t).iter().enumerate() {
                let parent = node >> 1;
                let moves = tr.mu.0.level(t)[2 * parent] != tr.mu.0.level(t - 1)[parent];
                assert!(!moves || (k - 1.0).abs() < 1e-14);
            }
        }
        assert!(kw.residual.0.data.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        let s = tree.walk();
        let kw = kunita_watanabe(&tree, &s, &tr.mu);
        assert!(kw.reconstruction_error(&tree, &s, &tr.mu) < 1e-14);
        let nb = predictable_bracket(&tree, &kw.residual, &tr.mu);
        assert!(nb.data.iter().all(|v| v.abs() < 1e-14));
        assert!((kw.membership - s1_functional(&tree, &s, &tr).value()).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_martingale_has_zero_integrand() {
        // ρ driven by the first coin only, M by the last coin only
        let tree = build_tree(4).unwrap();
        let rho = RandomTime::from_fn(&tree, |p| if p >> 3 == 1 { 1 } else { 3 }).unwrap();
        let tr = azema_triple(&tree, &rho);
        let x: Vec<f64> = (0..16)
            .map(|p| if p & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let m = closing_martingale(&tree, &x);
        let kw = kunita_watanabe(&tree, &m, &tr.mu);
        assert!(kw.integrand.data.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn pair_check_matches_unfused() {
        for n in 1..=7 {
            let tree = build_tree(n).unwrap();
            for seed in 0..4 {
                let rho = random_time(&tree, seed + 100 * n as u64);
                let tr = azema_triple(&tree, &rho);
                let x: Vec<f64> = (0..tree.path_count())
                    .map(|p| ((p * 7 + seed as usize) as f64).cos())
                    .collect();
                let mut ms = vec![closing_martingale(&tree, &x)];
                ms.extend(super::super::walsh_basis(&tree).step_by(3));
                for m in &ms {
                    let c = pair_check(&tree, m, &rho, &tr);
                    let s = s1_functional(&tree, m, &tr);
                    let e = expectation_with(&tree, m, &rho, &tr);
                    let kw = kunita_watanabe(&tree, m, &tr.mu);
                    let nb = predictable_bracket(&tree, &kw.residual, &tr.mu);
                    let close = |a: f64, b: f64| (a - b).abs() < 1e-13;
                    assert!(
                        close(c.s1.bracket, s.bracket)
                            && close(c.s1.mu_form, s.mu_form)
                            && close(c.s1.a_form, s.a_form)
                    );
                    assert!(
                        close(c.rho.direct, e.direct)
                            && close(c.rho.dual_sum, e.dual_sum)
                            && close(c.rho.terminal, e.terminal)
                    );
                    assert!(close(c.terminal_mean, tree.mean(m.terminal())));
                    assert!(close(c.kw_membership, kw.membership));
                    assert!(close(
                        c.kw_reconstruction,
                        kw.reconstruction_error(&tree, m, &tr.mu)
                    ));
                    assert!(close(
                        c.kw_orthogonality,
                        nb.data.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
                    ));
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fuzzed_triples_satisfy_invariants(seed in any::<u64>(), n in 1usize..9) {
            let tree = build_tree(n).unwrap();
            let rho = random_time(&tree, seed);
            let tr = azema_triple(&tree, &rho);
            for d in tr.invariant_defects(&tree) {
                prop_assert!(d < 1e-13, "{:?}", tr.invariant_defects(&tree));
            }
            let s = tree.walk();
            let v = s1_functional(&tree, &s, &tr);
            prop_assert!(v.spread() < 1e-13);
            let e = expectation_at_rho(&tree, &s, &rho);
            prop_assert!((e.direct - e.terminal).abs() < 1e-13);
            prop_assert!((e.direct - e.dual_sum).abs() < 1e-13);
            prop_assert!((e.direct - tree.mean(s.terminal()) - v.value()).abs() < 1e-13);
        }
    }
}
