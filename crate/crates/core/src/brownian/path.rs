use super::adaptive::StepVisitor;
use super::{
    band_occupation, cell_local_time, lambda_weight, tanaka_increment, touches, zero_fraction,
    PathRng,
};
use crate::error::{LabError, Result};

/// Domain tag of the dense sampler's streams.
pub const DENSE_DOMAIN: u64 = 0x0d;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub level: f64,
    pub seed: u128,
    pub bridge_corrections: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt: 1e-4,
            horizon: 1.0,
            level: 1.0,
            seed: 0,
            bridge_corrections: true,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite())
            || self.horizon.is_nan()
            || self.horizon < self.dt
        {
            return Err(LabError::InvalidConfig(format!(
                "need 0 < dt ≤ horizon, got dt={} horizon={}",
                self.dt, self.horizon
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Dense path on `t_k = k·dt`, with one bridge uniform per step.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub uniforms: Vec<f64>,
    pub bridge_corrections: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitOutcome {
    Hit(f64),
    /// No hit within the simulated horizon.
    Censored(f64),
}

impl HitOutcome {
    pub fn time(&self) -> Option<f64> {
        match self {
            HitOutcome::Hit(t) => Some(*t),
            HitOutcome::Censored(_) => None,
        }
    }
}

pub fn simulate(config: &PathConfig, path_id: u64) -> Result<BrownianPath> {
    config.validate()?;
    let n = config.steps();
    let mut rng = PathRng::new(config.seed, DENSE_DOMAIN, path_id);
    let sd = config.dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut uniforms = Vec::with_capacity(n);
    let mut b = 0.0;
    values.push(b);
    for _ in 0..n {
        b += sd * rng.normal();
        values.push(b);
        uniforms.push(rng.uniform());
    }
    Ok(BrownianPath {
        dt: config.dt,
        values,
        uniforms,
        bridge_corrections: config.bridge_corrections,
    })
}

impl BrownianPath {
    pub fn steps(&self) -> usize {
        self.uniforms.len()
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt).collect()
    }

    /// Feeds every step to a visitor, as the adaptive driver would.
    pub fn visit<V: StepVisitor>(&self, v: &mut V) {
        for k in 0..self.steps() {
            v.checkpoint(k as u64, self.values[k]);
            if v.fine(
                k as u64,
                self.values[k],
                self.values[k + 1],
                self.uniforms[k],
            ) {
                return;
            }
        }
        v.checkpoint(self.steps() as u64, self.values[self.steps()]);
    }

    fn index_at(&self, t: f64) -> usize {
        ((t / self.dt).round() as usize).min(self.steps())
    }

    fn cell_has_zero(&self, k: usize) -> bool {
        let (a, b) = (self.values[k], self.values[k + 1]);
        a * b <= 0.0 || (self.bridge_corrections && touches(0.0, a, b, self.dt, self.uniforms[k]))
    }

    /// First passage of `level` within the simulated horizon.
    pub fn hitting_time(&self, level: f64) -> Result<HitOutcome> {
        if level == 0.0 {
            return Err(LabError::InvalidConfig(
                "hitting level must be nonzero".into(),
            ));
        }
        for k in 0..self.steps() {
            let (a, b) = (self.values[k], self.values[k + 1]);
            let (x, y) = (level - a, level - b);
            if x * y <= 0.0 {
                let f = if x == y { 0.0 } else { x / (x - y) };
                return Ok(HitOutcome::Hit((k as f64 + f) * self.dt));
            }
            if self.bridge_corrections && touches(level, a, b, self.dt, self.uniforms[k]) {
                let f = x.abs() / (x.abs() + y.abs());
                return Ok(HitOutcome::Hit((k as f64 + f) * self.dt));
            }
        }
        Ok(HitOutcome::Censored(self.horizon()))
    }

    /// `g_{t_k}` for every grid index, the last located zero up to `t_k`.
    pub fn running_last_zero(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut g = 0.0;
        out.push(g);
        for k in 0..self.steps() {
            if self.cell_has_zero(k) {
                g = (k as f64 + zero_fraction(self.values[k], self.values[k + 1])) * self.dt;
            }
            out.push(g);
        }
        out
    }

    /// Located last zero at or before `t`.
    pub fn last_zero_before(&self, t: f64) -> f64 {
        let m = self.index_at(t);
        for k in (0..m).rev() {
            if self.cell_has_zero(k) {
                let z = (k as f64 + zero_fraction(self.values[k], self.values[k + 1])) * self.dt;
                return z.min(t);
            }
        }
        0.0
    }

    /// Tanaka estimator `|B_t| − Σ sgn(B_s) ΔB_s` on the grid.
    pub fn local_time(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut l = 0.0;
        out.push(l);
        for k in 0..self.steps() {
            l += tanaka_increment(self.values[k], self.values[k + 1]);
            out.push(l);
        }
        out
    }

    /// Local time with each step's increment drawn from its conditional law
    /// given the endpoints.
    pub fn bridge_local_time(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut l = 0.0;
        out.push(l);
        for k in 0..self.steps() {
            l += cell_local_time(
                self.values[k],
                self.values[k + 1],
                self.dt,
                self.uniforms[k],
            );
            out.push(l);
        }
        out
    }

    /// `ε`-band occupation of the interpolated path over `2ε`.
    pub fn occupation_local_time(&self, eps: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut l = 0.0;
        out.push(l);
        for k in 0..self.steps() {
            l += band_occupation(self.values[k], self.values[k + 1], self.dt, eps) / (2.0 * eps);
            out.push(l);
        }
        out
    }

    /// `λ_t = √(2/π) ∫_0^t dℓ_u / √(1 − u)` on a horizon-1 path, accumulated
    /// up to `1 − dt`; the last entry repeats the `1 − dt` value.
    pub fn lambda_process(&self) -> Result<Vec<f64>> {
        if (self.horizon() - 1.0).abs() > 0.5 * self.dt {
            return Err(LabError::InvalidConfig("λ needs a horizon-1 path".into()));
        }
        let n = self.steps();
        let mut out = Vec::with_capacity(n + 1);
        let mut lam = 0.0;
        out.push(lam);
        for k in 0..n {
            if k + 1 < n {
                let l = cell_local_time(
                    self.values[k],
                    self.values[k + 1],
                    self.dt,
                    self.uniforms[k],
                );
                if l > 0.0 {
                    let (u0, u1) = (k as f64 * self.dt, (k + 1) as f64 * self.dt);
                    lam += lambda_weight(u0, u1) * l;
                }
            }
            out.push(lam);
        }
        Ok(out)
    }

    /// One raw-sample row per functional, for CSV dumps.
    pub fn functionals(&self, level: f64) -> Vec<(&'static str, f64)> {
        let t_end = self.horizon();
        let mut rows = vec![
            ("terminal", *self.values.last().unwrap_or(&0.0)),
            ("last_zero", self.last_zero_before(t_end)),
            (
                "local_time",
                *self.bridge_local_time().last().unwrap_or(&0.0),
            ),
            (
                "local_time_tanaka",
                *self.local_time().last().unwrap_or(&0.0),
            ),
        ];
        if let Ok(h) = self.hitting_time(level) {
            rows.push(("hitting_time", h.time().unwrap_or(f64::INFINITY)));
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dt: f64, seed: u128) -> PathConfig {
        PathConfig {
            dt,
            seed,
            ..PathConfig::default()
        }
    }

    #[test]
    fn seed_repeat_is_bit_identical() {
        let a = simulate(&cfg(1e-3, 9), 4).unwrap();
        let b = simulate(&cfg(1e-3, 9), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.steps(), 1000);
        assert_ne!(a, simulate(&cfg(1e-3, 9), 5).unwrap());
    }

    #[test]
    fn invalid_config() {
        let c = PathConfig {
            dt: 2.0,
            horizon: 1.0,
            ..PathConfig::default()
        };
        assert!(simulate(&c, 0).is_err());
    }

    #[test]
    fn terminal_moments() {
        let n = 20_000;
        let c = cfg(1e-2, 1);
        let xs: Vec<f64> = (0..n)
            .map(|i| *simulate(&c, i).unwrap().values.last().unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.04);
    }

    #[test]
    fn hitting_levels_are_monotone() {
        let c = PathConfig {
            dt: 1e-3,
            horizon: 20.0,
            ..PathConfig::default()
        };
        for i in 0..50 {
            let p = simulate(&c, i).unwrap();
            let h1 = p.hitting_time(1.0).unwrap();
            let h2 = p.hitting_time(2.0).unwrap();
            match (h1, h2) {
                (HitOutcome::Hit(a), HitOutcome::Hit(b)) => assert!(b >= a),
                (HitOutcome::Censored(_), HitOutcome::Hit(_)) => panic!("level 2 before level 1"),
                _ => {}
            }
        }
        assert!(simulate(&c, 0).unwrap().hitting_time(0.0).is_err());
    }

    #[test]
    fn last_zero_and_local_time_properties() {
        let p = simulate(&cfg(1e-3, 2), 0).unwrap();
        for &t in &[0.1, 0.5, 1.0] {
            assert!(p.last_zero_before(t) <= t);
        }
        for l in [
            p.local_time(),
            p.bridge_local_time(),
            p.lambda_process().unwrap(),
        ] {
            assert!(l.windows(2).all(|w| w[1] >= w[0]));
        }
        let occ = p.occupation_local_time(1e-3f64.powf(0.4));
        assert!(occ.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn lambda_grows_only_where_band_is_occupied() {
        let dt: f64 = 1e-3;
        let eps = dt.powf(0.4);
        let p = simulate(&cfg(dt, 3), 1).unwrap();
        let lam = p.lambda_process().unwrap();
        for k in 0..p.steps() {
            if lam[k + 1] > lam[k] {
                assert!(band_occupation(p.values[k], p.values[k + 1], dt, eps) > 0.0);
            }
        }
    }

    #[test]
    fn local_time_means() {
        let n = 4000;
        let c = cfg(1e-3, 5);
        let (mut t, mut b) = (0.0, 0.0);
        for i in 0..n {
            let p = simulate(&c, i).unwrap();
            t += p.local_time().last().unwrap();
            b += p.bridge_local_time().last().unwrap();
        }
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((t / n as f64 - want).abs() < 0.03);
        assert!((b / n as f64 - want).abs() < 0.03);
    }
}
