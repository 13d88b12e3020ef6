//! Path batches for the two Brownian honest times: the last zero `γ` before
//! time 1, and the last zero `g_{T₁}` before the first passage of 1.
//!
//! Each path is driven adaptively and folded into a fixed-size record by a
//! [`StepVisitor`]; nothing per-step is kept.

use super::adaptive::{Driver, StepVisitor};
use super::{
    band_occupation, cell_local_time, lambda_weight, tanaka_increment, touch_probability, touches,
    zero_fraction, BrownianPath, PathRng, NEGLIGIBLE,
};
use crate::error::{LabError, Result};
use crate::gamma::theta;
use rayon::prelude::*;
use serde::Serialize;

pub const GAMMA_DOMAIN: u64 = 0x6a;
pub const FIRST_PASSAGE_DOMAIN: u64 = 0x71;
/// Stream for the sub-grid refinement of the last cell before time 1.
pub const REFINE_DOMAIN: u64 = 0x72;

/// Interior checkpoints of the γ scenario.
pub const CHECKPOINTS: [f64; 3] = [0.25, 0.5, 0.75];

/// Halvings of the last cell `[1 − dt, 1]` toward 1.
pub const TAIL_HALVINGS: u32 = 30;

/// Doublings of the first-passage horizon before a path is censored.
pub const MAX_DOUBLINGS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub seed: u128,
    pub dt: f64,
    pub n: usize,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.25) {
            return Err(LabError::InvalidConfig(format!(
                "dt must lie in (0, 0.25], got {}",
                self.dt
            )));
        }
        let steps = 1.0 / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps {
            return Err(LabError::InvalidConfig(format!(
                "1/dt must be an integer, got dt={}",
                self.dt
            )));
        }
        if self.n == 0 {
            return Err(LabError::InvalidConfig("n must be positive".into()));
        }
        Ok(())
    }

    /// Fine steps per unit time.
    pub fn steps(&self) -> u64 {
        (1.0 / self.dt).round() as u64
    }

    /// Half-width of the occupation band, `dt^0.4`.
    pub fn band(&self) -> f64 {
        self.dt.powf(0.4)
    }

    /// `|B| ≤ 2√dt` counts as "at zero".
    pub fn zero_band(&self) -> f64 {
        2.0 * self.dt.sqrt()
    }
}

/// Everything the γ experiments read from one path on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRecord {
    pub path_id: u64,
    /// `B`, `λ` and the last zero at 0.25, 0.5, 0.75
    pub b: [f64; 3],
    pub lambda: [f64; 3],
    pub last_zero: [f64; 3],
    /// values at `1 − dt`
    pub b_pre: f64,
    pub lambda_pre: f64,
    pub b_one: f64,
    pub gamma: f64,
    pub lambda_inf: f64,
    /// right end of the step holding `γ`, with `B` there
    pub t_after_gamma: f64,
    pub b_after_gamma: f64,
    /// local time at 1: bridge-sampled, Tanaka, band occupation
    pub local_time: f64,
    pub local_time_tanaka: f64,
    pub local_time_band: f64,
    /// `max over zero steps of (λ_t + 1 − sup_{s≤t} M_s) / τ_t` for `φ(x) = x`
    pub sup_ratio: f64,
    /// `sup_t M_t` for `φ(x) = x`, zeros included
    pub sup_m: f64,
    /// `∫_{1/2}^1 h dλ` for `h = 1, u, u², 1_{u>3/4}`
    pub h_integrals: [f64; 4],
    /// first passage of 1 before time 1, with and without bridge touches
    pub t1: Option<f64>,
    pub t1_grid: Option<f64>,
    /// `g_{t∧T₁}` and `B_{t∧T₁}` at `t = 1/2, 1`
    pub g_stopped: [f64; 2],
    pub b_stopped: [f64; 2],
    /// `min(|B|)` over the endpoints of the step holding the last zero
    /// before `T₁ ∧ 1`
    pub stopped_zero_gap: f64,
    pub fine_steps: u64,
}

impl GammaRecord {
    /// Rows for the raw-sample dump.
    pub fn functionals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("b_half", self.b[1]),
            ("b_one", self.b_one),
            ("gamma", self.gamma),
            ("lambda_inf", self.lambda_inf),
            ("local_time", self.local_time),
            ("local_time_tanaka", self.local_time_tanaka),
            ("local_time_band", self.local_time_band),
            ("t1", self.t1.unwrap_or(f64::INFINITY)),
        ]
    }
}

struct GammaVisitor {
    dt: f64,
    eps: f64,
    n_end: u64,
    cps: [u64; 3],
    aux: PathRng,
    rec: GammaRecord,
    lam: f64,
    g: f64,
    gap: f64,
    sup_grid: f64,
    hit: Option<(f64, f64, f64)>,
}

impl GammaVisitor {
    fn new(cfg: &ScenarioConfig, path_id: u64) -> Self {
        let n = cfg.steps();
        let cps = CHECKPOINTS.map(|t| (t * n as f64).round() as u64);
        GammaVisitor {
            dt: cfg.dt,
            eps: cfg.band(),
            n_end: n,
            cps,
            aux: PathRng::new(cfg.seed, REFINE_DOMAIN, path_id),
            rec: GammaRecord {
                path_id,
                b: [0.0; 3],
                lambda: [0.0; 3],
                last_zero: [0.0; 3],
                b_pre: 0.0,
                lambda_pre: 0.0,
                b_one: 0.0,
                gamma: 0.0,
                lambda_inf: 0.0,
                t_after_gamma: 0.0,
                b_after_gamma: 0.0,
                local_time: 0.0,
                local_time_tanaka: 0.0,
                local_time_band: 0.0,
                sup_ratio: 0.0,
                sup_m: 1.0,
                h_integrals: [0.0; 4],
                t1: None,
                t1_grid: None,
                g_stopped: [0.0; 2],
                b_stopped: [0.0; 2],
                stopped_zero_gap: 0.0,
                fine_steps: 0,
            },
            lam: 0.0,
            g: 0.0,
            gap: 0.0,
            sup_grid: 1.0,
            hit: None,
        }
    }

    fn z_at(&self, t: f64, b: f64) -> f64 {
        if t < 1.0 {
            theta(b.abs() / (1.0 - t).sqrt())
        } else if b == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    fn grid_point(&mut self, t: f64, b: f64) {
        let m = self.lam + self.z_at(t, b);
        self.sup_grid = self.sup_grid.max(m);
    }

    /// One step `[t0, t0 + h]` from `a` to `b` with uniform `u`.
    fn cell(&mut self, t0: f64, h: f64, a: f64, b: f64, u: f64) {
        let t1 = t0 + h;
        let l = cell_local_time(a, b, h, u);
        self.rec.local_time += l;
        self.rec.local_time_tanaka += tanaka_increment(a, b);
        self.rec.local_time_band += band_occupation(a, b, h, self.eps) / (2.0 * self.eps);
        let zero = l > 0.0 || a * b <= 0.0;
        if zero {
            self.g = t0 + zero_fraction(a, b) * h;
            self.gap = a.abs().min(b.abs());
            let dl = lambda_weight(t0, t1.min(1.0)) * l;
            self.lam += dl;
            let mid = t0 + 0.5 * h;
            if mid >= 0.5 {
                let hi = &mut self.rec.h_integrals;
                hi[0] += dl;
                hi[1] += mid * dl;
                hi[2] += mid * mid * dl;
                if mid > 0.75 {
                    hi[3] += dl;
                }
            }
            self.rec.t_after_gamma = t1;
            self.rec.b_after_gamma = b;
        }
        self.grid_point(t1, b);
        if zero {
            let tau = if t1 < 1.0 {
                1.0 - theta(2.0 * self.dt.sqrt() / (1.0 - t1).sqrt())
            } else {
                1.0
            };
            let defect = (self.lam + 1.0 - self.sup_grid).max(0.0);
            self.rec.sup_ratio = self.rec.sup_ratio.max(defect / tau);
        }
    }

    fn passage(&mut self, t0: f64, h: f64, a: f64, b: f64, u: f64) {
        let (x, y) = (1.0 - a, 1.0 - b);
        if self.rec.t1_grid.is_none() && x * y <= 0.0 {
            let f = if x == y { 0.0 } else { x / (x - y) };
            self.rec.t1_grid = Some(t0 + f * h);
        }
        if self.hit.is_none() {
            let t = if x * y <= 0.0 {
                Some(t0 + if x == y { 0.0 } else { x / (x - y) } * h)
            } else if touches(1.0, a, b, h, u) {
                Some(t0 + x.abs() / (x.abs() + y.abs()) * h)
            } else {
                None
            };
            if let Some(t) = t {
                self.hit = Some((t, self.g, self.gap));
                self.rec.t1 = Some(t);
            }
        }
    }

    /// The step `[1 − dt, 1]`, halved toward 1 by bridge midpoints so that
    /// `dλ` is weighted on sub-steps where `1/√(1 − u)` stays within √2.
    fn last_cell(&mut self, a: f64, b: f64, u: f64) {
        let t0 = 1.0 - self.dt;
        if touch_probability(0.0, a, b, self.dt) <= NEGLIGIBLE {
            self.cell(t0, self.dt, a, b, u);
            return;
        }
        let mut x = a;
        let mut r = self.dt;
        for _ in 0..TAIL_HALVINGS {
            if touch_probability(0.0, x, b, r) <= NEGLIGIBLE {
                break;
            }
            let m = 0.5 * (x + b) + 0.5 * r.sqrt() * self.aux.normal();
            let v = self.aux.uniform();
            self.cell(1.0 - r, 0.5 * r, x, m, v);
            x = m;
            r *= 0.5;
        }
        let v = self.aux.uniform();
        self.cell(1.0 - r, r, x, b, v);
    }

    fn stopped(&self, b: f64) -> (f64, f64) {
        match self.hit {
            Some((_, g, _)) => (g, 1.0),
            None => (self.g, b),
        }
    }

    fn finish(mut self, fine_steps: u64) -> GammaRecord {
        self.rec.gamma = self.g;
        self.rec.lambda_inf = self.lam;
        self.rec.sup_m = self.sup_grid.max(self.lam + 1.0);
        self.rec.stopped_zero_gap = match self.hit {
            Some((_, _, gap)) => gap,
            None => self.gap,
        };
        self.rec.fine_steps = fine_steps;
        self.rec
    }
}

impl StepVisitor for GammaVisitor {
    fn fine(&mut self, k: u64, a: f64, b: f64, u: f64) -> bool {
        let t0 = k as f64 * self.dt;
        self.passage(t0, self.dt, a, b, u);
        if k + 1 == self.n_end {
            self.last_cell(a, b, u);
        } else {
            self.cell(t0, self.dt, a, b, u);
        }
        false
    }

    fn coarse(&mut self, k0: u64, k1: u64, a: f64, b: f64) -> bool {
        let h = (k1 - k0) as f64 * self.dt;
        self.rec.local_time_tanaka += tanaka_increment(a, b);
        self.rec.local_time_band += band_occupation(a, b, h, self.eps) / (2.0 * self.eps);
        self.grid_point(k1 as f64 * self.dt, b);
        false
    }

    fn checkpoint(&mut self, k: u64, b: f64) {
        if let Some(i) = self.cps.iter().position(|&c| c == k) {
            self.rec.b[i] = b;
            self.rec.lambda[i] = self.lam;
            self.rec.last_zero[i] = self.g;
            if i == 1 {
                let (g, x) = self.stopped(b);
                self.rec.g_stopped[0] = g;
                self.rec.b_stopped[0] = x;
            }
        }
        if k + 1 == self.n_end {
            self.rec.b_pre = b;
            self.rec.lambda_pre = self.lam;
        }
        if k == self.n_end {
            self.rec.b_one = b;
            let (g, x) = self.stopped(b);
            self.rec.g_stopped[1] = g;
            self.rec.b_stopped[1] = x;
        }
    }
}

/// One γ-scenario path from the adaptive sampler.
pub fn gamma_path(cfg: &ScenarioConfig, path_id: u64) -> GammaRecord {
    let mut v = GammaVisitor::new(cfg, path_id);
    let n = v.n_end;
    let cps = [v.cps[0], v.cps[1], v.cps[2], n - 1, n];
    let driver = Driver {
        dt: cfg.dt,
        levels: &[0.0, 1.0],
        checkpoints: &cps,
        end: n,
    };
    let mut rng = PathRng::new(cfg.seed, GAMMA_DOMAIN, path_id);
    let s = driver.drive(&mut rng, &mut v);
    v.finish(s.fine_steps)
}

/// The same record computed from a dense path (horizon 1).
pub fn gamma_path_dense(
    cfg: &ScenarioConfig,
    path: &BrownianPath,
    path_id: u64,
) -> Result<GammaRecord> {
    if path.steps() as u64 != cfg.steps() {
        return Err(LabError::InvalidConfig(
            "dense path does not match the scenario grid".into(),
        ));
    }
    let mut v = GammaVisitor::new(cfg, path_id);
    path.visit(&mut v);
    Ok(v.finish(path.steps() as u64))
}

pub fn gamma_batch(cfg: &ScenarioConfig) -> Result<Vec<GammaRecord>> {
    cfg.validate()?;
    Ok((0..cfg.n as u64)
        .into_par_iter()
        .map(|i| gamma_path(cfg, i))
        .collect())
}

/// One path run until it first reaches 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageRecord {
    pub path_id: u64,
    /// `None` when censored at the horizon cap
    pub t1: Option<f64>,
    /// `ℓ_{T₁}`, bridge-sampled and Tanaka
    pub local_time: f64,
    pub local_time_tanaka: f64,
    /// last zero before `T₁`
    pub g: f64,
    /// smallest doubled horizon covering `T₁` (the cap when censored)
    pub horizon: f64,
    pub fine_steps: u64,
}

impl FirstPassageRecord {
    pub fn functionals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("t1", self.t1.unwrap_or(f64::INFINITY)),
            ("local_time", self.local_time),
            ("local_time_tanaka", self.local_time_tanaka),
            ("g", self.g),
        ]
    }
}

struct PassageVisitor {
    dt: f64,
    rec: FirstPassageRecord,
}

impl StepVisitor for PassageVisitor {
    fn fine(&mut self, k: u64, a: f64, b: f64, u: f64) -> bool {
        let t0 = k as f64 * self.dt;
        let l = cell_local_time(a, b, self.dt, u);
        self.rec.local_time += l;
        self.rec.local_time_tanaka += tanaka_increment(a, b);
        if l > 0.0 || a * b <= 0.0 {
            self.rec.g = t0 + zero_fraction(a, b) * self.dt;
        }
        let (x, y) = (1.0 - a, 1.0 - b);
        let t = if x * y <= 0.0 {
            Some(t0 + if x == y { 0.0 } else { x / (x - y) } * self.dt)
        } else if touches(1.0, a, b, self.dt, u) {
            Some(t0 + x.abs() / (x.abs() + y.abs()) * self.dt)
        } else {
            None
        };
        self.rec.t1 = t;
        t.is_some()
    }

    fn coarse(&mut self, _k0: u64, _k1: u64, a: f64, b: f64) -> bool {
        self.rec.local_time_tanaka += tanaka_increment(a, b);
        false
    }
}

/// First passage of 1 from 0, with the horizon doubled from 1 up to
/// `2^MAX_DOUBLINGS`.
pub fn first_passage_path(cfg: &ScenarioConfig, path_id: u64) -> FirstPassageRecord {
    let n = cfg.steps();
    let cps: Vec<u64> = (0..=MAX_DOUBLINGS).map(|i| n << i).collect();
    let end = *cps.last().expect("nonempty");
    let driver = Driver {
        dt: cfg.dt,
        levels: &[0.0, 1.0],
        checkpoints: &cps,
        end,
    };
    let mut v = PassageVisitor {
        dt: cfg.dt,
        rec: FirstPassageRecord {
            path_id,
            t1: None,
            local_time: 0.0,
            local_time_tanaka: 0.0,
            g: 0.0,
            horizon: 0.0,
            fine_steps: 0,
        },
    };
    let mut rng = PathRng::new(cfg.seed, FIRST_PASSAGE_DOMAIN, path_id);
    let s = driver.drive(&mut rng, &mut v);
    let cap = end as f64 * cfg.dt;
    v.rec.horizon = match v.rec.t1 {
        Some(t) => (0..=MAX_DOUBLINGS)
            .map(|i| (1u64 << i) as f64)
            .find(|&h| h >= t)
            .unwrap_or(cap),
        None => cap,
    };
    v.rec.fine_steps = s.fine_steps;
    v.rec
}

pub fn first_passage_batch(cfg: &ScenarioConfig) -> Result<Vec<FirstPassageRecord>> {
    cfg.validate()?;
    Ok((0..cfg.n as u64)
        .into_par_iter()
        .map(|i| first_passage_path(cfg, i))
        .collect())
}
