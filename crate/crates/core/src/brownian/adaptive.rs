//! Lévy-refinement driver: exact fine-grid law without drawing the steps that
//! cannot carry any event.
//!
//! From the current point `a` at grid index `k` a coarse step of `2^j` fine
//! steps is drawn, with `j` chosen from the distance of `a` to the nearest
//! level. If the Brownian bridge over the coarse step reaches a level with
//! probability above [`NEGLIGIBLE`](super::NEGLIGIBLE), it is split at its
//! midpoint (drawn from the bridge law) and both halves are examined again,
//! down to single fine steps. Fine steps draw one uniform each.

use super::{touch_probability, PathRng, NEGLIGIBLE};

/// Largest coarse step, as a power of two in fine steps.
pub const MAX_COARSE_EXPONENT: u32 = 40;

pub trait StepVisitor {
    /// A materialized fine step `[k, k+1]` with endpoints `a`, `b` and its
    /// uniform. Returning `true` ends the path.
    fn fine(&mut self, k: u64, a: f64, b: f64, u: f64) -> bool;

    /// A coarse step `[k0, k1]` on which no level is reached.
    fn coarse(&mut self, _k0: u64, _k1: u64, _a: f64, _b: f64) -> bool {
        false
    }

    /// The path passes grid index `k` (a requested checkpoint) at value `b`.
    fn checkpoint(&mut self, _k: u64, _b: f64) {}
}

pub struct Driver<'a> {
    pub dt: f64,
    pub levels: &'a [f64],
    /// Sorted grid indices the driver must land on.
    pub checkpoints: &'a [u64],
    pub end: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSummary {
    /// Last grid index reached.
    pub index: u64,
    pub value: f64,
    pub stopped: bool,
    pub fine_steps: u64,
    pub normals: u64,
}

impl Driver<'_> {
    fn exponent(&self, a: f64, k: u64, limit: u64) -> u32 {
        let d = self
            .levels
            .iter()
            .map(|l| (a - l).abs())
            .fold(f64::INFINITY, f64::min);
        let room = limit - k;
        let by_room = 63 - room.leading_zeros();
        let target = (d / 6.0).powi(2) / self.dt;
        let by_dist = if target < 1.0 {
            0
        } else {
            (target.log2().floor() as u32).min(MAX_COARSE_EXPONENT)
        };
        by_dist.min(by_room)
    }

    fn needs_split(&self, a: f64, b: f64, h: f64) -> bool {
        self.levels
            .iter()
            .any(|&l| touch_probability(l, a, b, h) > NEGLIGIBLE)
    }

    /// Returns `true` if the visitor stopped.
    #[allow(clippy::too_many_arguments)]
    fn refine<V: StepVisitor>(
        &self,
        rng: &mut PathRng,
        v: &mut V,
        s: &mut DriveSummary,
        k: u64,
        j: u32,
        a: f64,
        b: f64,
    ) -> bool {
        if j == 0 {
            s.fine_steps += 1;
            let u = rng.uniform();
            return v.fine(k, a, b, u);
        }
        let span = 1u64 << j;
        let h = span as f64 * self.dt;
        if !self.needs_split(a, b, h) {
            return v.coarse(k, k + span, a, b);
        }
        let m = 0.5 * (a + b) + 0.5 * h.sqrt() * rng.normal();
        s.normals += 1;
        self.refine(rng, v, s, k, j - 1, a, m) || self.refine(rng, v, s, k + span / 2, j - 1, m, b)
    }

    pub fn drive<V: StepVisitor>(&self, rng: &mut PathRng, v: &mut V) -> DriveSummary {
        let mut s = DriveSummary {
            index: 0,
            value: 0.0,
            stopped: false,
            fine_steps: 0,
            normals: 0,
        };
        let mut next_cp = 0;
        while s.index < self.end {
            while next_cp < self.checkpoints.len() && self.checkpoints[next_cp] <= s.index {
                if self.checkpoints[next_cp] == s.index {
                    v.checkpoint(s.index, s.value);
                }
                next_cp += 1;
            }
            let limit = self
                .checkpoints
                .get(next_cp)
                .copied()
                .unwrap_or(self.end)
                .min(self.end);
            let j = self.exponent(s.value, s.index, limit);
            let span = 1u64 << j;
            let b = s.value + (span as f64 * self.dt).sqrt() * rng.normal();
            s.normals += 1;
            let (k, a) = (s.index, s.value);
            if self.refine(rng, v, &mut s, k, j, a, b) {
                s.stopped = true;
                return s;
            }
            s.index += span;
            s.value = b;
        }
        while next_cp < self.checkpoints.len() {
            if self.checkpoints[next_cp] == s.index {
                v.checkpoint(s.index, s.value);
            }
            next_cp += 1;
        }
        s
    }
}
