//! Approximation-factor calculator for the double recursion.
//!
//! One refinement step turns a `(c_base, r)` scheme for `lp` into a
//! `(c_new, r)` scheme using a `(c_t, r)` scheme for `lt`:
//!
//! ```text
//! c_new = (p/t)^(t/p) * c_t^(t/p) * (4 * beta_eff * c_base)^(1 - t/p)
//! ```
//!
//! With `t = p/2` this is `sqrt(8 beta_eff c_t c_base)`. A norm level runs
//! `k = ceil(log2 log2 c0)` steps starting from the grid scheme's `c0`, and
//! the levels chain `l2 -> l4 -> ... -> lp`.

use serde::{Deserialize, Serialize};

use super::config::{normalize_norm, SchemeConfig};
use crate::base::{coarse_approx, L2_APPROX};
use crate::cover::diameter_constant;

/// Approximation after one refinement step.
pub fn c_new(p: f64, t: f64, c_t: f64, beta_eff: f64, c_base: f64) -> f64 {
    let e = t / p;
    (p / t).powf(e) * c_t.powf(e) * (4.0 * beta_eff * c_base).powf(1.0 - e)
}

/// Number of refinement steps, `ceil(log2 log2 c0)`.
pub fn ladder_length(c0: f64) -> usize {
    if c0 <= 2.0 {
        return 0;
    }
    c0.log2().log2().ceil().max(0.0) as usize
}

/// Which constants the calculator plugs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundConstants {
    /// Cover diameter `(4 ceil(beta) - 2) * radius` as certified by the coarsening
    /// construction, `c_2 = 2`, grid base `c0 = 4 d^(1 + 1/t)`.
    Implemented,
    /// Ideal covers of diameter `beta * radius`; each norm level, the l2 base
    /// included, is charged the closed-form factor `16 beta`.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBound {
    /// Norm exponent `t = 2^i` at this level.
    pub t: f64,
    pub c0: f64,
    pub k: usize,
    pub beta: f64,
    pub beta_eff: f64,
    /// Approximation of the `l_{t/2}` schemes the ladder queries.
    pub c_half: f64,
    /// `c_0, c_1, ..., c_k`.
    pub ladder: Vec<f64>,
    /// Guaranteed approximation of this level.
    pub c_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationBound {
    pub constants: BoundConstants,
    pub p: f64,
    /// Power of two the scheme actually runs in.
    pub p_eff: f64,
    pub d: usize,
    /// `d^(1/p_eff - 1/p)`, the cost of running in `l_{p_eff}` instead of `lp`.
    pub holder_factor: f64,
    pub beta: f64,
    pub c_l2: f64,
    /// Levels `t = 4, 8, ..., p_eff`.
    pub levels: Vec<LevelBound>,
    pub c_p_eff: f64,
    /// Guaranteed approximation in the original `lp`.
    pub c_p: f64,
    /// `(16 beta)^(log2 p_eff)`.
    pub closed_form: f64,
}

impl ApproximationBound {
    pub fn level(&self, t: f64) -> Option<&LevelBound> {
        self.levels.iter().find(|l| l.t == t)
    }

    /// Guaranteed approximation of the `l_t` schemes, `t` a power of two.
    pub fn c_at(&self, t: f64) -> f64 {
        if t <= 2.0 {
            return self.c_l2;
        }
        self.level(t).map(|l| l.c_t).unwrap_or(f64::INFINITY)
    }
}

/// Iterate `c_j = min(c_new(c_{j-1}), c_{j-1})` for `k` steps.
pub(crate) fn iterate_ladder(t: f64, c_half: f64, beta_eff: f64, c0: f64, k: usize) -> Vec<f64> {
    let mut ladder = Vec::with_capacity(k + 1);
    ladder.push(c0);
    for _ in 0..k {
        let prev = *ladder.last().unwrap();
        ladder.push(c_new(t, t / 2.0, c_half, beta_eff, prev).min(prev));
    }
    ladder
}

pub fn approximation_bound(config: &SchemeConfig, d: usize, constants: BoundConstants) -> ApproximationBound {
    let norm = normalize_norm(config.p, d);
    let beta = config.beta_for(norm.p_eff);
    let beta_eff = match constants {
        BoundConstants::Implemented => diameter_constant(beta) * beta,
        BoundConstants::Paper => beta,
    };
    let c_l2 = match constants {
        BoundConstants::Implemented => L2_APPROX,
        BoundConstants::Paper => 16.0 * beta,
    };

    let mut levels = Vec::new();
    let mut c_half = c_l2;
    let mut t = 4.0;
    while t <= norm.p_eff {
        let c0 = coarse_approx(d, t);
        let k = ladder_length(c0);
        let ladder = iterate_ladder(t, c_half, beta_eff, c0, k);
        let c_t = match constants {
            BoundConstants::Implemented => *ladder.last().unwrap(),
            BoundConstants::Paper => 16.0 * beta * c_half,
        };
        levels.push(LevelBound {
            t,
            c0,
            k,
            beta,
            beta_eff,
            c_half,
            ladder,
            c_t,
        });
        c_half = c_t;
        t *= 2.0;
    }
    let c_p_eff = c_half;
    ApproximationBound {
        constants,
        p: config.p,
        p_eff: norm.p_eff,
        d,
        holder_factor: norm.holder_factor,
        beta,
        c_l2,
        levels,
        c_p_eff,
        c_p: c_p_eff * norm.holder_factor,
        closed_form: (16.0 * beta).powf(norm.p_eff.log2()),
    }
}
