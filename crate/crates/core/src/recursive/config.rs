use serde::{Deserialize, Serialize};

use crate::error::{LpError, Result};

/// How many independent repetitions each randomized piece gets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Amplification {
    /// Copies of the grid base per ladder (2/3 -> at least 5/6).
    pub base_copies: usize,
    /// Copies of every norm-level scheme. `None` means
    /// `ceil(log2(3 log2 p))`, enough to reach `1 - 1/(3 log2 p)`.
    pub norm_copies: Option<usize>,
    /// Failure probability each leaf l2 table set is sized for.
    pub l2_delta_fail: f64,
}

impl Default for Amplification {
    fn default() -> Self {
        Amplification {
            base_copies: 3,
            norm_copies: None,
            l2_delta_fail: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub p: f64,
    pub r: f64,
    /// Space/approximation knob in `(0, 1]`; covers use `beta = log2(p) / delta`.
    pub delta: f64,
    #[serde(default)]
    pub amplification: Amplification,
    pub seed: u64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            p: 4.0,
            r: 1.0,
            delta: 1.0,
            amplification: Amplification::default(),
            seed: 0,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 2.0) {
            return Err(LpError::usage(format!("top-level norm exponent must exceed 2, got {}", self.p)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(LpError::usage(format!("radius must be positive, got {}", self.r)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(LpError::usage(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        let amp = &self.amplification;
        if amp.base_copies == 0 || amp.norm_copies == Some(0) {
            return Err(LpError::usage("amplification copy counts must be at least 1"));
        }
        if !(amp.l2_delta_fail > 0.0 && amp.l2_delta_fail < 1.0) {
            return Err(LpError::usage(format!(
                "l2 failure probability must lie in (0, 1), got {}",
                amp.l2_delta_fail
            )));
        }
        Ok(())
    }

    /// Cover parameter for a scheme running in `l_{p_eff}`.
    pub fn beta_for(&self, p_eff: f64) -> f64 {
        p_eff.log2() / self.delta
    }

    pub fn norm_copies_for(&self, p_eff: f64) -> usize {
        self.amplification
            .norm_copies
            .unwrap_or_else(|| ((3.0 * p_eff.log2()).log2().ceil() as usize).max(1))
    }
}

/// Result of reducing an arbitrary `p > 2` to a power of two `<= log2 d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedNorm {
    pub p: f64,
    pub p_eff: f64,
    /// `d^(1/p_eff - 1/p) >= 1`.
    pub holder_factor: f64,
}

/// `p_eff = 2^floor(log2 min(p, log2 d))`, never below 2.
pub fn normalize_norm(p: f64, d: usize) -> NormalizedNorm {
    let log_d = (d.max(1) as f64).log2();
    let clamped = p.min(log_d);
    let p_eff = if clamped < 2.0 {
        2.0
    } else {
        2f64.powi(clamped.log2().floor() as i32)
    };
    let holder_factor = if p_eff == p {
        1.0
    } else {
        (d as f64).powf(1.0 / p_eff - 1.0 / p)
    };
    NormalizedNorm {
        p,
        p_eff,
        holder_factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_norm(4.0, 32).p_eff, 4.0);
        assert_eq!(normalize_norm(4.0, 32).holder_factor, 1.0);
        assert_eq!(normalize_norm(8.0, 32).p_eff, 4.0);
        assert_eq!(normalize_norm(8.0, 256).p_eff, 8.0);
        assert_eq!(normalize_norm(6.0, 1 << 20).p_eff, 4.0);
        assert_eq!(normalize_norm(3.0, 1 << 20).p_eff, 2.0);
        assert_eq!(normalize_norm(16.0, 2).p_eff, 2.0);
        let n = normalize_norm(6.0, 1024);
        assert!((n.holder_factor - 1024f64.powf(0.25 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn holder_factor_bounds_the_norm_change() {
        // |v|_p <= |v|_{p_eff} <= holder * |v|_p for p_eff <= p
        use crate::geometry::lp_norm;
        let v: Vec<f64> = (0..32).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let n = normalize_norm(8.0, 32);
        let a = lp_norm(&v, 8.0);
        let b = lp_norm(&v, n.p_eff);
        assert!(a <= b && b <= n.holder_factor * a * (1.0 + 1e-12));
    }

    #[test]
    fn config_validation() {
        let ok = SchemeConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.beta_for(4.0), 2.0);
        assert_eq!(ok.norm_copies_for(4.0), 3);
        assert_eq!(ok.norm_copies_for(8.0), 4);
        for bad in [
            SchemeConfig { p: 2.0, ..ok.clone() },
            SchemeConfig { r: 0.0, ..ok.clone() },
            SchemeConfig { delta: 0.0, ..ok.clone() },
            SchemeConfig { delta: 1.5, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
