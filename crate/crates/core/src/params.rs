//! Quantum and classical parameter records and the map between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumParams {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
    pub h0: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    pub d: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Kperp")]
    pub kperp: f64,
    pub alpha: f64,
    pub h: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

fn check_m(m: usize) -> Result<()> {
    if m < 3 {
        return Err(Error::InvalidParams(format!("M must be >= 3, got {m}")));
    }
    if m % 2 == 0 {
        return Err(Error::InvalidParams(format!("M must be odd, got {m}")));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")))
    }
}

impl QuantumParams {
    pub fn validate(&self) -> Result<()> {
        positive("A", self.a)?;
        positive("B", self.b)?;
        positive("J0", self.j0)?;
        positive("beta", self.beta)?;
        if !self.h0.is_finite() {
            return Err(Error::InvalidParams("h0 must be finite".into()));
        }
        check_m(self.m)
    }
}

impl ClassicalParams {
    pub fn new(d: f64, k: f64, kperp: f64, alpha: f64, h: f64, m: usize) -> Result<Self> {
        let p = Self { d, k, kperp, alpha, h, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("d", self.d)?;
        positive("K", self.k)?;
        positive("Kperp", self.kperp)?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be nonnegative and finite, got {}",
                self.alpha
            )));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidParams("h must be finite".into()));
        }
        check_m(self.m)
    }

    /// Spatial dimension as an integer, for the lattice engines.
    pub fn int_dim(&self) -> Result<usize> {
        let d = self.d.round();
        if (self.d - d).abs() > 1e-12 || d < 1.0 {
            return Err(Error::InvalidParams(format!(
                "this engine needs an integer dimension, got d = {}",
                self.d
            )));
        }
        Ok(d as usize)
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// G = 1/(K K⊥).
    pub fn coupling_g(&self) -> f64 {
        1.0 / (self.k * self.kperp)
    }
}

/// -1/2 ln tanh(x), evaluated without cancellation for small and large x.
fn half_neg_log_tanh(x: f64) -> f64 {
    // tanh x = (1 - e^{-2x}) / (1 + e^{-2x})
    let e = (-2.0 * x).exp();
    -0.5 * ((-e).ln_1p() - e.ln_1p())
}

/// Maps the spin-boson parameters to classical couplings; `d` and `alpha`
/// come from the run configuration.
pub fn map_quantum_to_classical(q: &QuantumParams, d: f64, alpha: f64) -> Result<ClassicalParams> {
    q.validate()?;
    let step = q.beta / q.m as f64;
    let x = step * q.a;
    let kperp = half_neg_log_tanh(x);
    if !(kperp > 0.0) || !kperp.is_normal() {
        return Err(Error::InvalidParams(format!(
            "beta*A/M = {x} is too large: tanh rounds to 1 and Kperp loses all precision"
        )));
    }
    ClassicalParams::new(d, step * q.b * q.j0, kperp, alpha, step * q.b * q.h0, q.m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub ratio_alpha_kperp: f64,
    pub ratio_k_alpha: f64,
    pub small_trotter_ok: bool,
    pub notes: String,
}

pub const DEFAULT_REGIME_THRESHOLDS: (f64, f64) = (0.3, 0.3);

/// Checks 1 >> alpha/Kperp >> K/alpha. The first threshold bounds alpha/Kperp,
/// the second bounds K/alpha, and K/alpha must also sit below alpha/Kperp.
pub fn validate_regime(p: &ClassicalParams, thresholds: (f64, f64)) -> RegimeReport {
    let ratio_alpha_kperp = p.alpha / p.kperp;
    if p.alpha <= 0.0 {
        return RegimeReport {
            ratio_alpha_kperp,
            ratio_k_alpha: f64::INFINITY,
            small_trotter_ok: false,
            notes: "no dissipation".into(),
        };
    }
    let ratio_k_alpha = p.k / p.alpha;
    let mut notes = Vec::new();
    if ratio_alpha_kperp >= thresholds.0 {
        notes.push(format!("alpha/Kperp = {ratio_alpha_kperp} is not small"));
    }
    if ratio_k_alpha >= thresholds.1 {
        notes.push(format!("K/alpha = {ratio_k_alpha} is not small"));
    }
    if ratio_k_alpha >= ratio_alpha_kperp {
        notes.push("K/alpha is not below alpha/Kperp".into());
    }
    RegimeReport {
        ratio_alpha_kperp,
        ratio_k_alpha,
        small_trotter_ok: notes.is_empty(),
        notes: if notes.is_empty() { "ok".into() } else { notes.join("; ") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(beta: f64, m: usize) -> QuantumParams {
        QuantumParams { a: 1.0, b: 1.0, j0: 1.0, h0: 0.0, beta, m }
    }

    #[test]
    fn map_at_step_point_one() {
        let c = map_quantum_to_classical(&q(10.1, 101), 1.0, 0.2).unwrap();
        assert!((c.k - 0.1).abs() < 1e-15);
        // -1/2 ln tanh(0.1)
        assert!((c.kperp - 1.152_955_335_176_055_9).abs() < 1e-14);
        assert_eq!(c.h, 0.0);
        assert_eq!(c.alpha, 0.2);
    }

    #[test]
    fn tanh_saturation_rejected() {
        assert!(map_quantum_to_classical(&q(1e4, 3), 1.0, 0.0).is_err());
    }

    #[test]
    fn even_or_small_m_rejected() {
        assert!(map_quantum_to_classical(&q(1.0, 100), 1.0, 0.0).is_err());
        assert!(ClassicalParams::new(1.0, 0.1, 1.0, 0.0, 0.0, 1).is_err());
        let msg = ClassicalParams::new(1.0, 0.1, 1.0, 0.0, 0.0, 100).unwrap_err().to_string();
        assert!(msg.contains("M must be odd"));
    }

    #[test]
    fn regime_examples() {
        let p = ClassicalParams::new(1.0, 0.01, 2.0, 0.2, 0.0, 101).unwrap();
        assert!(validate_regime(&p, (0.5, 0.5)).small_trotter_ok);
        let p0 = p.with_alpha(0.0);
        let r = validate_regime(&p0, DEFAULT_REGIME_THRESHOLDS);
        assert!(!r.small_trotter_ok);
        assert_eq!(r.notes, "no dissipation");
        let p1 = ClassicalParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 101).unwrap();
        assert!(!validate_regime(&p1, DEFAULT_REGIME_THRESHOLDS).small_trotter_ok);
    }

    #[test]
    fn stable_log_tanh_matches_naive_in_midrange() {
        for x in [0.01, 0.3, 1.0, 3.0] {
            let naive = -0.5 * (x as f64).tanh().ln();
            assert!((half_neg_log_tanh(x) - naive).abs() < 1e-14 * naive.abs().max(1.0));
        }
        // large x: -1/2 ln tanh x ~ e^{-2x}
        assert!((half_neg_log_tanh(20.0) / (-40f64).exp() - 1.0).abs() < 1e-12);
    }
}
