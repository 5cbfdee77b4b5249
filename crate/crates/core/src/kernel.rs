//! Coupling kernel over space and imaginary time, its Fourier transform, and
//! the imaginary-time eigenvalue table.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ClassicalParams;
use crate::quad::CompensatedSum;

/// Representative of `rho` mod `m` in `[-(m-1)/2, (m-1)/2]`.
pub fn minimal_image(rho: i64, m: usize) -> i64 {
    let m = m as i64;
    let r = rho.rem_euclid(m);
    if r > m / 2 {
        r - m
    } else {
        r
    }
}

/// Long-range imaginary-time pair coupling alpha (pi/M)^2 / sin^2(pi rho / M).
pub fn dissipative_weight(rho: i64, p: &ClassicalParams) -> Result<f64> {
    let r = minimal_image(rho, p.m);
    if r == 0 {
        return Err(Error::InvalidParams(format!(
            "rho = {rho} is 0 mod M = {}: no self-coupling",
            p.m
        )));
    }
    let m = p.m as f64;
    let s = (PI * r.unsigned_abs() as f64 / m).sin();
    Ok(p.alpha * (PI / m).powi(2) / (s * s))
}

/// S_nu = (pi/M)^2 sum_{rho=1}^{(M-1)/2} cos(2 pi nu rho / M) / sin^2(pi rho / M).
pub fn s_exact(nu: i64, m: usize) -> f64 {
    let mf = m as f64;
    let nu = minimal_image(nu, m);
    let half = (m as i64 - 1) / 2;
    let mut acc = CompensatedSum::default();
    for rho in 1..=half {
        // reduce nu*rho mod M so the cosine argument stays small
        let phase = (nu * rho).rem_euclid(m as i64) as f64;
        let s = (PI * rho as f64 / mf).sin();
        acc.add((2.0 * PI * phase / mf).cos() / (s * s));
    }
    (PI / mf).powi(2) * acc.value()
}

/// pi^2 (1/6 - |nu|/M).
pub fn s_asymptotic(nu: i64, m: usize) -> f64 {
    PI * PI * (1.0 / 6.0 - nu.unsigned_abs() as f64 / m as f64)
}

pub fn kappa(nu: i64, m: usize) -> f64 {
    2.0 * PI * nu as f64 / m as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpectrum {
    /// lambda_nu for nu = -(M-1)/2 ..= (M-1)/2, stored at index nu + (M-1)/2.
    pub lambda: Vec<f64>,
    pub s: Vec<f64>,
    pub ktilde_max: f64,
    pub params: ClassicalParams,
}

impl KernelSpectrum {
    pub fn new(p: &ClassicalParams) -> Result<Self> {
        p.validate()?;
        let m = p.m;
        let half = (m as i64 - 1) / 2;
        let s_pos: Vec<f64> = (0..=half).map(|nu| s_exact(nu, m)).collect();
        let mut lambda = Vec::with_capacity(m);
        let mut s = Vec::with_capacity(m);
        for nu in -half..=half {
            let sv = s_pos[nu.unsigned_abs() as usize];
            s.push(sv);
            lambda.push(2.0 * p.kperp * kappa(nu, m).cos() + 2.0 * p.alpha * sv);
        }
        let lambda0 = lambda[half as usize];
        Ok(Self {
            lambda,
            s,
            ktilde_max: 2.0 * p.d * p.k + lambda0,
            params: *p,
        })
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn half(&self) -> i64 {
        (self.params.m as i64 - 1) / 2
    }

    pub fn nus(&self) -> impl Iterator<Item = i64> {
        let h = self.half();
        -h..=h
    }

    pub fn lambda_at(&self, nu: i64) -> f64 {
        self.lambda[(minimal_image(nu, self.m()) + self.half()) as usize]
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda[self.half() as usize]
    }

    /// lambda_0 - lambda_nu >= 0 for every nu.
    pub fn gaps(&self) -> Vec<f64> {
        let l0 = self.lambda0();
        self.lambda.iter().map(|l| (l0 - l).max(0.0)).collect()
    }
}

/// K~(k, kappa_nu) = 2K sum_a cos k_a + 2Kperp cos kappa_nu + 2 alpha S_nu.
pub fn k_tilde(k: &[f64], nu: i64, p: &ClassicalParams) -> f64 {
    let spatial: f64 = k.iter().map(|ka| ka.cos()).sum();
    2.0 * p.k * spatial + 2.0 * p.kperp * kappa(nu, p.m).cos() + 2.0 * p.alpha * s_exact(nu, p.m)
}

/// Small-(k, kappa) form K k^2 + Kperp kappa^2 + pi alpha |kappa|.
pub fn near_critical_gap(k: &[f64], kappa: f64, p: &ClassicalParams) -> f64 {
    let k2: f64 = k.iter().map(|ka| ka * ka).sum();
    p.k * k2 + p.kperp * kappa * kappa + PI * p.alpha * kappa.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64, m: usize) -> ClassicalParams {
        ClassicalParams::new(1.0, 0.3, 1.0, alpha, 0.0, m).unwrap()
    }

    #[test]
    fn weight_examples() {
        let w = dissipative_weight(1, &p(1.0, 3)).unwrap();
        assert!((w - 4.0 * PI * PI / 27.0).abs() < 1e-14);
        assert!(dissipative_weight(0, &p(1.0, 3)).is_err());
        assert!(dissipative_weight(6, &p(1.0, 3)).is_err());
        let pm = p(0.7, 101);
        for rho in 1..101 {
            let a = dissipative_weight(rho, &pm).unwrap();
            let b = dissipative_weight(101 - rho, &pm).unwrap();
            let c = dissipative_weight(-rho, &pm).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
        let far = dissipative_weight(50, &pm).unwrap();
        assert!((far / (0.7 * (PI / 101.0).powi(2)) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn s_small_cases() {
        assert!((s_exact(0, 3) - 4.0 * PI * PI / 27.0).abs() < 1e-14);
        assert!((s_exact(0, 1001) - PI * PI / 6.0).abs() < 10.0 / 1001f64.powi(2));
        assert!((s_asymptotic(0, 77) - PI * PI / 6.0).abs() < 1e-15);
        assert!(s_asymptotic(11, 66).abs() < 1e-14);
    }

    #[test]
    fn spectrum_table_matches_k_tilde() {
        let pp = ClassicalParams::new(2.0, 0.3, 1.0, 0.2, 0.0, 21).unwrap();
        let spec = KernelSpectrum::new(&pp).unwrap();
        for nu in spec.nus() {
            let kt = k_tilde(&[0.0, 0.0], nu, &pp);
            assert!((spec.lambda_at(nu) - (kt - 4.0 * pp.k)).abs() < 1e-13);
        }
        assert_eq!(
            spec.lambda0(),
            spec.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        );
        assert!((spec.ktilde_max - k_tilde(&[0.0, 0.0], 0, &pp)).abs() < 1e-13);
    }
}
