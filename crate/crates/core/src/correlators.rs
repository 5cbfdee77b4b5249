//! Two-point functions G(r, rho): lattice (exact, infinite N), finite-L mode
//! sums, the continuum propagator, and the analyses built on them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aux_time::{box_factor, kappa_factor, kappa_factor_closed_form, lattice_box, semi_infinite, NuSum};
use crate::error::{Error, Result};
use crate::fit::{fit_line, window_of, FitReport};
use crate::kernel::{kappa, KernelSpectrum};
use crate::oracle::{greens_by_dense_solve, DenseSystem};
use crate::params::{validate_regime, ClassicalParams, DEFAULT_REGIME_THRESHOLDS};
use crate::quad::CompensatedSum;
use crate::saddle::{SaddleSolution, DEFAULT_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreensEngine {
    ModeSum,
    InfiniteN,
    Continuum,
    DenseOracle,
}

impl GreensEngine {
    pub fn name(self) -> &'static str {
        match self {
            GreensEngine::ModeSum => "mode-sum",
            GreensEngine::InfiniteN => "infinite-N",
            GreensEngine::Continuum => "continuum",
            GreensEngine::DenseOracle => "dense-oracle",
        }
    }
}

fn gap_of(z: f64, spec: &KernelSpectrum) -> Result<f64> {
    let u = 2.0 * z - spec.ktilde_max;
    if !(u > 0.0) {
        return Err(Error::NotPositiveDefinite { gap: u });
    }
    Ok(u)
}

fn check_dim(r: &[i64], d: usize) -> Result<()> {
    if r.len() != d {
        return Err(Error::InvalidParams(format!(
            "displacement has {} components, lattice has d = {d}",
            r.len()
        )));
    }
    Ok(())
}

/// Exact infinite-N lattice propagator with M slices,
/// int_0^inf dt e^{-ut} prod_a e^{-2Kt} I_{r_a}(2Kt) (1/M) sum_nu e^{-(lambda_0 - lambda_nu)t} cos(kappa_nu rho).
pub fn greens_infinite_n(r: &[i64], rho: i64, z: f64, spec: &KernelSpectrum) -> Result<f64> {
    greens_infinite_n_tol(r, rho, z, spec, DEFAULT_REL_TOL)
}

pub fn greens_infinite_n_tol(r: &[i64], rho: i64, z: f64, spec: &KernelSpectrum, rel_tol: f64) -> Result<f64> {
    let p = &spec.params;
    let d = p.int_dim()?;
    check_dim(r, d)?;
    let u = gap_of(z, spec)?;
    let nusum = NuSum::new(spec, rho);
    let rate = 2.0 * d as f64 * p.k + nusum.max_gap + u;
    let f = |t: f64| (-u * t).exp() * lattice_box(t, r, p.k, d) * nusum.eval(t);
    semi_infinite(f, rate, u, d as f64 / 2.0, rel_tol, "lattice Green's function")
}

/// Finite-L mode sum (1/(L^d M)) sum_{k, nu} cos(k.r) cos(kappa_nu rho) / (2z - K~(k, kappa_nu)).
pub fn greens_mode_sum(r: &[i64], rho: i64, z: f64, l: usize, spec: &KernelSpectrum) -> Result<f64> {
    let p = &spec.params;
    let d = p.int_dim()?;
    check_dim(r, d)?;
    gap_of(z, spec)?;
    if l == 0 {
        return Err(Error::InvalidParams("L must be positive".into()));
    }
    let m = spec.m();
    let temporal: Vec<(f64, f64)> = spec
        .nus()
        .map(|nu| {
            let phase = kappa((nu * rho).rem_euclid(m as i64), m).cos();
            (2.0 * z - spec.lambda_at(nu), phase)
        })
        .collect();
    let li = l as i64;
    let mut acc = CompensatedSum::default();
    let n_sites = l.pow(d as u32);
    for site in 0..n_sites {
        let mut rem = site;
        let mut spatial = 0.0;
        let mut phase_num = 0i64;
        for &ra in r {
            let n = (rem % l) as i64;
            rem /= l;
            spatial += (2.0 * PI * n as f64 / l as f64).cos();
            phase_num += n * ra;
        }
        let cos_kr = (2.0 * PI * phase_num.rem_euclid(li) as f64 / l as f64).cos();
        let shift = 2.0 * p.k * spatial;
        for &(base, cos_q) in &temporal {
            acc.add(cos_kr * cos_q / (base - shift));
        }
    }
    Ok(acc.value() / (n_sites * m) as f64)
}

/// Continuum propagator
/// int d^dk dkappa / (2pi)^{d+1} e^{i(k.r + kappa rho)} / (u + K k^2 + Kperp kappa^2 + pi alpha |kappa|)
/// over the box |k_a|, |kappa| <= pi, through the auxiliary-time route.
pub fn greens_continuum(r: &[i64], rho: i64, u: f64, p: &ClassicalParams) -> Result<f64> {
    greens_continuum_tol(r, rho, u, p, DEFAULT_REL_TOL)
}

pub fn greens_continuum_tol(r: &[i64], rho: i64, u: f64, p: &ClassicalParams, rel_tol: f64) -> Result<f64> {
    let d = p.int_dim()?;
    check_dim(r, d)?;
    if !(u > 0.0) {
        return Err(Error::InvalidParams(format!(
            "continuum propagator needs u > 0, got {u}"
        )));
    }
    let f = |t: f64| {
        let spatial: f64 = r.iter().map(|&ra| box_factor(t, ra, p.k)).product();
        (-u * t).exp() * spatial * kappa_factor(t, rho, p.kperp, p.alpha)
    };
    let rate = PI * PI * (d as f64 * p.k + p.kperp + p.alpha) + u;
    let power = if p.alpha > 0.0 { d as f64 / 2.0 + 1.0 } else { (d as f64 + 1.0) / 2.0 };
    semi_infinite(f, rate, u, power, rel_tol, "continuum Green's function")
}

/// int_{-pi}^{pi} dkappa/2pi e^{-Kperp t kappa^2 - pi alpha t |kappa| + i kappa rho}
/// in closed form via erfcx.
pub fn kappa_erfcx_integral(t: f64, rho: i64, p: &ClassicalParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
    }
    Ok(kappa_factor_closed_form(t, rho, p.kperp, p.alpha))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreensSample {
    pub r: Vec<i64>,
    pub rho: i64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreensTable {
    pub samples: Vec<GreensSample>,
    pub engine: GreensEngine,
    /// Saddle multiplier; NaN for the continuum engine, which works in u.
    pub z: f64,
    pub u: f64,
    pub params: ClassicalParams,
}

impl GreensTable {
    pub fn get(&self, r: &[i64], rho: i64) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| s.r == r && s.rho == rho)
            .map(|s| s.value)
    }
}

pub enum GreensSource<'a> {
    ModeSum { spec: &'a KernelSpectrum, z: f64, l: usize },
    InfiniteN { spec: &'a KernelSpectrum, z: f64 },
    Continuum { params: &'a ClassicalParams, u: f64 },
    DenseOracle { sys: &'a DenseSystem, z: f64 },
}

/// Evaluates G at every displacement; lattice and continuum points run in parallel.
pub fn build_greens_table(source: &GreensSource, displacements: &[(Vec<i64>, i64)]) -> Result<GreensTable> {
    let (engine, z, u, params) = match source {
        GreensSource::ModeSum { spec, z, .. } => (GreensEngine::ModeSum, *z, gap_of(*z, spec)?, spec.params),
        GreensSource::InfiniteN { spec, z } => (GreensEngine::InfiniteN, *z, gap_of(*z, spec)?, spec.params),
        GreensSource::Continuum { params, u } => (GreensEngine::Continuum, f64::NAN, *u, **params),
        GreensSource::DenseOracle { sys, z } => {
            let spec = KernelSpectrum::new(&sys.params)?;
            (GreensEngine::DenseOracle, *z, 2.0 * z - spec.ktilde_max, sys.params)
        }
    };
    let values: Vec<f64> = match source {
        GreensSource::DenseOracle { sys, z } => {
            let column = greens_by_dense_solve(sys, *z, 0)?;
            displacements
                .iter()
                .map(|(r, rho)| {
                    let x: Vec<usize> = r.iter().map(|ra| ra.rem_euclid(sys.l as i64) as usize).collect();
                    let tau = rho.rem_euclid(sys.m as i64) as usize;
                    column[sys.index(&x, tau)]
                })
                .collect()
        }
        _ => displacements
            .par_iter()
            .map(|(r, rho)| match source {
                GreensSource::ModeSum { spec, z, l } => greens_mode_sum(r, *rho, *z, *l, spec),
                GreensSource::InfiniteN { spec, z } => greens_infinite_n(r, *rho, *z, spec),
                GreensSource::Continuum { params, u } => greens_continuum(r, *rho, *u, params),
                GreensSource::DenseOracle { .. } => unreachable!(),
            })
            .collect::<Result<_>>()?,
    };
    Ok(GreensTable {
        samples: displacements
            .iter()
            .zip(values)
            .map(|((r, rho), value)| GreensSample { r: r.clone(), rho: *rho, value })
            .collect(),
        engine,
        z,
        u,
        params,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationLengthFit {
    pub report: FitReport,
    pub xi_fit: f64,
    pub xi_theory: f64,
}

/// Log-linear fit of ln G(r e_1, 0) against r over `window` (inclusive).
pub fn fit_correlation_length(table: &GreensTable, window: (i64, i64)) -> Result<CorrelationLengthFit> {
    let mut pts: Vec<(f64, f64)> = table
        .samples
        .iter()
        .filter(|s| s.rho == 0 && s.r.iter().skip(1).all(|&x| x == 0))
        .filter(|s| s.r[0] >= window.0 && s.r[0] <= window.1)
        .map(|s| (s.r[0] as f64, s.value))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < 4 {
        return Err(Error::Fit(format!(
            "correlation-length window holds {} points, need at least 4",
            pts.len()
        )));
    }
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Err(Error::Fit("non-positive G in the correlation-length window".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    let regime = validate_regime(&table.params, DEFAULT_REGIME_THRESHOLDS).small_trotter_ok;
    let report = FitReport::new("ln_G_vs_r", table.engine.name(), line, window_of(&xs), xs.len()).with_regime(regime);
    Ok(CorrelationLengthFit {
        xi_fit: -1.0 / line.slope,
        xi_theory: (table.params.k / table.u).sqrt(),
        report,
    })
}

/// alpha / (u rho)^2.
pub fn tail_leading(rho: i64, u: f64, p: &ClassicalParams) -> f64 {
    p.alpha / (u * rho as f64).powi(2)
}

/// alpha / (u rho)^2 - (-1)^rho (2Kperp + alpha) / ([u + pi^2 (Kperp + alpha)] rho)^2.
pub fn tail_refined(rho: i64, u: f64, p: &ClassicalParams) -> f64 {
    let sign = if rho.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let damped = u + PI * PI * (p.kperp + p.alpha);
    tail_leading(rho, u, p) - sign * (2.0 * p.kperp + p.alpha) / (damped * rho as f64).powi(2)
}

pub const DEFAULT_TAIL_MULTIPLIER: f64 = 10.0;

/// First rho with u rho >= multiplier * pi (2Kperp + alpha).
pub fn tail_window_start(u: f64, p: &ClassicalParams, multiplier: f64) -> i64 {
    (multiplier * PI * (2.0 * p.kperp + p.alpha) / u).ceil() as i64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub window_start: i64,
    pub multiplier: f64,
    pub plateau: Vec<(i64, f64)>,
    pub leading_residuals: Vec<f64>,
    pub refined_residuals: Vec<f64>,
}

impl TailReport {
    pub fn leading_rms(&self) -> f64 {
        rms(&self.leading_residuals)
    }

    pub fn refined_rms(&self) -> f64 {
        rms(&self.refined_residuals)
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Plateau G(0, rho) rho^2 u^2 / alpha and residuals against the leading and
/// refined tail formulas, over samples with r = 0 and rho >= window start.
/// Residuals are relative to the leading term.
pub fn tail_asymptotics(table: &GreensTable, s: &SaddleSolution, p: &ClassicalParams) -> Result<TailReport> {
    tail_asymptotics_with(table, s, p, DEFAULT_TAIL_MULTIPLIER)
}

pub fn tail_asymptotics_with(
    table: &GreensTable,
    s: &SaddleSolution,
    p: &ClassicalParams,
    multiplier: f64,
) -> Result<TailReport> {
    if !(s.u > 0.0) {
        return Err(Error::InvalidParams("tail analysis needs the paramagnetic phase".into()));
    }
    if !(p.alpha > 0.0) {
        return Err(Error::InvalidParams("no power-law tail without dissipation".into()));
    }
    let u = s.u;
    let window_start = tail_window_start(u, p, multiplier);
    let mut pts: Vec<(i64, f64)> = table
        .samples
        .iter()
        .filter(|g| g.r.iter().all(|&x| x == 0) && g.rho >= window_start)
        .map(|g| (g.rho, g.value))
        .collect();
    if pts.is_empty() {
        return Err(Error::TailWindow { required_min_rho: window_start });
    }
    pts.sort_by_key(|p| p.0);
    let plateau = pts.iter().map(|&(rho, g)| (rho, g * (rho as f64 * u).powi(2) / p.alpha)).collect();
    let leading_residuals = pts
        .iter()
        .map(|&(rho, g)| (g - tail_leading(rho, u, p)) / tail_leading(rho, u, p))
        .collect();
    let refined_residuals = pts
        .iter()
        .map(|&(rho, g)| (g - tail_refined(rho, u, p)) / tail_leading(rho, u, p))
        .collect();
    Ok(TailReport {
        window_start,
        multiplier,
        plateau,
        leading_residuals,
        refined_residuals,
    })
}
