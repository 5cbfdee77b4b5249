//! Saddle-point integral H, the constraint solver, free energy and the
//! phase boundary.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aux_time::{box_factor, kappa_factor, lattice_box, semi_infinite, NuSum};
use crate::error::{Error, Result};
use crate::fit::{fit_line, window_of, FitReport};
use crate::kernel::KernelSpectrum;
use crate::params::{validate_regime, ClassicalParams, DEFAULT_REGIME_THRESHOLDS};
use crate::quad::{integrate, QuadConfig};
use crate::roots::{solve_bracketed, RootOptions};

pub const DEFAULT_REL_TOL: f64 = 1e-11;

/// A value that is either finite or known to diverge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum MaybeDivergent {
    Finite(f64),
    Divergent,
}

impl MaybeDivergent {
    pub fn finite(self) -> Option<f64> {
        match self {
            MaybeDivergent::Finite(v) => Some(v),
            MaybeDivergent::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, MaybeDivergent::Divergent)
    }

    /// Divergent compares as +infinity.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    FiniteM,
    Continuum,
    Radial,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::FiniteM => "finite-m",
            Engine::Continuum => "continuum",
            Engine::Radial => "radial",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite-m" => Ok(Engine::FiniteM),
            "continuum" => Ok(Engine::Continuum),
            "radial" => Ok(Engine::Radial),
            other => Err(Error::InvalidParams(format!("unknown engine {other:?}"))),
        }
    }
}

/// Large-t decay power of the auxiliary-time integrand.
fn finite_m_power(d: usize) -> f64 {
    d as f64 / 2.0
}

fn continuum_power(d: usize, alpha: f64) -> f64 {
    if alpha > 0.0 {
        d as f64 / 2.0 + 1.0
    } else {
        (d as f64 + 1.0) / 2.0
    }
}

/// H evaluated at gap u = 2z - K~ on the lattice with M slices.
pub fn h_finite_m_gap(u: f64, spec: &KernelSpectrum, rel_tol: f64) -> Result<MaybeDivergent> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::NotPositiveDefinite { gap: u });
    }
    let p = &spec.params;
    let d = p.int_dim()?;
    let power = finite_m_power(d);
    if u == 0.0 && power <= 1.0 {
        return Ok(MaybeDivergent::Divergent);
    }
    let nusum = NuSum::new(spec, 0);
    let rate = 2.0 * d as f64 * p.k + nusum.max_gap + u;
    let f = |t: f64| (-u * t).exp() * lattice_box(t, &[], p.k, d) * nusum.eval(t);
    semi_infinite(f, rate, u, power, rel_tol, "finite-M saddle integral").map(MaybeDivergent::Finite)
}

/// H(z) on the lattice with M slices.
pub fn h_finite_m(z: f64, spec: &KernelSpectrum) -> Result<MaybeDivergent> {
    h_finite_m_gap(2.0 * z - spec.ktilde_max, spec, DEFAULT_REL_TOL)
}

/// H(0) - H(u) on the lattice, computed without cancellation.
pub fn delta_h_finite_m(u: f64, spec: &KernelSpectrum, rel_tol: f64) -> Result<f64> {
    let p = &spec.params;
    let d = p.int_dim()?;
    let power = finite_m_power(d);
    if power <= 1.0 {
        return Err(Error::Divergent(format!("H(0) diverges on the lattice for d = {d}")));
    }
    let nusum = NuSum::new(spec, 0);
    let rate = 2.0 * d as f64 * p.k + nusum.max_gap + u;
    let f = |t: f64| -(-u * t).exp_m1() * lattice_box(t, &[], p.k, d) * nusum.eval(t);
    semi_infinite(f, rate, 0.0, power, rel_tol, "finite-M gap difference")
}

fn continuum_rate(p: &ClassicalParams, d: usize, u: f64) -> f64 {
    PI * PI * (d as f64 * p.k + p.kperp + p.alpha) + u
}

/// Continuum saddle integral over the box |k_a| <= pi, |kappa| <= pi with the
/// small-(k, kappa) propagator.
pub fn h_continuum_tol(u: f64, p: &ClassicalParams, rel_tol: f64) -> Result<MaybeDivergent> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::NotPositiveDefinite { gap: u });
    }
    let d = p.int_dim()?;
    let power = continuum_power(d, p.alpha);
    if u == 0.0 && power <= 1.0 {
        return Ok(MaybeDivergent::Divergent);
    }
    let f = |t: f64| {
        (-u * t).exp() * box_factor(t, 0, p.k).powi(d as i32) * kappa_factor(t, 0, p.kperp, p.alpha)
    };
    semi_infinite(f, continuum_rate(p, d, u), u, power, rel_tol, "continuum saddle integral")
        .map(MaybeDivergent::Finite)
}

pub fn h_continuum(u: f64, p: &ClassicalParams) -> Result<MaybeDivergent> {
    h_continuum_tol(u, p, DEFAULT_REL_TOL)
}

/// H_cont(0) - H_cont(u).
pub fn delta_h_continuum(u: f64, p: &ClassicalParams, rel_tol: f64) -> Result<f64> {
    let d = p.int_dim()?;
    let power = continuum_power(d, p.alpha);
    if power <= 1.0 {
        return Err(Error::Divergent("continuum H(0) diverges without dissipation for d = 1".into()));
    }
    let f = |t: f64| {
        -(-u * t).exp_m1() * box_factor(t, 0, p.k).powi(d as i32) * kappa_factor(t, 0, p.kperp, p.alpha)
    };
    semi_infinite(f, continuum_rate(p, d, u), 0.0, power, rel_tol, "continuum gap difference")
}

/// Radial scaling form (1/alpha) int_0^pi dk k^{d-1} (-ln[Kperp (K k^2 + u) / (pi alpha)^2]).
/// Constants are dropped, so only differences and scaling are meaningful.
pub fn h_radial(u: f64, p: &ClassicalParams) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::NotPositiveDefinite { gap: u });
    }
    if p.alpha <= 0.0 {
        return Err(Error::InvalidParams("radial engine needs alpha > 0".into()));
    }
    let d = p.d;
    let scale = p.kperp / (PI * p.alpha).powi(2);
    // w = k^d absorbs the k^{d-1} measure
    let f = |w: f64| {
        let k2 = w.powf(2.0 / d);
        -(scale * (p.k * k2 + u)).ln()
    };
    let r = integrate(f, 0.0, PI.powf(d), &QuadConfig::rel(1e-12));
    Ok(r.value / (p.alpha * d))
}

/// True where the radial integrand's logarithm changes sign on [0, pi].
pub fn radial_log_sign_change(u: f64, p: &ClassicalParams) -> bool {
    p.kperp * (p.k * PI * PI + u) >= (PI * p.alpha).powi(2)
}

/// h_radial(0) - h_radial(u) = (1/(alpha d)) int_0^{pi^d} ln(1 + u / (K w^{2/d})) dw.
pub fn delta_h_radial(u: f64, p: &ClassicalParams) -> Result<f64> {
    if p.alpha <= 0.0 {
        return Err(Error::InvalidParams("radial engine needs alpha > 0".into()));
    }
    let d = p.d;
    let f = |w: f64| {
        if w == 0.0 {
            return 0.0;
        }
        (u / (p.k * w.powf(2.0 / d))).ln_1p()
    };
    // the integrand varies on the scale w ~ (u/K)^{d/2}; split there
    let knee = (u / p.k).powf(d / 2.0).min(PI.powf(d));
    let cfg = QuadConfig::rel(1e-12);
    let a = integrate(f, 0.0, knee, &cfg).value;
    let b = integrate(f, knee, PI.powf(d), &cfg).value;
    Ok((a + b) / (p.alpha * d))
}

/// Saddle integral evaluator bound to one engine and parameter record.
#[derive(Debug, Clone)]
pub struct SaddleIntegral {
    pub engine: Engine,
    pub params: ClassicalParams,
    spec: Option<KernelSpectrum>,
    pub rel_tol: f64,
}

impl SaddleIntegral {
    pub fn new(engine: Engine, p: &ClassicalParams) -> Result<Self> {
        p.validate()?;
        let spec = match engine {
            Engine::FiniteM => Some(KernelSpectrum::new(p)?),
            _ => None,
        };
        if engine != Engine::Radial {
            p.int_dim()?;
        }
        Ok(Self {
            engine,
            params: *p,
            spec,
            rel_tol: DEFAULT_REL_TOL,
        })
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn h(&self, u: f64) -> Result<MaybeDivergent> {
        match self.engine {
            Engine::FiniteM => h_finite_m_gap(u, self.spec.as_ref().unwrap(), self.rel_tol),
            Engine::Continuum => h_continuum_tol(u, &self.params, self.rel_tol),
            Engine::Radial => h_radial(u, &self.params).map(MaybeDivergent::Finite),
        }
    }

    pub fn delta_h(&self, u: f64) -> Result<f64> {
        match self.engine {
            Engine::FiniteM => delta_h_finite_m(u, self.spec.as_ref().unwrap(), self.rel_tol),
            Engine::Continuum => delta_h_continuum(u, &self.params, self.rel_tol),
            Engine::Radial => delta_h_radial(u, &self.params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Paramagnetic,
    Ferromagnetic,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution {
    pub z: f64,
    pub u: f64,
    pub phase: Phase,
    pub m: f64,
    /// H at 2z = K~, i.e. u = 0.
    pub h_critical_value: MaybeDivergent,
    pub residual: f64,
    pub engine: Engine,
}

fn ktilde_max(p: &ClassicalParams) -> Result<f64> {
    Ok(KernelSpectrum::new(p)?.ktilde_max)
}

/// Solves 1 - (h/u)^2 = H(u) for the gap u, or detects the ordered phase.
pub fn solve_saddle(p: &ClassicalParams, engine: Engine, tol: f64) -> Result<SaddleSolution> {
    if engine == Engine::Radial {
        return Err(Error::UnsupportedEngine(
            "radial engine drops constants and cannot solve the constraint".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let integral = SaddleIntegral::new(engine, p)?.with_rel_tol((tol * 1e-3).clamp(3e-13, 1e-8));
    let kt = ktilde_max(p)?;
    let h0 = integral.h(0.0)?;
    let h = p.h;

    if h == 0.0 {
        if let MaybeDivergent::Finite(v) = h0 {
            if (v - 1.0).abs() <= tol {
                return Ok(SaddleSolution {
                    z: kt / 2.0,
                    u: 0.0,
                    phase: Phase::Critical,
                    m: 0.0,
                    h_critical_value: h0,
                    residual: (v - 1.0).abs(),
                    engine,
                });
            }
            if v < 1.0 {
                return Ok(SaddleSolution {
                    z: kt / 2.0,
                    u: 0.0,
                    phase: Phase::Ferromagnetic,
                    m: (1.0 - v).sqrt(),
                    h_critical_value: h0,
                    residual: 0.0,
                    engine,
                });
            }
        }
    }

    // residual in x = ln u, increasing in x
    let residual = |x: f64| -> Result<f64> {
        let u = x.exp();
        let hv = integral.h(u)?.as_f64();
        Ok(1.0 - (h / u).powi(2) - hv)
    };
    let (lo, hi) = bracket_log_gap(&residual, (2.0 * p.k).ln())?;
    let opts = RootOptions {
        switch_width: 1e-3,
        x_tol: 1e-15,
        f_tol: tol * 1e-3,
        max_iter: 300,
    };
    let root = solve_bracketed(&residual, lo, hi, &opts)?;
    let u = root.x.exp();
    let hv = integral.h(u)?.as_f64();
    let res = (1.0 - (h / u).powi(2) - hv).abs();
    if res > tol {
        return Err(Error::Quadrature {
            context: "saddle residual above tolerance",
            value: u,
            error: res,
        });
    }
    Ok(SaddleSolution {
        z: (kt + u) / 2.0,
        u,
        phase: Phase::Paramagnetic,
        m: h / u,
        h_critical_value: h0,
        residual: res,
        engine,
    })
}

/// Finds [x_lo, x_hi] in ln u with f(x_lo) < 0 < f(x_hi) for an increasing f.
fn bracket_log_gap<F: Fn(f64) -> Result<f64>>(f: &F, start: f64) -> Result<(f64, f64)> {
    let step = 4f64.ln();
    let mut x = start;
    let mut fx = f(x)?;
    if fx == 0.0 {
        return Ok((x - 1e-12, x + 1e-12));
    }
    let dir = if fx < 0.0 { 1.0 } else { -1.0 };
    for _ in 0..400 {
        let xn = x + dir * step;
        let fxn = f(xn)?;
        if fxn.signum() != fx.signum() || fxn == 0.0 {
            return Ok(if dir > 0.0 { (x, xn) } else { (xn, x) });
        }
        x = xn;
        fx = fxn;
        if !(-700.0..=700.0).contains(&x) {
            break;
        }
    }
    Err(Error::Bracket {
        lo: x.min(start).exp(),
        hi: x.max(start).exp(),
        f_lo: fx,
        f_hi: fx,
    })
}

/// (m, chi) at a solved saddle; chi is divergent in the ordered phase.
pub fn magnetization_susceptibility(s: &SaddleSolution, p: &ClassicalParams) -> (f64, MaybeDivergent) {
    match s.phase {
        Phase::Paramagnetic => (p.h / s.u, MaybeDivergent::Finite(1.0 / s.u)),
        Phase::Ferromagnetic => (s.m, MaybeDivergent::Divergent),
        Phase::Critical => (0.0, MaybeDivergent::Divergent),
    }
}

/// ln((A + sqrt(A^2 - 4K^2)) / 2) = (1/2pi) int dk ln(A - 2K cos k), A > 2K.
fn log_chain(a: f64, k: f64) -> f64 {
    ((a + ((a - 2.0 * k) * (a + 2.0 * k)).sqrt()) / 2.0).ln()
}

/// (beta/M) f at multiplier z:
/// -1/2 ln 2pi - z - h^2/(2u) + 1/2 <ln(2z - K~(k, kappa))>.
pub fn free_energy(z: f64, p: &ClassicalParams, spec: &KernelSpectrum) -> Result<f64> {
    let d = p.int_dim()?;
    let u = 2.0 * z - spec.ktilde_max;
    if !(u > 0.0) {
        return Err(Error::NotPositiveDefinite { gap: u });
    }
    let mf = spec.m() as f64;
    let cfg = QuadConfig::rel(1e-13);
    let mut acc = 0.0;
    for &lam in &spec.lambda {
        let base = 2.0 * z - lam;
        acc += mean_log_spatial(base, p.k, d, &cfg)?;
    }
    let mean_log = acc / mf;
    Ok(-0.5 * (2.0 * PI).ln() - z - p.h * p.h / (2.0 * u) + 0.5 * mean_log)
}

/// (1/(2pi)^d) int d^dk ln(base - 2K sum_a cos k_a), the last axis in closed form.
fn mean_log_spatial(base: f64, k: f64, d: usize, cfg: &QuadConfig) -> Result<f64> {
    if d == 1 {
        return Ok(log_chain(base, k));
    }
    let r = integrate(
        |q: f64| mean_log_spatial(base - 2.0 * k * q.cos(), k, d - 1, cfg).unwrap_or(f64::NAN),
        0.0,
        PI,
        cfg,
    );
    if !r.value.is_finite() {
        return Err(Error::Quadrature {
            context: "free-energy spatial average",
            value: r.value,
            error: r.abs_error,
        });
    }
    Ok(r.value / PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub alpha: f64,
    #[serde(rename = "G_c")]
    pub g_c: f64,
    #[serde(rename = "K_c")]
    pub k_c: f64,
    pub bracket_width: f64,
}

/// Slice count carried by continuum-engine parameter records; the continuum
/// integrals do not depend on it.
pub const CONTINUUM_PLACEHOLDER_M: usize = 3;

/// Critical K at fixed (alpha, Kperp): root of H_cont(0; K) = 1.
pub fn critical_coupling(alpha: f64, kperp: f64, d: usize, tol: f64) -> Result<BoundaryPoint> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams("critical coupling needs alpha > 0".into()));
    }
    let base = ClassicalParams::new(d as f64, 1.0, kperp, alpha, 0.0, CONTINUUM_PLACEHOLDER_M)?;
    let rel = (tol * 1e-3).clamp(3e-13, 1e-8);
    // H_cont(0) decreases with K
    let f = |x: f64| -> Result<f64> {
        let p = base.with_k(x.exp());
        Ok(1.0 - h_continuum_tol(0.0, &p, rel)?.as_f64())
    };
    let (lo, hi) = bracket_log_gap(&f, 0.0)?;
    let opts = RootOptions {
        switch_width: 1e-3,
        x_tol: 1e-15,
        f_tol: tol * 1e-2,
        max_iter: 300,
    };
    let root = solve_bracketed(f, lo, hi, &opts)?;
    let k_c = root.x.exp();
    Ok(BoundaryPoint {
        alpha,
        g_c: 1.0 / (k_c * kperp),
        k_c,
        bracket_width: k_c * root.width().max(0.0),
    })
}

/// Boundary points over an alpha sweep and the fit of ln G_c against alpha.
/// The reported slope is C_d in G_c ~ exp(C_d alpha).
pub fn trace_phase_boundary(
    alphas: &[f64],
    kperp: f64,
    d: usize,
    tol: f64,
) -> Result<(Vec<BoundaryPoint>, FitReport)> {
    let mut points: Vec<BoundaryPoint> = alphas
        .par_iter()
        .map(|&a| critical_coupling(a, kperp, d, tol))
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let xs: Vec<f64> = points.iter().map(|b| b.alpha).collect();
    let ys: Vec<f64> = points.iter().map(|b| b.g_c.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    let regime = points.iter().all(|b| {
        let p = ClassicalParams {
            d: d as f64,
            k: b.k_c,
            kperp,
            alpha: b.alpha,
            h: 0.0,
            m: CONTINUUM_PLACEHOLDER_M,
        };
        validate_regime(&p, DEFAULT_REGIME_THRESHOLDS).small_trotter_ok
    });
    let report = FitReport::new("ln_Gc_vs_alpha", Engine::Continuum.name(), line, window_of(&xs), xs.len())
        .with_regime(regime);
    Ok((points, report))
}
