//! Auxiliary-time representation of lattice and continuum propagators:
//! 1/a = int_0^inf e^{-a t} dt turns every mode sum into a product of
//! one-dimensional factors integrated over t.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{kappa, KernelSpectrum};
use crate::quad::{gauss_legendre, integrate_panels, QuadConfig};
use crate::special::{bessel_i0e, bessel_ie, erfcx_complex};

/// Integrates `f` over `[0, inf)`.
///
/// `f` must already carry any e^{-u t} factor. `rate` sets the short-time
/// scale; `u` and `power` describe the long-time decay `f ~ t^{-power} e^{-u t}`.
/// When `u == 0` the remaining power-law tail is added analytically.
pub fn semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    rate: f64,
    u: f64,
    power: f64,
    rel_tol: f64,
    context: &'static str,
) -> Result<f64> {
    if u <= 0.0 && power <= 1.0 {
        return Err(Error::Divergent(format!(
            "{context}: integrand decays as t^-{power} without exponential cutoff"
        )));
    }
    let t0 = 1e-3 / rate.max(1e-300);
    let head_cfg = QuadConfig::rel(rel_tol * 0.1);
    let head = integrate_panels(&f, 0.0, t0, 1, &head_cfg);

    // in s = ln t the integrand is g(s) = f(e^s) e^s
    let g = |s: f64| {
        let t = s.exp();
        f(t) * t
    };
    let tail_bound = |s: f64, gs: f64| {
        let t = s.exp();
        let by_power = if power > 1.0 { 1.0 / (power - 1.0) } else { f64::INFINITY };
        let by_exp = if u > 0.0 { 1.0 / (u * t) } else { f64::INFINITY };
        gs.abs() * by_power.min(by_exp)
    };

    let s0 = t0.ln();
    let step = 0.5;
    let s_cap = 700.0;
    let mut s = s0;
    let mut g_prev = g(s);
    let mut mass = head.value.abs();
    let mut peak = g_prev.abs();
    loop {
        let s_next = s + step;
        let g_next = g(s_next);
        if !g_next.is_finite() {
            return Err(Error::Quadrature {
                context,
                value: g_next,
                error: f64::INFINITY,
            });
        }
        mass += 0.5 * step * (g_prev.abs() + g_next.abs());
        peak = peak.max(g_next.abs());
        s = s_next;
        let decaying = g_next.abs() <= g_prev.abs() || g_next.abs() < 1e-3 * peak;
        g_prev = g_next;
        // before the cutoff time a small-t plateau may be rounding noise
        let past_cutoff = u <= 0.0 || u * s.exp() >= 1.0;
        if mass > 0.0 && decaying && past_cutoff && tail_bound(s, g_next) <= 1e-3 * rel_tol * mass {
            break;
        }
        if mass == 0.0 && s > s0 + 200.0 {
            // integrand identically zero on the scanned range
            return Ok(head.value);
        }
        if s >= s_cap {
            return Err(Error::Quadrature {
                context,
                value: mass,
                error: tail_bound(s, g_next),
            });
        }
    }
    let s_max = s;
    let panels = ((s_max - s0) / 2.0).ceil().max(1.0) as usize;
    let body_cfg = QuadConfig::rel(rel_tol * 0.1).with_abs(rel_tol * 0.1 * mass);
    let body_cfg = QuadConfig {
        max_intervals: 20_000,
        ..body_cfg
    };
    let body = integrate_panels(g, s0, s_max, panels, &body_cfg);
    if !body.converged && body.abs_error > rel_tol * mass {
        return Err(Error::Quadrature {
            context,
            value: body.value,
            error: body.abs_error,
        });
    }
    let mut total = head.value + body.value;
    if u <= 0.0 {
        total += g(s_max) / (power - 1.0);
    }
    Ok(total)
}

/// Imaginary-time mode sum (1/M) sum_nu w_nu e^{-(lambda_0 - lambda_nu) t}
/// with w_nu = cos(kappa_nu rho), terms paired over +-nu and sorted by gap.
#[derive(Debug, Clone)]
pub struct NuSum {
    terms: Vec<(f64, f64)>,
    pub max_gap: f64,
}

impl NuSum {
    pub fn new(spec: &KernelSpectrum, rho: i64) -> Self {
        let m = spec.m();
        let mf = m as f64;
        let l0 = spec.lambda0();
        let mut terms = vec![(0.0, 1.0 / mf)];
        for nu in 1..=spec.half() {
            let gap = (l0 - spec.lambda_at(nu)).max(0.0);
            let phase = (nu * rho).rem_euclid(m as i64);
            let w = 2.0 * kappa(phase, m).cos() / mf;
            terms.push((gap, w));
        }
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_gap = terms.last().map(|t| t.0).unwrap_or(0.0);
        Self { terms, max_gap }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &(gap, w) in &self.terms {
            let x = gap * t;
            if x > 740.0 {
                break;
            }
            acc += w * (-x).exp();
        }
        acc
    }
}

/// prod_a e^{-2Kt} I_{|r_a|}(2Kt).
pub fn lattice_box(t: f64, r: &[i64], k: f64, d: usize) -> f64 {
    let x = 2.0 * k * t;
    let mut out = 1.0;
    let mut zeros = d;
    for &ra in r {
        if ra != 0 {
            out *= bessel_ie(ra.unsigned_abs(), x);
            zeros -= 1;
        }
    }
    if zeros > 0 {
        out *= bessel_i0e(x).powi(zeros as i32);
    }
    out
}

thread_local! {
    static GL_CACHE: RefCell<HashMap<usize, (Vec<f64>, Vec<f64>)>> = RefCell::new(HashMap::new());
}

fn with_gauss_legendre<R>(n: usize, f: impl FnOnce(&[f64], &[f64]) -> R) -> R {
    GL_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        let (x, w) = c.entry(n).or_insert_with(|| gauss_legendre(n));
        f(x, w)
    })
}

/// Direct Gauss-Legendre evaluation of
/// int_{-pi}^{pi} dkappa/2pi e^{-a t kappa^2 - pi alpha t |kappa|} cos(kappa rho).
pub fn kappa_factor_direct(t: f64, rho: i64, stiffness: f64, alpha: f64) -> f64 {
    let n = 48 + 2 * rho.unsigned_abs() as usize;
    let at = stiffness * t;
    let bt = PI * alpha * t;
    let rf = rho as f64;
    with_gauss_legendre(n, |x, w| {
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            let k = 0.5 * PI * (xi + 1.0);
            acc += wi * (-(at * k + bt) * k).exp() * (k * rf).cos();
        }
        // (1/pi) * (pi/2) from the interval map
        0.5 * acc
    })
}

/// int_{-pi}^{pi} dkappa/2pi e^{-a t kappa^2 - pi alpha t |kappa| + i kappa rho}
/// through the scaled complementary error function, falling back to direct
/// quadrature when the two erfcx terms cancel.
pub fn kappa_factor(t: f64, rho: i64, stiffness: f64, alpha: f64) -> f64 {
    match kappa_factor_erfcx_terms(t, rho, stiffness, alpha) {
        Some((pre, t1, t2)) if (t1 - t2).abs() >= 1e-3 * (t1.abs() + t2.abs()) => pre * (t1 - t2),
        _ => kappa_factor_direct(t, rho, stiffness, alpha),
    }
}

fn kappa_factor_erfcx_terms(t: f64, rho: i64, a: f64, alpha: f64) -> Option<(f64, f64, f64)> {
    let s = (4.0 * a * t).sqrt();
    if !(s > 0.0) || !s.is_finite() {
        return None;
    }
    let y = rho as f64 / s;
    let z1 = Complex64::new(PI * alpha * t / s, y);
    let z2 = Complex64::new(PI * (2.0 * a + alpha) * t / s, y);
    let sign = if rho.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let damp = (-PI * PI * (a + alpha) * t).exp();
    let t1 = erfcx_complex(z1).re;
    let t2 = sign * damp * erfcx_complex(z2).re;
    Some((1.0 / (4.0 * PI * a * t).sqrt(), t1, t2))
}

/// Closed-form imaginary-time factor for the continuum propagator, without
/// the quadrature fallback.
pub fn kappa_factor_closed_form(t: f64, rho: i64, stiffness: f64, alpha: f64) -> f64 {
    let (pre, t1, t2) = kappa_factor_erfcx_terms(t, rho, stiffness, alpha).unwrap_or((0.0, 0.0, 0.0));
    pre * (t1 - t2)
}

/// int_{-pi}^{pi} dk/2pi e^{-K t k^2 + i k r}.
pub fn box_factor(t: f64, r: i64, k: f64) -> f64 {
    if r == 0 {
        let x = PI * (k * t).sqrt();
        if x < 1e-8 {
            return 1.0 - x * x / 3.0;
        }
        return libm::erf(x) * PI.sqrt() / (2.0 * x);
    }
    kappa_factor(t, r, k, 0.0)
}
