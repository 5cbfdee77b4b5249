//! Critical exponents: closed forms, scaling fits of the saddle integral, and
//! end-to-end exponent extraction along a fixed-Kperp sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_line, fit_power_law, log_grid, window_of, FitReport, LineFit};
use crate::params::{validate_regime, ClassicalParams, DEFAULT_REGIME_THRESHOLDS};
use crate::saddle::{critical_coupling, solve_saddle, BoundaryPoint, Engine, SaddleIntegral, CONTINUUM_PLACEHOLDER_M};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub alpha_sh: f64,
    pub beta_m: f64,
    pub gamma: f64,
    pub delta: f64,
    pub nu: f64,
    pub eta: f64,
    pub z_dyn: f64,
}

impl ExponentSet {
    pub fn as_tuple(&self) -> (f64, f64, f64, f64, f64, f64, f64) {
        (self.alpha_sh, self.beta_m, self.gamma, self.delta, self.nu, self.eta, self.z_dyn)
    }
}

/// Closed-form exponents for 0 < d < 2; any d >= 2 returns the d = 2 values.
pub fn exponent_table(d: f64) -> Result<ExponentSet> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParams(format!("dimension must be positive, got {d}")));
    }
    let d = d.min(2.0);
    Ok(ExponentSet {
        alpha_sh: (d - 2.0) / d,
        beta_m: 0.5,
        gamma: 2.0 / d,
        delta: (d + 4.0) / d,
        nu: 1.0 / d,
        eta: 0.0,
        z_dyn: 2.0,
    })
}

/// nu = 1/2 + eps/4 + eps^2/8 against the exact 1/(2 - eps).
pub fn epsilon_expansion_nu(epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParams(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let series = 0.5 + epsilon / 4.0 + epsilon * epsilon / 8.0;
    Ok((series, 1.0 / (2.0 - epsilon)))
}

pub const DEFAULT_G_WINDOW: (f64, f64) = (1e-4, 1e-2);
pub const DEFAULT_G_POINTS: usize = 12;

/// Default u grid, `[1e-4, 1e-2] * K` with 12 log-spaced points.
pub fn default_u_grid(k: f64) -> Vec<f64> {
    log_grid(1e-4 * k, 1e-2 * k, DEFAULT_G_POINTS)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapScalingFit {
    /// Log-log fit of H(0) - H(u) against u.
    pub power: FitReport,
    /// For d = 2: linear fit of (H(0) - H(u))/u against ln(1/u).
    pub log_corrected: Option<FitReport>,
    /// RMS of ln(predicted / actual) for each model.
    pub power_log_rms: f64,
    pub log_corrected_log_rms: Option<f64>,
    pub regime: String,
}

/// Fits H(0) - H(u) over `u_grid`: a power law for every d, plus a
/// + b u ln(1/u) for d = 2.
pub fn gap_scaling_fit(engine: Engine, p: &ClassicalParams, u_grid: &[f64]) -> Result<GapScalingFit> {
    let integral = SaddleIntegral::new(engine, p)?;
    if engine != Engine::Radial && integral.h(0.0)?.is_divergent() {
        return Err(Error::Divergent("H(0) diverges; no gap scaling to fit".into()));
    }
    let dh: Vec<f64> = u_grid
        .par_iter()
        .map(|&u| integral.delta_h(u))
        .collect::<Result<_>>()?;
    let power = fit_power_law(u_grid, &dh)?;
    let power_log_rms = power.residual_rms;
    let regime_ok = validate_regime(p, DEFAULT_REGIME_THRESHOLDS).small_trotter_ok;
    let window = window_of(u_grid);
    let power_report = FitReport::new("ln_dH_vs_ln_u", engine.name(), power, window, u_grid.len()).with_regime(regime_ok);

    let is_two = (p.d - 2.0).abs() < 1e-12;
    let (log_corrected, log_corrected_log_rms) = if is_two {
        let xs: Vec<f64> = u_grid.iter().map(|u| (1.0 / u).ln()).collect();
        let ys: Vec<f64> = dh.iter().zip(u_grid).map(|(d, u)| d / u).collect();
        let line = fit_line(&xs, &ys)?;
        let rms = log_rms(u_grid, &dh, |u| u * (line.intercept + line.slope * (1.0 / u).ln()));
        (
            Some(FitReport::new("dH_over_u_vs_ln_inv_u", engine.name(), line, window, u_grid.len()).with_regime(regime_ok)),
            Some(rms),
        )
    } else {
        (None, None)
    };
    let regime = if p.d < 2.0 - 1e-12 {
        "power u^{d/2}"
    } else if is_two {
        "logarithmic u ln(1/u)"
    } else {
        "mean-field regime (linear u)"
    };
    Ok(GapScalingFit {
        power: power_report,
        log_corrected,
        power_log_rms,
        log_corrected_log_rms,
        regime: regime.into(),
    })
}

fn log_rms(us: &[f64], ys: &[f64], model: impl Fn(f64) -> f64) -> f64 {
    let n = us.len() as f64;
    (us.iter()
        .zip(ys)
        .map(|(&u, &y)| {
            let pred = model(u);
            if pred > 0.0 {
                (pred / y).ln().powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

/// One point of a sweep along K = K_c/(1 +- g) at fixed Kperp and alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub g: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub u: f64,
    pub xi: f64,
    pub chi: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFit {
    pub name: String,
    pub exponent: f64,
    pub expected: f64,
    /// |exponent(lower half of window) - exponent(upper half)|.
    pub drift: f64,
    pub report: FitReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    pub g: f64,
    pub message: String,
}

fn sweep_params(d: usize, k: f64, kperp: f64, alpha: f64, h: f64) -> Result<ClassicalParams> {
    ClassicalParams::new(d as f64, k, kperp, alpha, h, CONTINUUM_PLACEHOLDER_M)
}

fn solve_tol(tol: f64) -> f64 {
    tol.min(1e-10)
}

/// Paramagnetic sweep K = K_c / (1 + g), i.e. G = G_c (1 + g).
pub fn paramagnetic_sweep(
    boundary: &BoundaryPoint,
    kperp: f64,
    d: usize,
    g_grid: &[f64],
    tol: f64,
) -> (Vec<SweepPoint>, Vec<SweepFailure>) {
    let results: Vec<(f64, Result<SweepPoint>)> = g_grid
        .par_iter()
        .map(|&g| {
            let r = (|| {
                let k = boundary.k_c / (1.0 + g);
                let p = sweep_params(d, k, kperp, boundary.alpha, 0.0)?;
                let s = solve_saddle(&p, Engine::Continuum, solve_tol(tol))?;
                if s.u <= 0.0 {
                    return Err(Error::Fit(format!("no gap at g = {g}")));
                }
                Ok(SweepPoint { g, k, u: s.u, xi: (k / s.u).sqrt(), chi: 1.0 / s.u, m: 0.0 })
            })();
            (g, r)
        })
        .collect();
    split_results(results)
}

/// Ordered-side sweep K = K_c / (1 - g) with m^2 = 1 - H(0).
pub fn ordered_sweep(
    boundary: &BoundaryPoint,
    kperp: f64,
    d: usize,
    g_grid: &[f64],
) -> (Vec<SweepPoint>, Vec<SweepFailure>) {
    let results: Vec<(f64, Result<SweepPoint>)> = g_grid
        .par_iter()
        .map(|&g| {
            let r = (|| {
                let k = boundary.k_c / (1.0 - g);
                let p = sweep_params(d, k, kperp, boundary.alpha, 0.0)?;
                let integral = SaddleIntegral::new(Engine::Continuum, &p)?.with_rel_tol(1e-12);
                let h0 = integral.h(0.0)?.as_f64();
                if h0 >= 1.0 {
                    return Err(Error::Fit(format!("not ordered at g = {g} (H(0) = {h0})")));
                }
                Ok(SweepPoint { g, k, u: 0.0, xi: f64::INFINITY, chi: f64::INFINITY, m: (1.0 - h0).sqrt() })
            })();
            (g, r)
        })
        .collect();
    split_results(results)
}

fn split_results(results: Vec<(f64, Result<SweepPoint>)>) -> (Vec<SweepPoint>, Vec<SweepFailure>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (g, r) in results {
        match r {
            Ok(p) => ok.push(p),
            Err(e) => failed.push(SweepFailure { g, message: e.to_string() }),
        }
    }
    ok.sort_by(|a, b| a.g.total_cmp(&b.g));
    (ok, failed)
}

fn exponent_fit(
    name: &str,
    label: &str,
    xs: &[f64],
    ys: &[f64],
    sign: f64,
    expected: f64,
    regime_ok: bool,
) -> Result<ExponentFit> {
    let line: LineFit = fit_power_law(xs, ys)?;
    let report = FitReport::new(label, Engine::Continuum.name(), line, window_of(xs), xs.len()).with_regime(regime_ok);
    Ok(ExponentFit {
        name: name.into(),
        exponent: sign * line.slope,
        expected,
        drift: half_window_drift(xs, ys)?,
        report,
    })
}

/// Slope difference between fits on the lower and upper halves of the points
/// (sorted by x).
fn half_window_drift(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    if n < 6 {
        return Ok(f64::NAN);
    }
    let (lo, hi) = pts.split_at(n / 2);
    let fit = |p: &[(f64, f64)]| {
        let x: Vec<f64> = p.iter().map(|q| q.0).collect();
        let y: Vec<f64> = p.iter().map(|q| q.1).collect();
        fit_power_law(&x, &y).map(|l| l.slope)
    };
    Ok((fit(lo)? - fit(hi)?).abs())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UVersusG {
    pub boundary: BoundaryPoint,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
    /// Slope of ln u against ln g; 2/d in theory.
    pub u_fit: FitReport,
    /// Slope of ln chi against ln g; -gamma in theory.
    pub chi_fit: FitReport,
}

/// Solves the paramagnetic saddle along the g grid and fits u ~ g^{2/d}.
pub fn u_versus_g(alpha: f64, kperp: f64, d: usize, g_grid: &[f64], tol: f64) -> Result<UVersusG> {
    let boundary = critical_coupling(alpha, kperp, d, tol)?;
    let (points, failures) = paramagnetic_sweep(&boundary, kperp, d, g_grid, tol);
    if points.len() < 4 {
        return Err(Error::Fit(format!("only {} sweep points solved", points.len())));
    }
    let gs: Vec<f64> = points.iter().map(|p| p.g).collect();
    let us: Vec<f64> = points.iter().map(|p| p.u).collect();
    let chis: Vec<f64> = points.iter().map(|p| p.chi).collect();
    let regime = regime_at(&boundary, kperp, d);
    let u_line = fit_power_law(&gs, &us)?;
    let chi_line = fit_power_law(&gs, &chis)?;
    let window = window_of(&gs);
    Ok(UVersusG {
        boundary,
        u_fit: FitReport::new("ln_u_vs_ln_g", Engine::Continuum.name(), u_line, window, gs.len()).with_regime(regime),
        chi_fit: FitReport::new("ln_chi_vs_ln_g", Engine::Continuum.name(), chi_line, window, gs.len()).with_regime(regime),
        points,
        failures,
    })
}

fn regime_at(b: &BoundaryPoint, kperp: f64, d: usize) -> bool {
    let p = ClassicalParams {
        d: d as f64,
        k: b.k_c,
        kperp,
        alpha: b.alpha,
        h: 0.0,
        m: CONTINUUM_PLACEHOLDER_M,
    };
    validate_regime(&p, DEFAULT_REGIME_THRESHOLDS).small_trotter_ok
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalIsotherm {
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub m: Vec<f64>,
}

/// m(h) at K = K_c from 1 - (h/u)^2 = H(u).
pub fn critical_isotherm(boundary: &BoundaryPoint, kperp: f64, d: usize, h_grid: &[f64], tol: f64) -> Result<CriticalIsotherm> {
    let sols: Vec<(f64, f64)> = h_grid
        .par_iter()
        .map(|&h| {
            let p = sweep_params(d, boundary.k_c, kperp, boundary.alpha, h)?;
            let s = solve_saddle(&p, Engine::Continuum, solve_tol(tol))?;
            Ok((s.u, s.m))
        })
        .collect::<Result<_>>()?;
    Ok(CriticalIsotherm {
        h: h_grid.to_vec(),
        u: sols.iter().map(|s| s.0).collect(),
        m: sols.iter().map(|s| s.1).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFits {
    pub boundary: BoundaryPoint,
    pub fits: Vec<ExponentFit>,
    pub paramagnetic: Vec<SweepPoint>,
    pub ordered: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
    /// "mean-field regime" above two dimensions, where the fits are compared
    /// with the clamped table.
    pub regime: String,
    /// gamma - beta (delta - 1) from the fitted values.
    pub widom_mismatch: f64,
    /// Worst-case propagated fit error of the mismatch, each exponent
    /// contributing its slope standard error plus its window drift.
    pub widom_error: f64,
}

impl ExponentFits {
    pub fn get(&self, name: &str) -> Option<&ExponentFit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

pub const DEFAULT_H_WINDOW: (f64, f64) = (1e-6, 1e-4);

/// beta from m(g) on the ordered side, gamma from chi(g), nu from xi(g), and
/// delta from the critical isotherm.
pub fn numeric_exponent_fits(
    alpha: f64,
    kperp: f64,
    d: usize,
    g_grid: &[f64],
    h_grid: &[f64],
    tol: f64,
) -> Result<ExponentFits> {
    let closed = exponent_table(d as f64)?;
    let boundary = critical_coupling(alpha, kperp, d, tol)?;
    let regime = regime_at(&boundary, kperp, d);
    let (para, mut failures) = paramagnetic_sweep(&boundary, kperp, d, g_grid, tol);
    let (ordered, f2) = ordered_sweep(&boundary, kperp, d, g_grid);
    failures.extend(f2);
    if para.len() < 4 || ordered.len() < 4 {
        return Err(Error::Fit(format!(
            "too few solved sweep points ({} paramagnetic, {} ordered)",
            para.len(),
            ordered.len()
        )));
    }
    let gp: Vec<f64> = para.iter().map(|p| p.g).collect();
    let go: Vec<f64> = ordered.iter().map(|p| p.g).collect();
    let chi: Vec<f64> = para.iter().map(|p| p.chi).collect();
    let xi: Vec<f64> = para.iter().map(|p| p.xi).collect();
    let m: Vec<f64> = ordered.iter().map(|p| p.m).collect();

    let iso = critical_isotherm(&boundary, kperp, d, h_grid, tol)?;
    // h ~ m^delta: regress ln h on ln m
    let delta_fit = exponent_fit("delta", "ln_h_vs_ln_m", &iso.m, &iso.h, 1.0, closed.delta, regime)?;
    let fits = vec![
        exponent_fit("beta", "ln_m_vs_ln_g", &go, &m, 1.0, closed.beta_m, regime)?,
        exponent_fit("gamma", "ln_chi_vs_ln_g", &gp, &chi, -1.0, closed.gamma, regime)?,
        exponent_fit("nu", "ln_xi_vs_ln_g", &gp, &xi, -1.0, closed.nu, regime)?,
        delta_fit,
    ];
    let by = |n: &str| fits.iter().find(|f| f.name == n).unwrap();
    let (b, g, dl) = (by("beta"), by("gamma"), by("delta"));
    let widom_mismatch = g.exponent - b.exponent * (dl.exponent - 1.0);
    let err = |f: &ExponentFit| f.report.slope_stderr + f.drift;
    let widom_error = err(g) + (dl.exponent - 1.0).abs() * err(b) + b.exponent.abs() * err(dl);
    let regime = match d {
        1 => "power law",
        2 => "marginal (logarithmic corrections)",
        _ => "mean-field regime",
    };
    Ok(ExponentFits {
        boundary,
        regime: regime.into(),
        fits,
        paramagnetic: para,
        ordered,
        failures,
        widom_mismatch,
        widom_error,
    })
}
