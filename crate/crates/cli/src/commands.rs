use serde_json::{json, Value};
use spherical_core::aux_time::kappa_factor_closed_form;
use spherical_core::correlators::*;
use spherical_core::criticality::*;
use spherical_core::fit::{fit_power_law, log_grid};
use spherical_core::kernel::{kappa, s_asymptotic, s_exact, KernelSpectrum};
use spherical_core::oracle::*;
use spherical_core::params::{validate_regime, DEFAULT_REGIME_THRESHOLDS};
use spherical_core::saddle::*;
use spherical_core::ClassicalParams;

use crate::config::linear_sweep;
use crate::error::CliError;
use crate::output::{json_doc, num, Csv, Document, Meta, Outputs};

type Res<T> = Result<T, CliError>;

pub fn kernel(p: &ClassicalParams, meta: &Meta) -> Res<Outputs> {
    let spec = KernelSpectrum::new(p)?;
    let m = p.m;
    let mut csv = Csv::new(meta, &["nu", "kappa", "S_exact", "S_asymptotic", "lambda"]);
    for (i, nu) in spec.nus().enumerate() {
        csv.row(vec![
            nu.to_string(),
            num(kappa(nu, m)),
            num(spec.s[i]),
            num(s_asymptotic(nu, m)),
            num(spec.lambda[i]),
        ]);
    }
    let report = asymptotics_report(m);
    csv.comment("asymptotics", &report);
    Ok(Outputs {
        primary: Document { suffix: None, ext: "csv", content: csv.finish() },
        companions: vec![Document {
            suffix: Some("asymptotics"),
            ext: "json",
            content: json_doc(meta, report),
        }],
    })
}

/// |S_exact - S_asymptotic| over four doublings of M and the fitted power.
fn asymptotics_report(m: usize) -> Value {
    let ms: Vec<usize> = (0..4).map(|k| (m - 1) * (1 << k) + 1).collect();
    let half = (m as i64 - 1) / 2;
    let rows: Vec<Value> = [0i64, 1, 2, 5]
        .iter()
        .filter(|&&nu| nu <= half)
        .map(|&nu| {
            let errs: Vec<f64> = ms.iter().map(|&mm| (s_exact(nu, mm) - s_asymptotic(nu, mm)).abs()).collect();
            let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
            let xs: Vec<f64> = ms.iter().map(|&mm| mm as f64).collect();
            let slope = fit_power_law(&xs, &errs).map(|l| l.slope).ok();
            json!({"nu": nu, "M": ms, "error": errs, "ratio_per_doubling": ratios, "power": slope})
        })
        .collect();
    json!({ "rows": rows })
}

fn h_value(v: MaybeDivergent) -> Value {
    match v {
        MaybeDivergent::Finite(x) => json!(x),
        MaybeDivergent::Divergent => json!("divergent"),
    }
}

pub fn saddle(p: &ClassicalParams, engine: Engine, tol: f64, meta: &Meta) -> Res<Outputs> {
    let s = solve_saddle(p, engine, tol)?;
    let (_, chi) = magnetization_susceptibility(&s, p);
    let body = json!({
        "z": s.z,
        "u": s.u,
        "phase": s.phase,
        "m": s.m,
        "H_at_Kc_over_2": h_value(s.h_critical_value),
        "residual": s.residual,
        "chi": h_value(chi),
        "regime": validate_regime(p, DEFAULT_REGIME_THRESHOLDS),
    });
    Ok(Outputs::single("json", json_doc(meta, body)))
}

pub fn phase_boundary(d: usize, kperp: f64, sweep: (f64, f64, usize), tol: f64, meta: &Meta) -> Res<Outputs> {
    let alphas = linear_sweep(sweep);
    let (points, fit) = trace_phase_boundary(&alphas, kperp, d, tol)?;
    let mut csv = Csv::new(meta, &["alpha", "K_c", "G_c", "ln_Gc"]);
    for b in &points {
        csv.row(vec![num(b.alpha), num(b.k_c), num(b.g_c), num(b.g_c.ln())]);
    }
    csv.comment("fit", &fit);
    let fit_doc = json_doc(meta, json!({ "C_d": fit.slope, "fit": fit }));
    Ok(Outputs {
        primary: Document { suffix: None, ext: "csv", content: csv.finish() },
        companions: vec![Document { suffix: Some("fit"), ext: "json", content: fit_doc }],
    })
}

fn paramagnetic(p: &ClassicalParams, engine: Engine, tol: f64) -> Res<SaddleSolution> {
    let s = solve_saddle(p, engine, tol)?;
    if s.phase != Phase::Paramagnetic || !(s.u > 0.0) {
        return Err(CliError::Solver(format!(
            "propagator needs the paramagnetic phase, solved {:?}",
            s.phase
        )));
    }
    Ok(s)
}

pub fn correlator(
    p: &ClassicalParams,
    engine: Engine,
    tol: f64,
    r_range: (i64, i64),
    rho_range: (i64, i64),
    meta: &Meta,
) -> Res<Outputs> {
    let d = p.int_dim()?;
    if engine == Engine::Radial {
        return Err(spherical_core::Error::UnsupportedEngine("radial engine has no propagator".into()).into());
    }
    let s = paramagnetic(p, engine, tol)?;
    let mut disp = Vec::new();
    for r in r_range.0..=r_range.1 {
        for rho in rho_range.0..=rho_range.1 {
            let mut v = vec![0i64; d];
            v[0] = r;
            disp.push((v, rho));
        }
    }
    let table = match engine {
        Engine::FiniteM => {
            let spec = KernelSpectrum::new(p)?;
            build_greens_table(&GreensSource::InfiniteN { spec: &spec, z: s.z }, &disp)?
        }
        _ => build_greens_table(&GreensSource::Continuum { params: p, u: s.u }, &disp)?,
    };
    let mut csv = Csv::new(meta, &["r", "rho", "G", "engine"]);
    for g in &table.samples {
        csv.row(vec![g.r[0].to_string(), g.rho.to_string(), num(g.value), table.engine.name().into()]);
    }
    csv.comment("saddle", &json!({"z": s.z, "u": s.u}));
    Ok(Outputs::single("csv", csv.finish()))
}

pub fn tail(p: &ClassicalParams, tol: f64, rho_range: Option<(i64, i64)>, meta: &Meta) -> Res<Outputs> {
    if !(p.alpha > 0.0) {
        return Err(CliError::Validation("tail analysis needs alpha > 0".into()));
    }
    let d = p.int_dim()?;
    let s = paramagnetic(p, Engine::Continuum, tol)?;
    let start = tail_window_start(s.u, p, DEFAULT_TAIL_MULTIPLIER);
    let (lo, hi) = rho_range.unwrap_or((start, start + 32));
    let disp: Vec<(Vec<i64>, i64)> = (lo..=hi).map(|rho| (vec![0; d], rho)).collect();
    let table = build_greens_table(&GreensSource::Continuum { params: p, u: s.u }, &disp)?;
    let mut csv = Csv::new(meta, &["rho", "G", "leading", "refined", "plateau_ratio"]);
    for g in &table.samples {
        let rho = g.rho;
        let plateau = g.value * (rho as f64 * s.u).powi(2) / p.alpha;
        csv.row(vec![
            rho.to_string(),
            num(g.value),
            num(tail_leading(rho, s.u, p)),
            num(tail_refined(rho, s.u, p)),
            num(plateau),
        ]);
    }
    let summary = match tail_asymptotics(&table, &s, p) {
        Ok(rep) => json!({
            "u": s.u,
            "window_start": rep.window_start,
            "leading_rms": rep.leading_rms(),
            "refined_rms": rep.refined_rms(),
        }),
        Err(e) => json!({"u": s.u, "window_start": start, "note": e.to_string()}),
    };
    csv.comment("summary", &summary);
    Ok(Outputs::single("csv", csv.finish()))
}

pub struct ExponentArgs {
    pub d: usize,
    pub alpha: f64,
    pub kperp: f64,
    pub g_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub u_grid: Option<Vec<f64>>,
    pub tol: f64,
}

pub fn exponents(a: &ExponentArgs, meta: &Meta) -> Res<Outputs> {
    let closed = exponent_table(a.d as f64)?;
    let fits = numeric_exponent_fits(a.alpha, a.kperp, a.d, &a.g_grid, &a.h_grid, a.tol)?;
    let at_kc = ClassicalParams::new(a.d as f64, fits.boundary.k_c, a.kperp, a.alpha, 0.0, CONTINUUM_PLACEHOLDER_M)?;
    let u_grid = a.u_grid.clone().unwrap_or_else(|| default_u_grid(at_kc.k));
    let gap = gap_scaling_fit(Engine::Continuum, &at_kc, &u_grid)?;
    let reports: Vec<_> = fits.fits.iter().map(|f| &f.report).collect();
    let summary: Vec<Value> = fits
        .fits
        .iter()
        .map(|f| json!({"name": f.name, "exponent": f.exponent, "expected": f.expected, "drift": f.drift}))
        .collect();
    let body = json!({
        "closed_form": closed,
        "fits": reports,
        "exponents": summary,
        "regime": fits.regime,
        "widom": {"mismatch": fits.widom_mismatch, "error": fits.widom_error},
        "boundary": fits.boundary,
        "gap_scaling": gap,
        "failures": fits.failures,
    });
    let mut csv = Csv::new(meta, &["g", "u", "xi", "chi", "m"]);
    for pt in fits.paramagnetic.iter().chain(&fits.ordered) {
        csv.row(vec![num(pt.g), num(pt.u), num(pt.xi), num(pt.chi), num(pt.m)]);
    }
    Ok(Outputs {
        primary: Document { suffix: None, ext: "json", content: json_doc(meta, body) },
        companions: vec![Document { suffix: Some("points"), ext: "csv", content: csv.finish() }],
    })
}

pub fn default_g_grid() -> Vec<f64> {
    log_grid(DEFAULT_G_WINDOW.0, DEFAULT_G_WINDOW.1, DEFAULT_G_POINTS)
}

pub fn default_h_grid() -> Vec<f64> {
    log_grid(DEFAULT_H_WINDOW.0, DEFAULT_H_WINDOW.1, DEFAULT_G_POINTS)
}

pub fn oracle_defaults() -> ClassicalParams {
    ClassicalParams::new(1.0, 0.3, 1.0, 0.2, 0.0, 9).expect("defaults are valid")
}

pub const ORACLE_DEFAULT_L: usize = 16;
pub const ORACLE_DEFAULT_GAP: f64 = 0.4;

struct Check {
    name: &'static str,
    residual: f64,
    threshold: f64,
}

impl Check {
    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "residual": self.residual,
            "threshold": self.threshold,
            "pass": self.residual <= self.threshold,
        })
    }
}

fn max_abs(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Referee chain on one parameter record; returns the report and whether
/// every residual is within its threshold.
pub fn oracle_check(p: &ClassicalParams, l: usize, meta: &Meta) -> Res<(Outputs, bool)> {
    let d = p.int_dim()?;
    if p.h != 0.0 {
        return Err(CliError::Validation("oracle-check runs at h = 0".into()));
    }
    let spec = KernelSpectrum::new(p)?;
    let u = ORACLE_DEFAULT_GAP;
    let z = (spec.ktilde_max + u) / 2.0;
    let sys = build_dense_coupling(l, p)?;
    let mut checks = Vec::new();

    let column = greens_by_dense_solve(&sys, z, 0)?;
    let modes: Vec<f64> = (0..sys.size())
        .map(|row| {
            let (x, tau) = sys.coords(row);
            let r: Vec<i64> = x.iter().map(|&v| v as i64).collect();
            greens_mode_sum(&r, tau as i64, z, l, &spec)
        })
        .collect::<spherical_core::Result<_>>()?;
    checks.push(Check {
        name: "mode_sum_vs_dense_solve",
        residual: max_abs(modes.iter().copied().zip(column.iter().copied())),
        threshold: 1e-10,
    });

    checks.push(Check {
        name: "brute_force_vs_dense_trace",
        residual: (h_brute_force(z, l, p)? - dense_inverse_trace(&sys, z)?).abs(),
        threshold: 1e-12,
    });

    let eig = sys.eigenvalues();
    let grid = grid_spectrum(l, p)?;
    let scale = grid.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    checks.push(Check {
        name: "dense_spectrum_vs_grid",
        residual: max_abs(eig.iter().copied().zip(grid.iter().copied())) / scale,
        threshold: 1e-10,
    });

    let big_l = [256usize, 64, 16][(d - 1).min(2)];
    let exact = h_finite_m(z, &spec)?.as_f64();
    checks.push(Check {
        name: "finite_m_integral_vs_large_lattice",
        residual: (exact - h_brute_force(z, big_l, p)?).abs(),
        threshold: 1e-8,
    });
    checks.push(Check {
        name: "free_energy_vs_large_lattice",
        residual: (free_energy(z, p, &spec)? - free_energy_brute_force(z, big_l, p)?).abs(),
        threshold: 1e-8,
    });

    let origin = vec![0i64; d];
    let mut shifted = origin.clone();
    shifted[0] = 1;
    let mut worst: f64 = 0.0;
    for (r, rho) in [(&origin, 0i64), (&shifted, 0), (&origin, 1), (&shifted, 2)] {
        let a = greens_infinite_n(r, rho, z, &spec)?;
        let b = greens_mode_sum(r, rho, z, big_l, &spec)?;
        worst = worst.max((a - b).abs());
    }
    checks.push(Check {
        name: "infinite_n_vs_large_lattice",
        residual: worst,
        threshold: 1e-8,
    });

    let mut worst: f64 = 0.0;
    for t in [1e-3, 0.1, 1.0, 10.0] {
        for rho in [0i64, 1, 5] {
            let direct = kappa_integral_referee(t, rho, p.kperp, p.alpha, 2000);
            let closed = kappa_factor_closed_form(t, rho, p.kperp, p.alpha);
            worst = worst.max((closed - direct).abs() / direct.abs().max(1e-300));
        }
    }
    checks.push(Check {
        name: "kappa_closed_form_vs_quadrature",
        residual: worst,
        threshold: 1e-10,
    });

    if d == 1 {
        let h = h_continuum(u, p)?.as_f64();
        let refe = h_continuum_referee(u, p, 200)?;
        checks.push(Check {
            name: "continuum_integral_vs_referee",
            residual: (h - refe).abs() / refe,
            threshold: 1e-10,
        });
        let g = greens_continuum(&[1], 1, u, p)?;
        let refe = greens_continuum_referee(1, 1, u, p, 1e-11);
        checks.push(Check {
            name: "continuum_propagator_vs_referee",
            residual: (g - refe).abs() / refe.abs(),
            threshold: 1e-9,
        });
    }

    let pass = checks.iter().all(|c| c.residual <= c.threshold);
    let body = json!({
        "pass": pass,
        "L": l,
        "u": u,
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    });
    Ok((Outputs::single("json", json_doc(meta, body)), pass))
}
