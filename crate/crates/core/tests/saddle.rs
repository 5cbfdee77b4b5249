use std::f64::consts::PI;

use spherical_core::criticality::{default_u_grid, gap_scaling_fit};
use spherical_core::kernel::KernelSpectrum;
use spherical_core::saddle::*;
use spherical_core::ClassicalParams;

fn params(d: f64, k: f64, kperp: f64, alpha: f64, m: usize) -> ClassicalParams {
    ClassicalParams::new(d, k, kperp, alpha, 0.0, m).unwrap()
}

#[test]
fn finite_m_large_z_limit() {
    let p = params(2.0, 0.3, 1.0, 0.2, 11);
    let spec = KernelSpectrum::new(&p).unwrap();
    for z in [1e3, 1e5] {
        let h = h_finite_m(z, &spec).unwrap().as_f64();
        assert!((2.0 * z * h - 1.0).abs() < 2.0 * spec.ktilde_max / z, "{z} {h}");
    }
}

#[test]
fn finite_m_zero_gap_divergence_depends_on_dimension() {
    let p = params(1.0, 0.3, 1.0, 0.2, 11);
    let spec = KernelSpectrum::new(&p).unwrap();
    assert!(h_finite_m(spec.ktilde_max / 2.0, &spec).unwrap().is_divergent());
    let p = params(3.0, 0.3, 1.0, 0.2, 11);
    let spec = KernelSpectrum::new(&p).unwrap();
    let h = h_finite_m(spec.ktilde_max / 2.0, &spec).unwrap();
    assert!(h.finite().is_some_and(|v| v.is_finite() && v > 0.0));
    assert!(h_finite_m(spec.ktilde_max / 2.0 - 1e-3, &spec).is_err());
}

#[test]
fn continuum_large_u_limit_and_zero_gap() {
    let p = params(1.0, 0.05, 1.0, 0.3, 3);
    let u = 1e6;
    let h = h_continuum(u, &p).unwrap().as_f64();
    assert!((u * h - 1.0).abs() < 1e-4);
    assert!(h_continuum(0.0, &p).unwrap().finite().is_some());
    assert!(h_continuum(0.0, &p.with_alpha(0.0)).unwrap().is_divergent());
    assert!(h_continuum(0.0, &params(2.0, 0.05, 1.0, 0.0, 3)).unwrap().finite().is_some());
    assert!(h_continuum(-1.0, &p).is_err());
}

#[test]
fn saddle_integral_is_decreasing_and_convex() {
    let grid: Vec<f64> = (0..25).map(|i| 1e-3 * 1.5f64.powi(i)).collect();
    for engine in [Engine::FiniteM, Engine::Continuum] {
        for d in [1.0, 2.0] {
            let p = params(d, 0.1, 1.0, 0.3, 9);
            let integral = SaddleIntegral::new(engine, &p).unwrap();
            let h: Vec<f64> = grid.iter().map(|&u| integral.h(u).unwrap().as_f64()).collect();
            for i in 1..h.len() {
                assert!(h[i] < h[i - 1], "{engine:?} d={d}");
            }
            for i in 1..h.len() - 1 {
                // convexity on a non-uniform grid
                let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
                let interp = h[i - 1] + (h[i + 1] - h[i - 1]) * (x1 - x0) / (x2 - x0);
                assert!(h[i] <= interp, "{engine:?} d={d} i={i}");
            }
        }
    }
}

#[test]
fn finite_m_chain_is_always_disordered() {
    for (k, kperp, alpha, m) in [(0.05, 1.0, 0.1, 5), (1.0, 0.5, 0.8, 21), (3.0, 2.0, 0.05, 9)] {
        let p = params(1.0, k, kperp, alpha, m);
        let s = solve_saddle(&p, Engine::FiniteM, 1e-10).unwrap();
        assert_eq!(s.phase, Phase::Paramagnetic);
        assert!(s.h_critical_value.is_divergent());
        assert!(s.u > 0.0 && s.residual <= 1e-10);
        assert_eq!(s.m, 0.0);
    }
}

#[test]
fn continuum_chain_orders_at_large_coupling() {
    let small = solve_saddle(&params(1.0, 1e-3, 2.0, 0.5, 3), Engine::Continuum, 1e-10).unwrap();
    assert_eq!(small.phase, Phase::Paramagnetic);
    let large = solve_saddle(&params(1.0, 0.1, 2.0, 0.5, 3), Engine::Continuum, 1e-10).unwrap();
    assert_eq!(large.phase, Phase::Ferromagnetic);
    assert_eq!(large.u, 0.0);
    let h0 = large.h_critical_value.as_f64();
    assert!((large.m * large.m + h0 - 1.0).abs() < 1e-14);
    let (m, chi) = magnetization_susceptibility(&large, &params(1.0, 0.1, 2.0, 0.5, 3));
    assert_eq!(m, large.m);
    assert!(chi.is_divergent());
}

#[test]
fn field_saddle_satisfies_defining_relations() {
    for engine in [Engine::FiniteM, Engine::Continuum] {
        for h in [1e-4, 0.01, 0.3] {
            let p = params(1.0, 0.1, 2.0, 0.5, 7).with_h(h);
            let tol = 1e-10;
            let s = solve_saddle(&p, engine, tol).unwrap();
            let hv = SaddleIntegral::new(engine, &p).unwrap().h(s.u).unwrap().as_f64();
            assert!((1.0 - (h / s.u).powi(2) - hv).abs() <= tol);
            assert!((s.m * s.u - h).abs() <= 1e-15 * h);
            // the field also selects a gap in the otherwise ordered continuum phase
            assert_eq!(s.phase, Phase::Paramagnetic);
        }
    }
}

#[test]
fn radial_engine_cannot_solve() {
    let p = params(1.0, 0.1, 2.0, 0.5, 3);
    assert!(solve_saddle(&p, Engine::Radial, 1e-8).is_err());
}

#[test]
fn free_energy_large_z_limit() {
    let p = params(1.0, 0.3, 1.0, 0.2, 9);
    let spec = KernelSpectrum::new(&p).unwrap();
    let z = 1e6;
    let f = free_energy(z, &p, &spec).unwrap();
    let approx = -0.5 * (2.0 * PI).ln() - z + 0.5 * (2.0 * z).ln();
    assert!((f - approx).abs() < 1e-5);
    assert!(free_energy(spec.ktilde_max / 2.0, &p, &spec).is_err());
}

#[test]
fn free_energy_is_stationary_at_the_saddle() {
    let tol = 1e-10;
    let p = params(1.0, 0.1, 1.0, 0.2, 15);
    let spec = KernelSpectrum::new(&p).unwrap();
    let s = solve_saddle(&p, Engine::FiniteM, tol).unwrap();
    let dz = 1e-3 * s.u;
    let f = |k: f64| free_energy(s.z + k * dz, &p, &spec).unwrap();
    let slope = (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * dz);
    assert!(slope.abs() <= 10.0 * tol, "{slope}");
    // away from the saddle the slope is -1 + H
    let z = s.z * 1.01;
    let dz = 1e-3 * (2.0 * z - spec.ktilde_max);
    let f = |k: f64| free_energy(z + k * dz, &p, &spec).unwrap();
    let fd = (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * dz);
    let h = h_finite_m(z, &spec).unwrap().as_f64();
    assert!((fd - (h - 1.0)).abs() < 1e-7);
}

#[test]
fn susceptibility_matches_small_field_response() {
    let p = params(1.0, 0.001, 2.0, 0.5, 3);
    let s = solve_saddle(&p, Engine::Continuum, 1e-10).unwrap();
    let (m, chi) = magnetization_susceptibility(&s, &p);
    assert_eq!(m, 0.0);
    let h = 1e-6 * s.u;
    let sh = solve_saddle(&p.with_h(h), Engine::Continuum, 1e-10).unwrap();
    assert!((sh.m / h / chi.as_f64() - 1.0).abs() < 1e-3);
}

#[test]
fn critical_coupling_reevaluation_brackets_one() {
    let tol = 1e-10;
    let b = critical_coupling(0.5, 2.0, 1, tol).unwrap();
    let at = |k: f64| h_continuum(0.0, &params(1.0, k, 2.0, 0.5, 3)).unwrap().as_f64();
    assert!((at(b.k_c) - 1.0).abs() <= tol);
    assert!(at(b.k_c * (1.0 - 1e-3)) > 1.0 && at(b.k_c * (1.0 + 1e-3)) < 1.0);
    assert!(b.bracket_width <= 1e-8 * b.k_c);
    assert!(critical_coupling(0.0, 2.0, 1, tol).is_err());
}

#[test]
fn more_damping_orders_sooner() {
    let ks: Vec<f64> = [0.3, 0.6, 1.2, 2.4]
        .iter()
        .map(|&a| critical_coupling(a, 2.0, 1, 1e-10).unwrap().k_c)
        .collect();
    assert!(ks.windows(2).all(|w| w[1] < w[0]), "{ks:?}");
}

#[test]
fn phase_boundary_slope_is_positive() {
    let alphas: Vec<f64> = (0..6).map(|i| 0.5 + 0.5 * i as f64).collect();
    let (pts, rep) = trace_phase_boundary(&alphas, 1.5, 1, 1e-10).unwrap();
    assert_eq!(pts.len(), 6);
    assert!(pts.windows(2).all(|w| w[0].alpha < w[1].alpha && w[0].g_c < w[1].g_c));
    assert!(rep.slope > 0.0);
    assert_eq!(rep.engine, "continuum");
}

#[test]
fn radial_integrand_vanishes_where_the_log_argument_is_one() {
    let p = params(1.0, 0.01, 2.0, 0.5, 3);
    let u = (PI * p.alpha).powi(2) / p.kperp;
    assert!((p.kperp * u / (PI * p.alpha).powi(2) - 1.0).abs() < 1e-15);
    assert!(radial_log_sign_change(u, &p));
    assert!(!radial_log_sign_change(0.0, &p));
    // consistent difference form
    let a = h_radial(0.0, &p).unwrap() - h_radial(0.5, &p).unwrap();
    assert!((a - delta_h_radial(0.5, &p).unwrap()).abs() < 1e-10);
}

#[test]
fn radial_scaling_fits() {
    let p = ClassicalParams::new(1.0, 0.01, 2.0, 0.5, 0.0, 3).unwrap();
    let fit = gap_scaling_fit(Engine::Radial, &p, &default_u_grid(p.k)).unwrap();
    assert!((fit.power.slope - 0.5).abs() <= 0.02, "{}", fit.power.slope);
    assert_eq!(fit.power.engine, "radial");

    let p = ClassicalParams::new(2.0, 0.01, 2.0, 0.5, 0.0, 3).unwrap();
    let fit = gap_scaling_fit(Engine::Radial, &p, &default_u_grid(p.k)).unwrap();
    assert!(fit.log_corrected.as_ref().unwrap().slope > 0.0);
    assert!(fit.log_corrected_log_rms.unwrap() < fit.power_log_rms);

    // non-integer dimension between the two
    let p = ClassicalParams::new(1.5, 0.01, 2.0, 0.5, 0.0, 3).unwrap();
    let fit = gap_scaling_fit(Engine::Radial, &p, &default_u_grid(p.k)).unwrap();
    assert!((fit.power.slope - 0.75).abs() <= 0.03, "{}", fit.power.slope);
}

#[test]
fn engines_agree_on_mean_field_scaling() {
    let grid = default_u_grid(1.0);
    let finite = gap_scaling_fit(Engine::FiniteM, &params(3.0, 1.0, 1.0, 0.2, 2001), &grid).unwrap();
    let cont = gap_scaling_fit(Engine::Continuum, &params(3.0, 1.0, 1.0, 0.2, 3), &grid).unwrap();
    assert!((finite.power.slope - 1.0).abs() < 0.05, "{}", finite.power.slope);
    assert!((finite.power.slope - cont.power.slope).abs() < 0.05);
}

#[test]
fn gap_scaling_rejects_divergent_zero_gap() {
    let p = params(1.0, 0.01, 2.0, 0.0, 3);
    assert!(gap_scaling_fit(Engine::Continuum, &p, &default_u_grid(p.k)).is_err());
}

#[test]
fn serialized_forms() {
    let v = serde_json::to_value(MaybeDivergent::Divergent).unwrap();
    assert_eq!(v["kind"], "divergent");
    let b = BoundaryPoint { alpha: 1.0, g_c: 2.0, k_c: 0.5, bracket_width: 0.0 };
    let v = serde_json::to_value(b).unwrap();
    assert_eq!(v["G_c"], 2.0);
    assert_eq!(v["K_c"], 0.5);
}
