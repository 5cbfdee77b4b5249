use spherical_core::correlators::*;
use spherical_core::fit::{fit_line, fit_power_law};
use spherical_core::kernel::{k_tilde, kappa, KernelSpectrum};
use spherical_core::oracle::build_dense_coupling;
use spherical_core::saddle::*;
use spherical_core::ClassicalParams;

fn params(d: f64, k: f64, kperp: f64, alpha: f64, m: usize) -> ClassicalParams {
    ClassicalParams::new(d, k, kperp, alpha, 0.0, m).unwrap()
}

fn z_at_gap(spec: &KernelSpectrum, u: f64) -> f64 {
    (spec.ktilde_max + u) / 2.0
}

fn fake_saddle(u: f64) -> SaddleSolution {
    SaddleSolution {
        z: f64::NAN,
        u,
        phase: Phase::Paramagnetic,
        m: 0.0,
        h_critical_value: MaybeDivergent::Divergent,
        residual: 0.0,
        engine: Engine::Continuum,
    }
}

#[test]
fn large_z_limit() {
    let p = params(1.0, 0.3, 1.0, 0.2, 9);
    let spec = KernelSpectrum::new(&p).unwrap();
    let z = 1e4;
    let g00 = greens_infinite_n(&[0], 0, z, &spec).unwrap();
    assert!((2.0 * z * g00 - 1.0).abs() < 1e-3);
    let g10 = greens_infinite_n(&[1], 0, z, &spec).unwrap();
    let g01 = greens_infinite_n(&[0], 1, z, &spec).unwrap();
    assert!(g10 < 1e-3 * g00 && g01 < 1e-3 * g00);
}

#[test]
fn symmetry_periodicity_and_diagonal_dominance() {
    let p = params(2.0, 0.2, 1.0, 0.3, 7);
    let spec = KernelSpectrum::new(&p).unwrap();
    let z = z_at_gap(&spec, 0.05);
    let g00 = greens_infinite_n(&[0, 0], 0, z, &spec).unwrap();
    for (r, rho) in [([1i64, 0i64], 1i64), ([2, -1], 3), ([0, 3], -2)] {
        let g = greens_infinite_n(&r, rho, z, &spec).unwrap();
        let neg_r = [-r[0], -r[1]];
        assert!((g - greens_infinite_n(&neg_r, rho, z, &spec).unwrap()).abs() < 1e-14);
        assert!((g - greens_infinite_n(&r, -rho, z, &spec).unwrap()).abs() < 1e-14);
        assert!((g - greens_infinite_n(&r, rho + 7, z, &spec).unwrap()).abs() < 1e-14);
        assert!(g.abs() <= g00);
        let ms = greens_mode_sum(&r, rho, z, 12, &spec).unwrap();
        assert!((ms - greens_mode_sum(&neg_r, -rho, z, 12, &spec).unwrap()).abs() < 1e-14);
    }
    let pc = params(1.0, 0.05, 1.0, 0.3, 3);
    let c00 = greens_continuum(&[0], 0, 0.01, &pc).unwrap();
    for (r, rho) in [(1i64, 0i64), (2, 3), (0, 4)] {
        let g = greens_continuum(&[r], rho, 0.01, &pc).unwrap();
        assert!((g - greens_continuum(&[-r], rho, 0.01, &pc).unwrap()).abs() < 1e-13);
        assert!((g - greens_continuum(&[r], -rho, 0.01, &pc).unwrap()).abs() < 1e-13);
        assert!(g.abs() <= c00);
    }
}

#[test]
fn dense_table_equals_mode_sum_table() {
    let p = params(2.0, 0.2, 1.0, 0.3, 5);
    let spec = KernelSpectrum::new(&p).unwrap();
    let z = z_at_gap(&spec, 0.3);
    let sys = build_dense_coupling(6, &p).unwrap();
    let disp: Vec<(Vec<i64>, i64)> = vec![(vec![0, 0], 0), (vec![1, 0], 0), (vec![2, -1], 2), (vec![-3, 1], -1)];
    let dense = build_greens_table(&GreensSource::DenseOracle { sys: &sys, z }, &disp).unwrap();
    let modes = build_greens_table(&GreensSource::ModeSum { spec: &spec, z, l: 6 }, &disp).unwrap();
    for (a, b) in dense.samples.iter().zip(&modes.samples) {
        assert!((a.value - b.value).abs() < 1e-12);
    }
    assert_eq!(dense.engine.name(), "dense-oracle");
    assert!(dense.get(&[1, 0], 0).is_some());
}

#[test]
fn mode_sum_fourier_inversion() {
    let p = params(1.0, 0.3, 1.0, 0.2, 5);
    let spec = KernelSpectrum::new(&p).unwrap();
    let z = z_at_gap(&spec, 0.2);
    let l = 8usize;
    let m = 5usize;
    let mut g = vec![vec![0.0; m]; l];
    for (r, row) in g.iter_mut().enumerate() {
        for (rho, v) in row.iter_mut().enumerate() {
            *v = greens_mode_sum(&[r as i64], rho as i64, z, l, &spec).unwrap();
        }
    }
    for n in 0..l {
        let k = 2.0 * std::f64::consts::PI * n as f64 / l as f64;
        for nu in -2..=2i64 {
            let kap = kappa(nu, m);
            let mut transform = 0.0;
            for (r, row) in g.iter().enumerate() {
                for (rho, v) in row.iter().enumerate() {
                    transform += v * (k * r as f64 + kap * rho as f64).cos();
                }
            }
            let inv = 2.0 * z - k_tilde(&[k], nu, &p);
            assert!((transform * inv - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn constraint_at_solved_saddle_in_two_dimensions() {
    let p = params(2.0, 0.1, 1.0, 0.3, 9);
    let spec = KernelSpectrum::new(&p).unwrap();
    let s = solve_saddle(&p, Engine::FiniteM, 1e-10).unwrap();
    assert_eq!(s.phase, Phase::Paramagnetic);
    let g = greens_infinite_n(&[0, 0], 0, s.z, &spec).unwrap();
    assert!((g - 1.0).abs() < 1e-9);
}

#[test]
fn continuum_and_lattice_share_the_infrared() {
    // cutoff effects at small displacements stay at the ten-percent level
    let p = params(1.0, 0.1, 1.0, 0.3, 4001);
    let spec = KernelSpectrum::new(&p).unwrap();
    let u = 1e-3;
    let z = z_at_gap(&spec, u);
    for (r, rho) in [(1i64, 0i64), (0, 1), (2, 1)] {
        let a = greens_infinite_n(&[r], rho, z, &spec).unwrap();
        let b = greens_continuum(&[r], rho, u, &p).unwrap();
        assert!(((a - b) / b).abs() < 0.1, "({r},{rho}) {a} {b}");
    }
}

#[test]
fn quadrupling_the_gap_halves_xi() {
    let p = params(1.0, 0.1, 1.0, 0.5, 101);
    let spec = KernelSpectrum::new(&p).unwrap();
    let xi_fit = |u: f64| {
        let z = z_at_gap(&spec, u);
        let xi = (p.k / u).sqrt();
        let (lo, hi) = ((2.0 * xi).ceil() as i64, (5.0 * xi).floor() as i64);
        let disp: Vec<(Vec<i64>, i64)> = (lo..=hi).map(|r| (vec![r], 0)).collect();
        let tab = build_greens_table(&GreensSource::InfiniteN { spec: &spec, z }, &disp).unwrap();
        fit_correlation_length(&tab, (lo, hi)).unwrap()
    };
    let a = xi_fit(4e-4);
    let b = xi_fit(1.6e-3);
    let ratio = b.xi_fit / a.xi_fit;
    assert!((ratio - 0.5).abs() < 0.01, "{ratio}");
    assert!(a.report.residual_rms < 1e-2);
}

#[test]
fn correlation_length_window_needs_four_points() {
    let p = params(1.0, 0.1, 1.0, 0.5, 11);
    let spec = KernelSpectrum::new(&p).unwrap();
    let z = z_at_gap(&spec, 0.01);
    let disp: Vec<(Vec<i64>, i64)> = (0..3).map(|r| (vec![r], 0)).collect();
    let tab = build_greens_table(&GreensSource::InfiniteN { spec: &spec, z }, &disp).unwrap();
    assert!(fit_correlation_length(&tab, (0, 2)).is_err());
}

fn tail_table(p: &ClassicalParams, u: f64, rhos: impl Iterator<Item = i64>) -> GreensTable {
    let disp: Vec<(Vec<i64>, i64)> = rhos.map(|r| (vec![0], r)).collect();
    build_greens_table(&GreensSource::Continuum { params: p, u }, &disp).unwrap()
}

#[test]
fn tail_plateau_and_refinement() {
    let p = params(1.0, 1e-6, 0.2, 0.1, 3);
    let u = 1e-2 * p.kperp;
    let ws = tail_window_start(u, &p, 1.0);
    let tab = tail_table(&p, u, 3 * ws..3 * ws + 40);
    let rep = tail_asymptotics_with(&tab, &fake_saddle(u), &p, 1.0).unwrap();
    assert_eq!(rep.window_start, ws);
    assert!(rep.plateau.iter().all(|&(_, v)| (v - 1.0).abs() < 0.1));
    // the refined formula removes the even/odd alternation of the leading one
    let curvature = |v: &[f64]| v.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).fold(0.0, f64::max);
    let lead = &rep.leading_residuals;
    for w in lead.windows(4) {
        assert!((w[0] - 2.0 * w[1] + w[2]).signum() != (w[1] - 2.0 * w[2] + w[3]).signum());
    }
    assert!(curvature(&rep.refined_residuals) < 0.1 * curvature(lead));
    assert!(rep.refined_rms() < rep.leading_rms());

    // and the plateau approaches one deeper in the tail
    let far = tail_table(&p, u, 30 * ws..30 * ws + 4);
    let far = tail_asymptotics_with(&far, &fake_saddle(u), &p, 1.0).unwrap();
    assert!(far.leading_rms() < 0.2 * rep.leading_rms());
}

#[test]
fn tail_needs_in_window_samples_and_dissipation() {
    let p = params(1.0, 1e-6, 0.2, 0.1, 3);
    let u = 2e-3;
    let tab = tail_table(&p, u, 1..20);
    match tail_asymptotics(&tab, &fake_saddle(u), &p) {
        Err(spherical_core::Error::TailWindow { required_min_rho }) => {
            assert_eq!(required_min_rho, tail_window_start(u, &p, DEFAULT_TAIL_MULTIPLIER))
        }
        other => panic!("{other:?}"),
    }
    let undamped = p.with_alpha(0.0);
    assert_eq!(tail_leading(10, u, &undamped), 0.0);
    assert!(tail_asymptotics(&tab, &fake_saddle(u), &undamped).is_err());
}

#[test]
fn tail_is_a_power_law_not_an_exponential() {
    let p = params(1.0, 1e-6, 0.2, 0.1, 3);
    let u = 2e-3;
    let ws = tail_window_start(u, &p, 1.0);
    let rhos: Vec<i64> = (0..12).map(|i| 10 * ws * (1 << (i / 3)) + 2 * (i % 3)).collect();
    let tab = tail_table(&p, u, rhos.iter().copied());
    let xs: Vec<f64> = rhos.iter().map(|&r| r as f64).collect();
    let ys: Vec<f64> = tab.samples.iter().map(|s| s.value).collect();
    let power = fit_power_law(&xs, &ys).unwrap();
    let lny: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let expo = fit_line(&xs, &lny).unwrap();
    assert!(power.residual_rms < expo.residual_rms);
    assert!((power.slope + 2.0).abs() < 0.05);

    // without dissipation the lattice decay in imaginary time is exponential
    let q = params(1.0, 0.05, 0.2, 0.0, 201);
    let spec = KernelSpectrum::new(&q).unwrap();
    let z = z_at_gap(&spec, 0.05);
    let rhos: Vec<i64> = (1..12).map(|i| 2 * i).collect();
    let xs: Vec<f64> = rhos.iter().map(|&r| r as f64).collect();
    let ys: Vec<f64> = rhos.iter().map(|&r| greens_infinite_n(&[0], r, z, &spec).unwrap()).collect();
    let lny: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let expo = fit_line(&xs, &lny).unwrap();
    let power = fit_power_law(&xs, &ys).unwrap();
    assert!(expo.residual_rms < 0.2 * power.residual_rms, "{expo:?} {power:?}");

    // while the sharp frequency cutoff of the continuum leaves only the alternating term
    let q = params(1.0, 1e-6, 0.2, 0.0, 3);
    for rho in [40i64, 41, 80, 81] {
        let g = greens_continuum(&[0], rho, 0.05, &q).unwrap();
        let t = tail_refined(rho, 0.05, &q);
        assert!(((g - t) / t).abs() < 1e-2, "{rho}: {g} {t}");
    }
}

#[test]
fn erfcx_integral_entry_point() {
    let p = params(1.0, 0.1, 2.0, 0.5, 3);
    assert!(kappa_erfcx_integral(0.0, 0, &p).is_err());
    let v = kappa_erfcx_integral(0.3, 5, &p).unwrap();
    let direct = spherical_core::oracle::kappa_integral_referee(0.3, 5, 2.0, 0.5, 2000);
    assert!((v - direct).abs() < 1e-12 * direct.abs());
}
