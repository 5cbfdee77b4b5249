//! Brute-force referees. Nothing here calls the production engines; the only
//! shared ingredient is `kernel::s_exact`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{kappa, s_exact};
use crate::params::ClassicalParams;
use crate::quad::{gauss_legendre, CompensatedSum};

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Coupling matrix of a periodic L^d x M block. Row index is
/// `site * M + tau` with `site = sum_a x_a L^a`.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub l: usize,
    pub m: usize,
    pub d: usize,
    pub coupling: DMatrix<f64>,
    pub params: ClassicalParams,
}

impl DenseSystem {
    pub fn size(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    pub fn index(&self, x: &[usize], tau: usize) -> usize {
        let mut site = 0;
        let mut stride = 1;
        for &xa in x {
            site += xa * stride;
            stride *= self.l;
        }
        site * self.m + tau
    }

    /// Spatial coordinates and slice of a row index.
    pub fn coords(&self, row: usize) -> (Vec<usize>, usize) {
        let tau = row % self.m;
        let mut site = row / self.m;
        let mut x = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            x.push(site % self.l);
            site /= self.l;
        }
        (x, tau)
    }

    /// Sorted eigenvalues of the coupling matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.coupling.clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub fn build_dense_coupling(l: usize, p: &ClassicalParams) -> Result<DenseSystem> {
    build_dense_coupling_capped(l, p, DEFAULT_DENSE_CAP)
}

pub fn build_dense_coupling_capped(l: usize, p: &ClassicalParams, cap: usize) -> Result<DenseSystem> {
    p.validate()?;
    let d = p.int_dim()?;
    if l == 0 {
        return Err(Error::InvalidParams("L must be positive".into()));
    }
    let m = p.m;
    let n = l.pow(d as u32) * m;
    if n > cap {
        return Err(Error::SizeCap { size: n, cap });
    }
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mf = m as f64;
    let weights: Vec<f64> = (0..m)
        .map(|rho| {
            if rho == 0 {
                return 0.0;
            }
            let r = rho.min(m - rho) as f64;
            let s = (PI * r / mf).sin();
            p.alpha * (PI / mf).powi(2) / (s * s)
        })
        .collect();
    let sys_index = |x: &[usize], tau: usize| {
        let mut site = 0;
        let mut stride = 1;
        for &xa in x {
            site += xa * stride;
            stride *= l;
        }
        site * m + tau
    };
    let mut x = vec![0usize; d];
    for site in 0..l.pow(d as u32) {
        let mut rem = site;
        for xa in x.iter_mut() {
            *xa = rem % l;
            rem /= l;
        }
        for tau in 0..m {
            let i = sys_index(&x, tau);
            // spatial neighbours (both directions, entries accumulate)
            for a in 0..d {
                for step in [1, l - 1] {
                    let mut y = x.clone();
                    y[a] = (y[a] + step) % l;
                    if l == 1 {
                        continue;
                    }
                    let j = sys_index(&y, tau);
                    c[(i, j)] += 0.5 * p.k;
                    c[(j, i)] += 0.5 * p.k;
                }
            }
            // nearest slices and long-range dissipative coupling
            for step in [1, m - 1] {
                let j = sys_index(&x, (tau + step) % m);
                c[(i, j)] += 0.5 * p.kperp;
                c[(j, i)] += 0.5 * p.kperp;
            }
            for (rho, w) in weights.iter().enumerate().skip(1) {
                let j = sys_index(&x, (tau + rho) % m);
                c[(i, j)] += 0.5 * w;
                c[(j, i)] += 0.5 * w;
            }
        }
    }
    Ok(DenseSystem {
        l,
        m,
        d,
        coupling: c,
        params: *p,
    })
}

/// Solves (2z I - C) x = e_row by Cholesky factorisation.
pub fn greens_by_dense_solve(sys: &DenseSystem, z: f64, row: usize) -> Result<Vec<f64>> {
    let n = sys.size();
    if row >= n {
        return Err(Error::InvalidParams(format!("row {row} out of range for size {n}")));
    }
    let shifted = DMatrix::<f64>::identity(n, n) * (2.0 * z) - &sys.coupling;
    let chol = shifted.cholesky().ok_or_else(|| {
        let top = sys.eigenvalues().last().copied().unwrap_or(0.0);
        Error::NotPositiveDefinite { gap: 2.0 * z - top }
    })?;
    let mut e = DVector::<f64>::zeros(n);
    e[row] = 1.0;
    Ok(chol.solve(&e).iter().copied().collect())
}

/// Trace of (2z I - C)^{-1} divided by the number of rows.
pub fn dense_inverse_trace(sys: &DenseSystem, z: f64) -> Result<f64> {
    let n = sys.size();
    let shifted = DMatrix::<f64>::identity(n, n) * (2.0 * z) - &sys.coupling;
    let chol = shifted
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { gap: f64::NAN })?;
    let inv = chol.inverse();
    Ok((0..n).map(|i| inv[(i, i)]).sum::<f64>() / n as f64)
}

/// All K~(k, kappa_nu) on the L^d x M grid, sorted.
pub fn grid_spectrum(l: usize, p: &ClassicalParams) -> Result<Vec<f64>> {
    let d = p.int_dim()?;
    let m = p.m;
    let half = (m as i64 - 1) / 2;
    let temporal: Vec<f64> = (-half..=half)
        .map(|nu| 2.0 * p.kperp * kappa(nu, m).cos() + 2.0 * p.alpha * s_exact(nu, m))
        .collect();
    let cosines: Vec<f64> = (0..l).map(|n| (2.0 * PI * n as f64 / l as f64).cos()).collect();
    let mut out = Vec::with_capacity(l.pow(d as u32) * m);
    for site in 0..l.pow(d as u32) {
        let mut rem = site;
        let mut spatial = 0.0;
        for _ in 0..d {
            spatial += cosines[rem % l];
            rem /= l;
        }
        for lam in &temporal {
            out.push(2.0 * p.k * spatial + lam);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// (1/(L^d M)) sum_{k, nu} 1 / (2z - K~(k, kappa_nu)).
pub fn h_brute_force(z: f64, l: usize, p: &ClassicalParams) -> Result<f64> {
    let spectrum = grid_spectrum(l, p)?;
    let top = *spectrum.last().unwrap();
    if 2.0 * z <= top {
        return Err(Error::NotPositiveDefinite { gap: 2.0 * z - top });
    }
    let acc: CompensatedSum = spectrum.iter().map(|kt| 1.0 / (2.0 * z - kt)).collect();
    Ok(acc.value() / spectrum.len() as f64)
}

/// Free energy per site-slice on the finite L^d x M lattice:
/// -1/2 ln 2pi - z - h^2 / (2u) + 1/2 <ln(2z - K~)>.
pub fn free_energy_brute_force(z: f64, l: usize, p: &ClassicalParams) -> Result<f64> {
    let spectrum = grid_spectrum(l, p)?;
    let top = *spectrum.last().unwrap();
    let u = 2.0 * z - top;
    if u <= 0.0 {
        return Err(Error::NotPositiveDefinite { gap: u });
    }
    let acc: CompensatedSum = spectrum.iter().map(|kt| (2.0 * z - kt).ln()).collect();
    let mean_log = acc.value() / spectrum.len() as f64;
    Ok(-0.5 * (2.0 * PI).ln() - z - p.h * p.h / (2.0 * u) + 0.5 * mean_log)
}

/// Composite Gauss-Legendre referee for
/// int_{-pi}^{pi} dkappa/2pi e^{-a t kappa^2 - pi alpha t |kappa|} cos(kappa rho),
/// using `panels` x 20 nodes on [0, pi].
pub fn kappa_integral_referee(t: f64, rho: i64, stiffness: f64, alpha: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(20);
    let width = PI / panels as f64;
    let at = stiffness * t;
    let bt = PI * alpha * t;
    let rf = rho as f64;
    let two_p = 2 * panels as i64;
    let mut acc = CompensatedSum::default();
    for j in 0..panels {
        let lo = j as f64 * width;
        // panel phase rho * j * pi / P reduced exactly in integers
        let (sb, cb) = sin_cos_pi_ratio((rho * j as i64).rem_euclid(two_p), panels as i64);
        for (xi, wi) in x.iter().zip(&w) {
            let off = 0.5 * width * (xi + 1.0);
            let k = lo + off;
            let (so, co) = (rf * off).sin_cos();
            let phase = cb * co - sb * so;
            acc.add(wi * 0.5 * width * (-(at * k + bt) * k).exp() * phase);
        }
    }
    acc.value() / PI
}

/// sin and cos of pi * num / den with the angle carried in double-double.
fn sin_cos_pi_ratio(num: i64, den: i64) -> (f64, f64) {
    const PI_LO: f64 = 1.224_646_799_147_353_2e-16;
    let q = num as f64 / den as f64;
    let r = (-q).mul_add(den as f64, num as f64) / den as f64;
    let hi = PI * q;
    let lo = PI.mul_add(q, -hi) + PI_LO * q + PI * r;
    let (s, c) = hi.sin_cos();
    (s + c * lo, c - s * lo)
}

/// int_0^pi dkappa / (a kappa^2 + b kappa + c) for a > 0, b >= 0, c > 0.
fn rational_kappa_integral(a: f64, b: f64, c: f64) -> f64 {
    let disc = b * b - 4.0 * a * c;
    let x_hi = 2.0 * a * PI + b;
    if disc < 0.0 {
        let q = (-disc).sqrt();
        // atan(x_hi/q) - atan(b/q) combined into one atan
        2.0 / q * ((x_hi - b) * q).atan2(q * q + x_hi * b)
    } else if disc > 0.0 {
        let q = disc.sqrt();
        // ln((x - q)/(x + q)) with x - q = (x^2 - b^2 + 4ac)/(x + q)
        let f = |x: f64, kap: f64| {
            let num = 2.0 * a * kap * (2.0 * a * kap + 2.0 * b) + 4.0 * a * c;
            (num / (x + q)).ln() - (x + q).ln()
        };
        (f(x_hi, PI) - f(b, 0.0)) / q
    } else {
        2.0 / b - 2.0 / x_hi
    }
}

/// High-resolution referee for the d = 1 continuum saddle integral:
/// the kappa integral in closed form, the k integral by composite
/// Gauss-Legendre with `panels` x 16 nodes.
pub fn h_continuum_referee(u: f64, p: &ClassicalParams, panels: usize) -> Result<f64> {
    if p.int_dim()? != 1 {
        return Err(Error::UnsupportedEngine("continuum referee is d = 1 only".into()));
    }
    let (x, w) = gauss_legendre(16);
    let width = PI / panels as f64;
    // uniform panels, with the first one graded geometrically towards the
    // logarithmic singularity at k = 0 when u = 0
    let mut edges: Vec<f64> = (0..60).rev().map(|j| width * 0.5f64.powi(j)).collect();
    edges.insert(0, 0.0);
    edges.extend((2..=panels).map(|j| j as f64 * width));
    let mut acc = CompensatedSum::default();
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        for (xi, wi) in x.iter().zip(&w) {
            let k = lo + 0.5 * (hi - lo) * (xi + 1.0);
            let c = u + p.k * k * k;
            acc.add(wi * 0.5 * (hi - lo) * rational_kappa_integral(p.kperp, PI * p.alpha, c));
        }
    }
    // (1/2pi) * 2 over k, (1/2pi) * 2 over kappa
    Ok(acc.value() / (PI * PI))
}

/// Midpoint Riemann sum of the d = 1 continuum saddle integrand on an
/// nk x nkappa grid over [-pi, pi]^2.
pub fn h_continuum_midpoint(u: f64, p: &ClassicalParams, nk: usize, nkappa: usize) -> f64 {
    let hk = 2.0 * PI / nk as f64;
    let hq = 2.0 * PI / nkappa as f64;
    let mut acc = CompensatedSum::default();
    for i in 0..nk {
        let k = -PI + (i as f64 + 0.5) * hk;
        let c = u + p.k * k * k;
        for j in 0..nkappa {
            let q = -PI + (j as f64 + 0.5) * hq;
            acc.add(1.0 / (c + p.kperp * q * q + PI * p.alpha * q.abs()));
        }
    }
    acc.value() / (nk * nkappa) as f64
}

/// Direct 2-d adaptive quadrature of the d = 1 continuum propagator
/// G(r, rho) = int dk dkappa / (2pi)^2 cos(k r) cos(kappa rho) / (u + K k^2 + Kperp kappa^2 + pi alpha |kappa|).
pub fn greens_continuum_referee(r: i64, rho: i64, u: f64, p: &ClassicalParams, rel_tol: f64) -> f64 {
    use crate::quad::{integrate_panels, QuadConfig};
    let cfg = QuadConfig::rel(rel_tol);
    let panels = |n: i64| 4 + n.unsigned_abs() as usize;
    let inner = |k: f64| {
        let c = u + p.k * k * k;
        integrate_panels(
            |q: f64| (q * rho as f64).cos() / (c + p.kperp * q * q + PI * p.alpha * q),
            0.0,
            PI,
            panels(rho),
            &cfg,
        )
        .value
    };
    let outer = integrate_panels(|k: f64| (k * r as f64).cos() * inner(k), 0.0, PI, panels(r), &cfg);
    outer.value / (PI * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_integral_branches() {
        for (a, b, c) in [(2.0, 0.3, 1.0), (2.0, 3.0, 0.01), (1.0, 2.0, 1.0)] {
            let (x, w) = gauss_legendre(40);
            let f = |k: f64| 1.0 / (a * k * k + b * k + c);
            // geometric panels resolve a pole just below k = 0
            let edges: Vec<f64> = std::iter::once(0.0).chain((0..=60).map(|i| PI * 0.7f64.powi(60 - i))).collect();
            let direct: f64 = edges
                .windows(2)
                .map(|e| {
                    let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
                    x.iter().zip(&w).map(|(xi, wi)| wi * half * f(mid + half * xi)).sum::<f64>()
                })
                .sum();
            let closed = rational_kappa_integral(a, b, c);
            assert!((closed / direct - 1.0).abs() < 1e-12, "{a} {b} {c}");
        }
    }

    #[test]
    fn dense_rows_sum_to_max() {
        let p = ClassicalParams::new(1.0, 0.3, 1.0, 0.4, 0.0, 5).unwrap();
        let sys = build_dense_coupling(4, &p).unwrap();
        let top = grid_spectrum(4, &p).unwrap().last().copied().unwrap();
        for i in 0..sys.size() {
            let s: f64 = sys.coupling.row(i).iter().sum();
            assert!((s - top).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_enforced() {
        let p = ClassicalParams::new(2.0, 0.3, 1.0, 0.4, 0.0, 101).unwrap();
        assert!(matches!(build_dense_coupling(8, &p), Err(Error::SizeCap { .. })));
    }
}
