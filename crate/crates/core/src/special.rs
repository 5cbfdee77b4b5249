//! Special functions used by the auxiliary-time engines.
//!
//! The complex scaled complementary error function is evaluated through the
//! Faddeeva function `w(z) = exp(-z^2) erfc(-iz)`, following the
//! continued-fraction / modified Algorithm 916 split used by S. G. Johnson's
//! Faddeeva package. Real and imaginary parts are each computed with small
//! relative error, which matters because the imaginary-time correlator takes
//! real parts of nearly imaginary values.
//!
//! Modified Bessel functions are only needed for integer order and are always
//! returned in exponentially scaled form `e^{-x} I_n(x)`.

use num_complex::Complex64;
use std::f64::consts::PI;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Scaled complementary error function `erfcx(x) = exp(x^2) erfc(x)` for real `x`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x < 0.0 {
        if x < -26.7 {
            return f64::INFINITY;
        }
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < 0.5 {
        (x * x).exp() * libm::erfc(x)
    } else if x < 8.0 {
        exp_square(x) * libm::erfc(x)
    } else {
        // Laplace continued fraction, evaluated bottom-up.
        let mut f = x;
        for k in (1..=60).rev() {
            f = x + 0.5 * f64::from(k) / f;
        }
        FRAC_1_SQRT_PI / f
    }
}

/// `exp(x^2)` with the rounding error of `x*x` folded back in.
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * (1.0 + lo)
}

/// Complex scaled complementary error function `erfcx(z) = exp(z^2) erfc(z)`.
pub fn erfcx_complex(z: Complex64) -> Complex64 {
    faddeeva_w(Complex64::new(-z.im, z.re))
}

#[inline]
fn sinc(x: f64, sinx: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - 0.166_666_666_666_666_67 * x * x
    } else {
        sinx / x
    }
}

#[inline]
fn sinh_taylor(x: f64) -> f64 {
    x * (1.0 + (x * x) * (0.166_666_666_666_666_67 + 0.008_333_333_333_333_333 * (x * x)))
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` at full double precision.
pub fn faddeeva_w(z: Complex64) -> Complex64 {
    if z.re == 0.0 {
        // w(iy) = erfcx(y)
        return Complex64::new(erfcx(z.im), z.re);
    }

    // a = pi / sqrt(-ln(eps/2)), c = 2a/pi
    const A: f64 = 0.518_321_480_430_085_9;
    const C: f64 = 0.329_973_702_884_629_07;
    const A2: f64 = 0.268_657_157_075_235_95;
    let relerr = f64::EPSILON;

    let x = z.re.abs();
    let y = z.im;
    let ya = y.abs();

    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    let mut sum3;
    let mut sum4 = 0.0;
    let mut sum5;

    if ya > 7.0 || (x > 6.0 && (ya > 0.1 || (x > 8.0 && ya > 1e-10) || x > 28.0)) {
        // Continued fraction for large |z|; compute for -z when y < 0.
        let xs = if y < 0.0 { -z.re } else { z.re };
        let ret = if x + ya > 4000.0 {
            if x + ya > 1.0e7 {
                // w(z) ~ i / (sqrt(pi) z), scaled to avoid overflow
                if x > ya {
                    let yax = ya / xs;
                    let denom = FRAC_1_SQRT_PI / (xs + yax * ya);
                    Complex64::new(denom * yax, denom)
                } else if ya.is_infinite() {
                    return if x.is_nan() || y < 0.0 {
                        Complex64::new(f64::NAN, f64::NAN)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                } else {
                    let xya = xs / ya;
                    let denom = FRAC_1_SQRT_PI / (xya * xs + ya);
                    Complex64::new(denom, denom * xya)
                }
            } else {
                // w(z) ~ i z / (sqrt(pi) (z^2 - 1/2))
                let dr = xs * xs - ya * ya - 0.5;
                let di = 2.0 * xs * ya;
                let denom = FRAC_1_SQRT_PI / (dr * dr + di * di);
                Complex64::new(denom * (xs * di - ya * dr), denom * (xs * dr + ya * di))
            }
        } else {
            const C0: f64 = 3.9;
            const C1: f64 = 11.398;
            const C2: f64 = 0.08254;
            const C3: f64 = 0.1421;
            const C4: f64 = 0.2023;
            let terms = (C0 + C1 / (C2 * x + C3 * ya + C4)).floor();
            let mut wr = xs;
            let mut wi = ya;
            let mut nu = 0.5 * (terms - 1.0);
            while nu > 0.4 {
                let denom = nu / (wr * wr + wi * wi);
                wr = xs - wr * denom;
                wi = ya + wi * denom;
                nu -= 0.5;
            }
            let denom = FRAC_1_SQRT_PI / (wr * wr + wi * wi);
            Complex64::new(denom * wi, denom * wr)
        };
        if y < 0.0 {
            // w(z) = 2 exp(-z^2) - w(-z)
            return 2.0 * Complex64::new((ya - xs) * (xs + ya), 2.0 * xs * y).exp() - ret;
        }
        return ret;
    }

    if x < 10.0 {
        if y.is_nan() {
            return Complex64::new(y, y);
        }
        let mut prod2ax = 1.0;
        let mut prodm2ax = 1.0;
        let expx2;
        sum3 = 0.0;
        sum5 = 0.0;
        if x < 5e-4 {
            // sum5 - sum4 accumulated together for accuracy
            let x2 = x * x;
            expx2 = 1.0 - x2 * (1.0 - 0.5 * x2);
            let ax2 = 1.036_642_960_860_171_9 * x; // 2ax
            let exp2ax = 1.0 + ax2 * (1.0 + ax2 * (0.5 + 0.166_666_666_666_666_67 * ax2));
            let expm2ax = 1.0 - ax2 * (1.0 - ax2 * (0.5 - 0.166_666_666_666_666_67 * ax2));
            let mut n = 1.0_f64;
            loop {
                let coef = (-A2 * n * n).exp() * expx2 / (A2 * (n * n) + y * y);
                prod2ax *= exp2ax;
                prodm2ax *= expm2ax;
                sum1 += coef;
                sum2 += coef * prodm2ax;
                sum3 += coef * prod2ax;
                sum5 += coef * (2.0 * A) * n * sinh_taylor((2.0 * A) * n * x);
                if coef * prod2ax < relerr * sum3 {
                    break;
                }
                n += 1.0;
            }
        } else {
            expx2 = (-x * x).exp();
            let exp2ax = ((2.0 * A) * x).exp();
            let expm2ax = 1.0 / exp2ax;
            let mut n = 1.0_f64;
            loop {
                let coef = (-A2 * n * n).exp() * expx2 / (A2 * (n * n) + y * y);
                prod2ax *= exp2ax;
                prodm2ax *= expm2ax;
                sum1 += coef;
                sum2 += coef * prodm2ax;
                sum4 += (coef * prodm2ax) * (A * n);
                sum3 += coef * prod2ax;
                sum5 += (coef * prod2ax) * (A * n);
                if (coef * prod2ax) * (A * n) < relerr * sum5 {
                    break;
                }
                n += 1.0;
            }
        }
        let expx2erfcxy = if y > -6.0 {
            expx2 * erfcx(y)
        } else {
            2.0 * (y * y - x * x).exp()
        };
        let ret = if y > 5.0 {
            // imaginary terms cancel
            let sinxy = (x * y).sin();
            Complex64::new(
                (expx2erfcxy - C * y * sum1) * (2.0 * x * y).cos()
                    + (C * x * expx2) * sinxy * sinc(x * y, sinxy),
                0.0,
            )
        } else {
            let xs = z.re;
            let sinxy = (xs * y).sin();
            let sin2xy = (2.0 * xs * y).sin();
            let cos2xy = (2.0 * xs * y).cos();
            let coef1 = expx2erfcxy - C * y * sum1;
            let coef2 = C * xs * expx2;
            Complex64::new(
                coef1 * cos2xy + coef2 * sinxy * sinc(xs * y, sinxy),
                coef2 * sinc(2.0 * xs * y, sin2xy) - coef1 * sin2xy,
            )
        };
        return ret
            + Complex64::new(
                (0.5 * C) * y * (sum2 + sum3),
                (0.5 * C) * (sum5 - sum4).copysign(z.re),
            );
    }

    // x >= 10 with tiny |y|: only sum3 and sum5 contribute.
    if x.is_nan() {
        return Complex64::new(x, x);
    }
    if y.is_nan() {
        return Complex64::new(y, y);
    }
    let ret = Complex64::new((-x * x).exp(), 0.0);
    let n0 = (x / A + 0.5).floor();
    let dx = A * n0 - x;
    sum3 = (-dx * dx).exp() / (A2 * (n0 * n0) + y * y);
    sum5 = A * n0 * sum3;
    let exp1 = (4.0 * A * dx).exp();
    let mut exp1dn = 1.0;
    let mut dn = 1.0_f64;
    let finish = |sum3: f64, sum5: f64| {
        ret + Complex64::new(
            (0.5 * C) * y * (sum2 + sum3),
            (0.5 * C) * (sum5 - sum4).copysign(z.re),
        )
    };
    while dn < n0 {
        let np = n0 + dn;
        let nm = n0 - dn;
        let mut tp = (-(A * dn + dx).powi(2)).exp();
        exp1dn *= exp1;
        let mut tm = tp * exp1dn;
        tp /= A2 * (np * np) + y * y;
        tm /= A2 * (nm * nm) + y * y;
        sum3 += tp + tm;
        sum5 += A * (np * tp + nm * tm);
        if A * (np * tp + nm * tm) < relerr * sum5 {
            return finish(sum3, sum5);
        }
        dn += 1.0;
    }
    loop {
        let np = n0 + dn;
        dn += 1.0;
        let tp = (-(A * dn + dx).powi(2)).exp() / (A2 * (np * np) + y * y);
        sum3 += tp;
        sum5 += A * np * tp;
        if A * np * tp < relerr * sum5 {
            return finish(sum3, sum5);
        }
    }
}

/// `e^{-x} I_0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 0.5 * f64::EPSILON * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Asymptotic series; all terms positive for order zero.
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0_f64;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
            if next >= term || next < 0.5 * f64::EPSILON * sum {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Fills `out[n] = e^{-x} I_n(x)` for `n = 0..=nmax`.
///
/// Ratios `I_n / I_{n-1}` come from a backward recurrence started well above
/// both `nmax` and `sqrt(x)`, then are chained off `I_0`.
pub fn bessel_ie_upto(nmax: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(nmax + 1, 0.0);
    let x = x.abs();
    out[0] = bessel_i0e(x);
    if nmax == 0 {
        return;
    }
    if x == 0.0 {
        return;
    }
    let start = nmax + 32 + (40.0 * (x + nmax as f64)).sqrt().ceil() as usize;
    let nu = (start + 1) as f64;
    // I_{nu}/I_{nu-1} ~ x / (nu + sqrt(nu^2 + x^2)) seeds the recurrence
    let mut ratio = x / (nu + (nu * nu + x * x).sqrt());
    let mut ratios = vec![0.0; nmax + 1];
    for k in (1..=start).rev() {
        ratio = 1.0 / (2.0 * k as f64 / x + ratio);
        if k <= nmax {
            ratios[k] = ratio;
        }
    }
    for n in 1..=nmax {
        out[n] = out[n - 1] * ratios[n];
    }
}

/// `e^{-x} I_n(x)` for a single integer order.
pub fn bessel_ie(n: u64, x: f64) -> f64 {
    let mut buf = Vec::new();
    bessel_ie_upto(n as usize, x, &mut buf);
    buf[n as usize]
}
