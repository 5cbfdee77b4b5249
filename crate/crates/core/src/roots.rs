//! Bracketed scalar root finding: bisection down to a switch width, then a
//! secant polish that falls back to bisection whenever it leaves the bracket.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Bracket width at which bisection hands over to the secant polish.
    pub switch_width: f64,
    /// Stop once the bracket is narrower than this.
    pub x_tol: f64,
    /// Stop once |f| falls below this.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            switch_width: 1e-3,
            x_tol: 1e-14,
            f_tol: 1e-13,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub f: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl Root {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Finds a root of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
pub fn solve_bracketed<F>(mut f: F, mut lo: f64, mut hi: f64, opts: &RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(Root { x: lo, f: 0.0, lo, hi: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Root { x: hi, f: 0.0, lo: hi, hi, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let width = hi - lo;
        if width <= opts.x_tol * (1.0 + best.0.abs()) || best.1.abs() <= opts.f_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let x = if width > opts.switch_width {
            mid
        } else {
            let s = hi - f_hi * (hi - lo) / (f_hi - f_lo);
            // keep the secant step strictly inside the bracket
            let margin = 0.01 * width;
            if s.is_finite() && s > lo + margin && s < hi - margin {
                s
            } else if s.is_finite() && s > lo && s < hi {
                s.clamp(lo + margin, hi - margin)
            } else {
                mid
            }
        };
        let fx = f(x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }
    Ok(Root {
        x: best.0,
        f: best.1,
        lo,
        hi,
        iterations,
    })
}

/// Walks `x` geometrically (`x *= factor` each step) until `f(x)` has the
/// requested sign. Returns the last two points visited, the final one having
/// the requested sign.
pub fn expand_until<F>(
    mut f: F,
    start: f64,
    factor: f64,
    want_positive: bool,
    max_steps: usize,
) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut prev = start;
    let mut x = start;
    let mut fx = f(x)?;
    for _ in 0..max_steps {
        if (fx > 0.0) == want_positive && fx != 0.0 {
            return Ok((prev, x, fx));
        }
        prev = x;
        x *= factor;
        if !x.is_finite() || x == 0.0 {
            break;
        }
        fx = f(x)?;
    }
    Err(Error::Bracket {
        lo: prev.min(x),
        hi: prev.max(x),
        f_lo: fx,
        f_hi: fx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = solve_bracketed(|x| Ok(x * x * x - 2.0), 0.0, 5.0, &RootOptions::default()).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        let e = solve_bracketed(|x| Ok(x * x + 1.0), -1.0, 1.0, &RootOptions::default());
        assert!(matches!(e, Err(Error::Bracket { .. })));
    }

    #[test]
    fn handles_steep_divergence_near_left_end() {
        // 1/sqrt(x) - 10 has its root at 0.01 and blows up at 0
        let r = solve_bracketed(|x| Ok(1.0 / x.sqrt() - 10.0), 1e-300, 1.0, &RootOptions::default())
            .unwrap();
        assert!((r.x - 0.01).abs() < 1e-13);
    }

    #[test]
    fn expansion_walks_outward() {
        let (prev, x, _) = expand_until(|x| Ok(x - 100.0), 1.0, 2.0, true, 20).unwrap();
        assert!(prev < 100.0 && x > 100.0);
    }
}
