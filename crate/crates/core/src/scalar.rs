//! Safeguarded scalar root finding.

use crate::error::{Error, Result};

/// Options for [`newton_bisect`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub xtol: f64,
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-14,
            ftol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Root of `f` on `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// `f` returns the value and derivative. Newton steps that leave the current
/// bracket or fail to shrink it fast enough are replaced by bisection.
pub fn newton_bisect(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    x0: Option<f64>,
    opts: RootOptions,
) -> Result<f64> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!(
            "f({lo}) = {flo} and f({hi}) = {fhi} do not bracket a root"
        )));
    }
    let lo_negative = flo < 0.0;
    let mut x = x0.filter(|x| *x > lo && *x < hi).unwrap_or(0.5 * (lo + hi));
    let mut last_width = hi - lo;
    let mut slow_steps = 0;
    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            x = 0.5 * (lo + hi);
            continue;
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= opts.xtol * x.abs().max(1.0) {
            return Ok(x);
        }
        if width > 0.5 * last_width {
            slow_steps += 1;
        } else {
            slow_steps = 0;
        }
        last_width = width;
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > lo && newton < hi && slow_steps < 3 {
            if (newton - x).abs() <= opts.xtol * x.abs().max(1.0) {
                return Ok(newton);
            }
            newton
        } else {
            slow_steps = 0;
            0.5 * (lo + hi)
        };
    }
    let (fx, _) = f(x);
    if fx.abs() <= opts.ftol {
        Ok(x)
    } else {
        Err(Error::Bracket(format!(
            "no convergence after {} iterations, residual {fx}",
            opts.max_iter
        )))
    }
}

/// Root of `f` by bisection only.
pub fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64, opts: RootOptions) -> Result<f64> {
    newton_bisect(|x| (f(x), 0.0), lo, hi, None, opts)
}

/// Expands `[lo, hi]` geometrically away from `anchor` until `f` changes sign.
///
/// `lower_limit`/`upper_limit` are hard domain limits that are approached
/// but never crossed.
pub fn expand_bracket(
    f: impl Fn(f64) -> f64,
    anchor: f64,
    lower_limit: f64,
    upper_limit: f64,
) -> Result<(f64, f64)> {
    let fa = f(anchor);
    if fa == 0.0 {
        return Ok((anchor, anchor));
    }
    let mut step = 0.1 * anchor.abs().max(1e-3);
    let mut lo = anchor;
    let mut hi = anchor;
    for _ in 0..200 {
        let new_lo = (lo - step).max(0.5 * (lo + lower_limit));
        let new_hi = (hi + step).min(0.5 * (hi + upper_limit));
        let flo = f(new_lo);
        if flo.is_finite() && flo.signum() != fa.signum() {
            return Ok((new_lo, lo));
        }
        let fhi = f(new_hi);
        if fhi.is_finite() && fhi.signum() != fa.signum() {
            return Ok((hi, new_hi));
        }
        lo = new_lo;
        hi = new_hi;
        step *= 2.0;
    }
    Err(Error::Bracket(format!(
        "no sign change found around {anchor} within ({lower_limit}, {upper_limit})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_square_root() {
        let r = newton_bisect(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, None, RootOptions::default()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bisection_without_derivative() {
        let r = bisect(|x| x.cos() - x, 0.0, 1.0, RootOptions::default()).unwrap();
        assert!((r.cos() - r).abs() < 1e-12);
    }

    #[test]
    fn survives_bad_newton_steps() {
        // Derivative vanishes near the root's neighbourhood for x³.
        let r = newton_bisect(|x| (x.powi(3) - 1e-3, 3.0 * x * x), -1.0, 1.0, Some(0.0), RootOptions::default())
            .unwrap();
        assert!((r - 0.1).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_bracket() {
        assert!(matches!(
            newton_bisect(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, None, RootOptions::default()),
            Err(Error::Bracket(_))
        ));
    }

    #[test]
    fn expands_until_sign_change() {
        let (a, b) = expand_bracket(|x| x - 7.0, 1.0, 0.0, f64::INFINITY).unwrap();
        assert!(a <= 7.0 && 7.0 <= b);
        let (a, b) = expand_bracket(|x| x.ln() + 5.0, 1.0, 0.0, f64::INFINITY).unwrap();
        assert!(a > 0.0 && a <= (-5f64).exp() && (-5f64).exp() <= b);
    }
}
