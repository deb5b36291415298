//! Adaptive Simpson quadrature.
//!
//! The integrands used by the theory module are smooth on each pulse support
//! (polynomial envelopes times slowly beating exponentials), so a plain
//! recursive Simpson rule with Richardson correction is enough.  Tolerances are
//! relative to the magnitude of the integral, which matters here because the
//! reference envelope integrates to values around 1e-83.

use crate::error::{Result, RsfError};

const MAX_DEPTH: u32 = 48;
/// Panels used for the initial scale estimate and the first split.
const SEED_PANELS: usize = 16;

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// The tolerance is measured against the integral of `|f|`, estimated from a
/// fixed composite rule before the adaptive pass.  That keeps integrands with
/// heavy cancellation (odd moments of a symmetric envelope, say) from chasing
/// an absolute error of zero.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let h = (b - a) / SEED_PANELS as f64;
    let xs: Vec<f64> = (0..=2 * SEED_PANELS).map(|i| a + 0.5 * h * i as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let scale: f64 = (0..SEED_PANELS)
        .map(|p| {
            let (l, m, r) = (fs[2 * p].abs(), fs[2 * p + 1].abs(), fs[2 * p + 2].abs());
            h / 6.0 * (l + 4.0 * m + r)
        })
        .sum();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let abs_tol = rel_tol * scale;

    let mut total = 0.0;
    for p in 0..SEED_PANELS {
        let (x0, x2) = (xs[2 * p], xs[2 * p + 2]);
        let (f0, f1, f2) = (fs[2 * p], fs[2 * p + 1], fs[2 * p + 2]);
        let whole = (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2);
        total += recurse(&f, x0, x2, f0, f1, f2, whole, abs_tol / SEED_PANELS as f64, MAX_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(RsfError::Quadrature { a, b });
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Trapezoidal sum of uniformly spaced samples.
pub fn trapezoid(samples: &[f64], step: f64) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}
