//! One-dimensional search routines shared by the bound and inversion code.

use crate::{Error, Result};

/// 2 - golden ratio, i.e. 1/phi^2.
const INV_PHI2: f64 = 0.381_966_011_250_105_2;

pub(crate) const MAX_LINE_SEARCH_ITERS: usize = 10_000;

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
///
/// Stops once the bracket is narrower than `rel_tol` relative to its midpoint
/// (or `abs_tol`, whichever is larger). Returns the best point seen together
/// with its value.
pub(crate) fn golden_min<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    abs_tol: f64,
    stage: &'static str,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = lo + INV_PHI2 * (hi - lo);
    let mut x2 = hi - INV_PHI2 * (hi - lo);
    let mut f1 = finite(f(x1)?, stage, 0)?;
    let mut f2 = finite(f(x2)?, stage, 0)?;

    for iter in 0..MAX_LINE_SEARCH_ITERS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= (rel_tol * mid.abs()).max(abs_tol) {
            return Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) });
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + INV_PHI2 * (hi - lo);
            f1 = finite(f(x1)?, stage, iter)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - INV_PHI2 * (hi - lo);
            f2 = finite(f(x2)?, stage, iter)?;
        }
    }
    Err(Error::OptimizerDidNotConverge {
        stage,
        iterations: MAX_LINE_SEARCH_ITERS,
    })
}

fn finite(v: f64, stage: &'static str, iterations: usize) -> Result<f64> {
    if v.is_nan() {
        Err(Error::OptimizerDidNotConverge { stage, iterations })
    } else {
        Ok(v)
    }
}

/// Finds the edge of `{x : f(x) <= target}` for a monotone concave `f`.
///
/// `inside` must satisfy `f(inside) <= target` and `outside` must not. `f`
/// returns the value and the derivative. Newton steps are taken from the
/// inside end only: concavity keeps every such step inside the set, so the
/// returned point always satisfies the inequality. Bisection takes over when
/// Newton is unavailable (infinite values or slopes) or stalls.
pub(crate) fn concave_boundary<F>(
    mut f: F,
    mut inside: f64,
    inside_eval: (f64, f64),
    mut outside: f64,
    target: f64,
    tol: f64,
    max_iter: usize,
    stage: &'static str,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (mut f_in, mut slope_in) = inside_eval;
    let mut newton_streak = 0;
    for _ in 0..max_iter {
        let width = (outside - inside).abs();
        if width <= tol {
            return Ok(inside);
        }
        let dir = (outside - inside).signum();

        let newton = if f_in.is_finite() && slope_in.is_finite() && slope_in != 0.0 {
            Some(inside + (target - f_in) / slope_in)
        } else {
            None
        };
        let mut probe = match newton {
            // Alternate in a bisection after a few Newton steps so the outside
            // end also moves.
            Some(x) if newton_streak < 4 && (x - inside) * dir > 0.0 && (outside - x) * dir > 0.0 => {
                newton_streak += 1;
                x
            }
            _ => {
                newton_streak = 0;
                0.5 * (inside + outside)
            }
        };
        // Newton steps shrink as the root is approached; probe just past the
        // tolerance so the bracket can close.
        if (probe - inside).abs() < 0.5 * tol {
            probe = inside + dir * 0.5 * tol;
        }

        let (value, slope) = f(probe)?;
        if value.is_nan() {
            return Err(Error::OptimizerDidNotConverge {
                stage,
                iterations: max_iter,
            });
        }
        if value <= target {
            inside = probe;
            f_in = value;
            slope_in = slope;
        } else {
            outside = probe;
            newton_streak = 0;
        }
    }
    Err(Error::OptimizerDidNotConverge {
        stage,
        iterations: max_iter,
    })
}
