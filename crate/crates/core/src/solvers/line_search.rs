//! Deterministic scalar minimization on an interval: golden-section
//! shrinking with a parabolic probe each round.
//!
//! The solvers hand this objectives with a narrow well near the left end
//! and an exactly flat tail (once every entry of a trial point has been
//! shrunk to zero or saturated, moving further changes nothing). Two
//! choices make that shape safe: candidate points are evaluated
//! left-to-right and the incumbent is replaced only on strict
//! improvement, so on a flat stretch the leftmost evaluated point wins
//! and the bracket keeps shrinking towards the well instead of stalling.

use super::SolverError;

/// Inverse golden ratio; interior points sit at this fraction of the
/// bracket from each end.
const INVPHI: f64 = 0.618_033_988_749_894_9;

/// Tolerances for [`line_search_scalar`].
#[derive(Clone, Copy, Debug)]
pub struct LineSearchOptions {
    /// Stop once the bracket width falls below `tol_rel * (1 + |best|)`.
    pub tol_rel: f64,
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        LineSearchOptions {
            tol_rel: 1e-8,
            max_evals: 100,
        }
    }
}

/// Minimizes `f` on `[lo, hi]`, returning the best evaluated point.
///
/// The returned point never evaluates worse than either endpoint. A
/// non-finite objective value aborts with the offending argument. The
/// search is deterministic: identical inputs give identical results.
pub fn line_search_scalar<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    opts: &LineSearchOptions,
) -> Result<f64, SolverError>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(SolverError::BadInterval { lo, hi });
    }
    if opts.max_evals < 2 {
        return Err(SolverError::TooFewEvals(opts.max_evals));
    }
    if !(opts.tol_rel.is_finite() && opts.tol_rel >= 0.0) {
        return Err(SolverError::InvalidOptions(format!(
            "line search tolerance must be non-negative, got {}",
            opts.tol_rel
        )));
    }
    if lo == hi {
        return Ok(lo);
    }

    let mut evals = 0usize;
    let mut best = (f64::INFINITY, lo);
    let mut eval = |x: f64, evals: &mut usize, best: &mut (f64, f64)| -> Result<f64, SolverError> {
        let v = f(x);
        *evals += 1;
        if !v.is_finite() {
            return Err(SolverError::NonFiniteObjective { alpha: x });
        }
        if v < best.0 {
            *best = (v, x);
        }
        Ok(v)
    };

    let (mut a, mut b) = (lo, hi);
    let mut fa = eval(a, &mut evals, &mut best)?;
    eval(b, &mut evals, &mut best)?;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = eval(c, &mut evals, &mut best)?;
    let mut fd = eval(d, &mut evals, &mut best)?;

    while (b - a) > opts.tol_rel * (1.0 + best.1.abs()) && evals < opts.max_evals {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = eval(c, &mut evals, &mut best)?;
        } else {
            a = c;
            fa = fc;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = eval(d, &mut evals, &mut best)?;
        }

        // One parabolic probe through (a, fa), (c, fc), (d, fd); it only
        // updates the incumbent, never the bracket, so convergence stays
        // the golden-section guarantee while smooth wells resolve faster.
        if evals < opts.max_evals {
            if let Some(v) = parabola_vertex((a, fa), (c, fc), (d, fd)) {
                if v > a && v < b && v != c && v != d {
                    eval(v, &mut evals, &mut best)?;
                }
            }
        }
    }

    Ok(best.1)
}

/// Vertex of the parabola through three points, if they determine one
/// with positive curvature.
fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    if x0 == x1 || x0 == x2 || x1 == x2 {
        return None;
    }
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curvature = (d1 - d0) / (x2 - x0);
    if !(curvature.is_finite() && curvature > 0.0) {
        return None;
    }
    let v = 0.5 * (x0 + x1 - d0 / curvature);
    v.is_finite().then_some(v)
}
