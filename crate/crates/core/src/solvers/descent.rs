//! The three descent iterations.
//!
//! All solvers share a structure: form the residual, pull it back through
//! the adjoint, scale it into a feasible descent direction, pick a step,
//! update. They differ in how non-negativity and sparsity are enforced:
//! [`mrnsd`] scales the gradient by the iterate and clips the step at the
//! positivity boundary, [`sp_mrnsd`] additionally soft-thresholds every
//! update, and [`sp_nngd`] descends in a reparameterized space whose
//! mapping is identically zero below a switch point.
//!
//! Trial points inside a line search and the accepted update go through
//! the same code path, and the recorded residual is recomputed from the
//! accepted iterate, so traces are exactly the searched objective values
//! and monotonicity claims hold without slack.

use crate::linop::LinearOperator;

use super::{
    line_search_scalar, mrnsd_step_bound, soft_threshold_scalar, spmrnsd_step_bound, Init,
    IterationRecord, MappingParams, SolverError, SolverOptions, SolverResult,
};

/// Closed-form minimizer of `q(t) = 0.5 ||A (x + t s) - b||^2` along a
/// direction: `t = -(s . g) / ||A s||^2` with `g` the gradient at `x`.
/// Costs one operator application. Fails when `A s = 0`, in which case no
/// quadratic minimizer exists.
pub fn mrnsd_optimal_alpha(a: &LinearOperator, s: &[f64], g: &[f64]) -> Result<f64, SolverError> {
    if s.len() != g.len() {
        return Err(SolverError::MismatchedLengths {
            dir: s.len(),
            grad: g.len(),
        });
    }
    let image = a.apply(s)?;
    let denom: f64 = image.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(SolverError::DegenerateDirection);
    }
    let dir_dot_grad: f64 = s.iter().zip(g).map(|(si, gi)| si * gi).sum();
    Ok(-dir_dot_grad / denom)
}

/// Residual norm steepest descent with multiplicative non-negativity.
///
/// Per iteration the direction is the negative gradient scaled entry-wise
/// by the current iterate, the step is the closed-form quadratic
/// minimizer clipped at the largest feasible step, and the update is
/// clamped at zero. The initial point must be strictly positive; the
/// residual norm is non-increasing across iterations.
pub fn mrnsd(
    a: &LinearOperator,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    mrnsd_observed(a, b, opts, |_, _| {})
}

/// [`mrnsd`] with a per-iteration callback receiving each record and the
/// iterate it describes.
pub fn mrnsd_observed<F>(
    a: &LinearOperator,
    b: &[f64],
    opts: &SolverOptions,
    mut observer: F,
) -> Result<SolverResult, SolverError>
where
    F: FnMut(&IterationRecord, &[f64]),
{
    opts.validate()?;
    check_shapes(a, b)?;
    let mut x = materialize_init(&opts.init, a.n_cols())?;
    require_strictly_positive(&x)?;
    let b_norm = l2(b);

    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut prev_rel = None;
    for iter in 1..=opts.max_iters {
        let r = residual(a, &x, b);
        let g = a.apply_adjoint_unchecked(&r);
        if is_all_zero(&g) {
            break;
        }
        let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
        if is_all_zero(&s) {
            break;
        }
        let alpha = mrnsd_optimal_alpha(a, &s, &g)?.min(mrnsd_step_bound(&x, &s));
        for (xi, &si) in x.iter_mut().zip(&s) {
            *xi = (*xi + alpha * si).max(0.0);
        }

        let record = make_record(a, b, b_norm, &x, iter, alpha);
        observer(&record, &x);
        if opts.record_trace {
            trace.push(record);
        }
        iterations_run = iter;
        if early_stop(opts.rel_change_tol, &mut prev_rel, record.rel_residual) {
            break;
        }
    }

    Ok(SolverResult {
        solution: x,
        iterations_run,
        trace,
    })
}

/// Sparsity-promoting variant of [`mrnsd`]: each update is soft-thresholded
/// with weight `step * lambda`, so entries reach exact zero and stay
/// there (a zero entry yields a zero direction component).
///
/// The step minimizes the data misfit of the thresholded trial point over
/// `[0, u]`, where `u` is the largest step keeping the thresholded update
/// non-negative. When `u` is infinite (no direction entry falls below
/// `-lambda`) the interval is grown instead: the seed width is the
/// closed-form quadratic step when that is positive and finite, otherwise
/// 1; the width doubles while the objective at twice the width strictly
/// improves, at most 60 times; the search then runs on `[0, 2 * width]`.
pub fn sp_mrnsd(
    a: &LinearOperator,
    b: &[f64],
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    sp_mrnsd_observed(a, b, lambda, opts, |_, _| {})
}

/// [`sp_mrnsd`] with a per-iteration callback.
pub fn sp_mrnsd_observed<F>(
    a: &LinearOperator,
    b: &[f64],
    lambda: f64,
    opts: &SolverOptions,
    mut observer: F,
) -> Result<SolverResult, SolverError>
where
    F: FnMut(&IterationRecord, &[f64]),
{
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SolverError::InvalidShrinkage(lambda));
    }
    opts.validate()?;
    check_shapes(a, b)?;
    let mut x = materialize_init(&opts.init, a.n_cols())?;
    require_strictly_positive(&x)?;
    let b_norm = l2(b);

    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut prev_rel = None;
    for iter in 1..=opts.max_iters {
        let r = residual(a, &x, b);
        let g = a.apply_adjoint_unchecked(&r);
        if is_all_zero(&g) {
            break;
        }
        let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
        if is_all_zero(&s) {
            break;
        }

        let mut misfit = |alpha: f64| {
            let trial = shrink_step(&x, &s, alpha, lambda);
            half_square_norm(&residual(a, &trial, b))
        };
        let bound = spmrnsd_step_bound(&x, &s, lambda);
        let hi = if bound.is_finite() {
            bound
        } else {
            let seed = match mrnsd_optimal_alpha(a, &s, &g) {
                Ok(v) if v.is_finite() && v > 0.0 => v,
                _ => 1.0,
            };
            expand_unbounded_interval(&mut misfit, seed)
        };
        let alpha = line_search_scalar(&mut misfit, 0.0, hi, &opts.line_search)?;
        x = shrink_step(&x, &s, alpha, lambda);

        let record = make_record(a, b, b_norm, &x, iter, alpha);
        observer(&record, &x);
        if opts.record_trace {
            trace.push(record);
        }
        iterations_run = iter;
        if early_stop(opts.rel_change_tol, &mut prev_rel, record.rel_residual) {
            break;
        }
    }

    Ok(SolverResult {
        solution: x,
        iterations_run,
        trace,
    })
}

/// Gradient descent in a mapped space that encodes non-negativity and
/// absorbs zeros.
///
/// The iterate lives in an unconstrained variable `z`; the reported
/// solution is `w(z)` with `w` the configured mapping, which vanishes
/// identically below its switch point. Where `w(z) = 0` the direction is
/// exactly zero, so zeros persist. The step minimizes the data misfit of
/// the mapped trial point over `[0, alpha_max]` with `alpha_max` chosen
/// so the mapping's exponent stays at most 50, preventing overflow.
///
/// The initial point is given in solution space (entries must be
/// non-negative) and is pulled back through the mapping's inverse; an
/// all-zero start is fully absorbed and returns immediately.
pub fn sp_nngd(
    a: &LinearOperator,
    b: &[f64],
    params: &MappingParams,
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    sp_nngd_observed(a, b, params, opts, |_, _| {})
}

/// [`sp_nngd`] with a per-iteration callback.
pub fn sp_nngd_observed<F>(
    a: &LinearOperator,
    b: &[f64],
    params: &MappingParams,
    opts: &SolverOptions,
    mut observer: F,
) -> Result<SolverResult, SolverError>
where
    F: FnMut(&IterationRecord, &[f64]),
{
    opts.validate()?;
    check_shapes(a, b)?;
    let start = materialize_init(&opts.init, a.n_cols())?;
    let mut z = Vec::with_capacity(start.len());
    for (index, &value) in start.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(SolverError::InvalidMappedInit { index, value });
        }
        z.push(params.invert(value)?);
    }
    let b_norm = l2(b);
    let mut x = params.apply(&z);

    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut prev_rel = None;
    for iter in 1..=opts.max_iters {
        let r = residual(a, &x, b);
        let g = a.apply_adjoint_unchecked(&r);
        if is_all_zero(&g) {
            break;
        }
        let slope = params.apply_derivative(&z);
        let s: Vec<f64> = slope.iter().zip(&g).map(|(&wi, &gi)| -(wi * gi)).collect();
        if is_all_zero(&s) {
            break;
        }

        let s_inf = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let alpha_max = 50.0 / (params.steepness() * s_inf);
        let mut misfit = |alpha: f64| {
            let trial: Vec<f64> = z
                .iter()
                .zip(&s)
                .map(|(&zi, &si)| params.value(zi + alpha * si))
                .collect();
            half_square_norm(&residual(a, &trial, b))
        };
        let alpha = line_search_scalar(&mut misfit, 0.0, alpha_max, &opts.line_search)?;
        for (zi, &si) in z.iter_mut().zip(&s) {
            *zi += alpha * si;
        }
        x = params.apply(&z);

        let record = make_record(a, b, b_norm, &x, iter, alpha);
        observer(&record, &x);
        if opts.record_trace {
            trace.push(record);
        }
        iterations_run = iter;
        if early_stop(opts.rel_change_tol, &mut prev_rel, record.rel_residual) {
            break;
        }
    }

    Ok(SolverResult {
        solution: x,
        iterations_run,
        trace,
    })
}

fn check_shapes(a: &LinearOperator, b: &[f64]) -> Result<(), SolverError> {
    if b.len() != a.n_rows() {
        return Err(SolverError::RhsLength {
            rows: a.n_rows(),
            cols: a.n_cols(),
            rhs: b.len(),
        });
    }
    Ok(())
}

fn materialize_init(init: &Init, n: usize) -> Result<Vec<f64>, SolverError> {
    match init {
        Init::Constant(v) => Ok(vec![*v; n]),
        Init::Vector(x) => {
            if x.len() != n {
                return Err(SolverError::InitLength {
                    expected: n,
                    got: x.len(),
                });
            }
            Ok(x.clone())
        }
    }
}

fn require_strictly_positive(x: &[f64]) -> Result<(), SolverError> {
    for (index, &value) in x.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(SolverError::NonPositiveInit { index, value });
        }
    }
    Ok(())
}

fn is_all_zero(v: &[f64]) -> bool {
    v.iter().all(|&vi| vi == 0.0)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn half_square_norm(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

fn residual(a: &LinearOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.apply_unchecked(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    r
}

fn nnz_fraction(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().filter(|v| **v != 0.0).count() as f64 / x.len() as f64
}

/// One shrunken update: entry-wise `max(0, soft_threshold(x + alpha s,
/// alpha lambda))`. Line-search trials and the accepted iterate both go
/// through here, so they agree bit for bit.
fn shrink_step(x: &[f64], s: &[f64], alpha: f64, lambda: f64) -> Vec<f64> {
    let gamma = alpha * lambda;
    x.iter()
        .zip(s)
        .map(|(&xi, &si)| soft_threshold_scalar(xi + alpha * si, gamma).max(0.0))
        .collect()
}

/// Doubles a trial width while the objective keeps strictly improving at
/// twice the width (at most 60 doublings), returning twice the final
/// width as the search interval end.
fn expand_unbounded_interval<F: FnMut(f64) -> f64>(misfit: &mut F, seed: f64) -> f64 {
    let mut width = seed;
    let mut value = misfit(width);
    for _ in 0..60 {
        let doubled = misfit(2.0 * width);
        if doubled.is_finite() && doubled < value {
            width *= 2.0;
            value = doubled;
        } else {
            break;
        }
    }
    2.0 * width
}

fn make_record(
    a: &LinearOperator,
    b: &[f64],
    b_norm: f64,
    x: &[f64],
    iter: usize,
    alpha: f64,
) -> IterationRecord {
    let residual_norm = l2(&residual(a, x, b));
    IterationRecord {
        iter,
        residual_norm,
        rel_residual: if b_norm > 0.0 {
            residual_norm / b_norm
        } else {
            residual_norm
        },
        sparsity_proxy: nnz_fraction(x),
        step_size: alpha,
    }
}

fn early_stop(tol: f64, prev: &mut Option<f64>, current: f64) -> bool {
    let stop = tol > 0.0 && prev.is_some_and(|p| (p - current).abs() < tol);
    *prev = Some(current);
    stop
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::SparseMatrix;
    use crate::solvers::LineSearchOptions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOY_SOLUTION: [f64; 2] = [0.0, 94.0 / 85.0];
    const TOY_REL_RESIDUAL: f64 = 0.15758076113778519;
    const TOY_FIRST_ALPHA: f64 = 0.015297157115495725;

    fn toy_operator() -> LinearOperator {
        LinearOperator::sparse(
            SparseMatrix::from_triplets(
                2,
                2,
                &[(0, 0, 20.0), (0, 1, 5.0), (1, 0, 5.0), (1, 1, 20.0)],
            )
            .unwrap(),
        )
    }

    fn toy_rhs() -> Vec<f64> {
        vec![2.0, 23.0]
    }

    fn toy_start() -> Init {
        Init::Vector(vec![0.15, 0.13])
    }

    fn random_problem(m: usize, n: usize, seed: u64) -> (LinearOperator, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                triplets.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
        let a = LinearOperator::sparse(SparseMatrix::from_triplets(m, n, &triplets).unwrap());
        let b = (0..m).map(|_| rng.gen_range(0.25..1.25)).collect();
        (a, b)
    }

    fn sup_diff(x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    #[test]
    fn mrnsd_solves_the_two_by_two_boundary_problem() {
        let opts = SolverOptions {
            init: toy_start(),
            ..Default::default()
        };
        let result = mrnsd(&toy_operator(), &toy_rhs(), &opts).unwrap();
        assert!(sup_diff(&result.solution, &TOY_SOLUTION) <= 1e-3);
        assert!(result.solution.iter().all(|&v| v >= 0.0));
        let final_rel = result.trace.last().unwrap().rel_residual;
        assert!((final_rel - TOY_REL_RESIDUAL).abs() <= 2e-3);
    }

    #[test]
    fn mrnsd_with_consistent_start_stops_immediately() {
        let a = toy_operator();
        let x0 = vec![0.4, 0.9];
        let b = a.apply(&x0).unwrap();
        let opts = SolverOptions {
            init: Init::Vector(x0.clone()),
            ..Default::default()
        };
        let result = mrnsd(&a, &b, &opts).unwrap();
        assert_eq!(result.iterations_run, 0);
        assert_eq!(result.solution, x0);
        assert!(result.trace.is_empty());
    }

    #[test]
    fn mrnsd_reaches_interior_least_squares_solution() {
        // A = M^T M + I is positive definite; with b = A x* for an
        // interior positive x*, the constrained and unconstrained
        // solutions coincide.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 5;
        let m_mat: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut v = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    v += m_mat[k * n + i] * m_mat[k * n + j];
                }
                triplets.push((i, j, v));
            }
        }
        let a = LinearOperator::sparse(SparseMatrix::from_triplets(n, n, &triplets).unwrap());
        let x_star: Vec<f64> = (0..n).map(|k| 0.5 + 0.1 * k as f64).collect();
        let b = a.apply(&x_star).unwrap();
        let opts = SolverOptions {
            max_iters: 2000,
            init: Init::Constant(0.1),
            ..Default::default()
        };
        let result = mrnsd(&a, &b, &opts).unwrap();
        assert!(
            sup_diff(&result.solution, &x_star) <= 1e-6,
            "off by {}",
            sup_diff(&result.solution, &x_star)
        );
    }

    #[test]
    fn mrnsd_rejects_non_positive_start() {
        let opts = SolverOptions {
            init: Init::Vector(vec![0.5, 0.0]),
            ..Default::default()
        };
        assert!(matches!(
            mrnsd(&toy_operator(), &toy_rhs(), &opts),
            Err(SolverError::NonPositiveInit { index: 1, .. })
        ));
        let zero_const = SolverOptions {
            init: Init::Constant(0.0),
            ..Default::default()
        };
        assert!(mrnsd(&toy_operator(), &toy_rhs(), &zero_const).is_err());
    }

    #[test]
    fn mrnsd_residual_never_increases() {
        let (a, b) = random_problem(7, 5, 1);
        let result = mrnsd(&a, &b, &SolverOptions::default()).unwrap();
        for pair in result.trace.windows(2) {
            assert!(pair[1].rel_residual <= pair[0].rel_residual + 1e-12);
        }
    }

    #[test]
    fn optimal_alpha_is_one_for_pure_gradient_descent_on_identity() {
        let a = LinearOperator::identity(3);
        let g = vec![0.3, -1.2, 0.7];
        let s: Vec<f64> = g.iter().map(|v| -v).collect();
        assert_eq!(mrnsd_optimal_alpha(&a, &s, &g).unwrap(), 1.0);
    }

    #[test]
    fn optimal_alpha_matches_dense_arithmetic_on_toy_start() {
        let a = toy_operator();
        let x = [0.15, 0.13];
        let r = residual(&a, &x, &toy_rhs());
        let g = a.apply_adjoint(&r).unwrap();
        let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
        let alpha = mrnsd_optimal_alpha(&a, &s, &g).unwrap();
        assert!((alpha - TOY_FIRST_ALPHA).abs() <= 1e-15 * TOY_FIRST_ALPHA.abs() + 1e-18);
        // Both direction entries ascend here, so no feasibility bound.
        assert!(s.iter().all(|&v| v > 0.0));
        assert_eq!(mrnsd_step_bound(&x, &s), f64::INFINITY);
    }

    #[test]
    fn optimal_alpha_minimizes_the_quadratic() {
        let (a, b) = random_problem(6, 4, 9);
        let x = vec![0.2; 4];
        let r = residual(&a, &x, &b);
        let g = a.apply_adjoint(&r).unwrap();
        let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
        let alpha = mrnsd_optimal_alpha(&a, &s, &g).unwrap();
        let q = |t: f64| {
            let trial: Vec<f64> = x.iter().zip(&s).map(|(&xi, &si)| xi + t * si).collect();
            half_square_norm(&residual(&a, &trial, &b))
        };
        assert!(q(alpha) <= q(alpha - 1e-3));
        assert!(q(alpha) <= q(alpha + 1e-3));
    }

    #[test]
    fn optimal_alpha_rejects_annihilated_direction() {
        let a = LinearOperator::sparse(
            SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]).unwrap(),
        );
        let s = vec![1.0, 1.0];
        let g = vec![0.5, 0.5];
        assert!(matches!(
            mrnsd_optimal_alpha(&a, &s, &g),
            Err(SolverError::DegenerateDirection)
        ));
    }

    #[test]
    fn line_search_recovers_closed_form_step_on_toy_start() {
        let a = toy_operator();
        let b = toy_rhs();
        let x = [0.15, 0.13];
        let r = residual(&a, &x, &b);
        let g = a.apply_adjoint(&r).unwrap();
        let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
        let f = |t: f64| {
            let trial: Vec<f64> = x.iter().zip(&s).map(|(&xi, &si)| xi + t * si).collect();
            half_square_norm(&residual(&a, &trial, &b))
        };
        let best = line_search_scalar(f, 0.0, 0.1, &LineSearchOptions::default()).unwrap();
        assert!((best - TOY_FIRST_ALPHA).abs() <= 1e-5);
    }

    #[test]
    fn zero_shrinkage_reproduces_line_searched_plain_descent_bitwise() {
        let (a, b) = random_problem(8, 6, 7);
        let opts = SolverOptions {
            max_iters: 30,
            ..Default::default()
        };
        let result = sp_mrnsd(&a, &b, 0.0, &opts).unwrap();

        // Reference: identical loop with the thresholding spelled out as
        // a plain clamp, which is what zero shrinkage reduces to.
        let mut x = vec![0.1; 6];
        for _ in 0..30 {
            let r = residual(&a, &x, &b);
            let g = a.apply_adjoint_unchecked(&r);
            if is_all_zero(&g) {
                break;
            }
            let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
            if is_all_zero(&s) {
                break;
            }
            let mut f = |t: f64| {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(&s)
                    .map(|(&xi, &si)| soft_threshold_scalar(xi + t * si, t * 0.0).max(0.0))
                    .collect();
                half_square_norm(&residual(&a, &trial, &b))
            };
            let bound = mrnsd_step_bound(&x, &s);
            let hi = if bound.is_finite() {
                bound
            } else {
                let seed = match mrnsd_optimal_alpha(&a, &s, &g) {
                    Ok(v) if v.is_finite() && v > 0.0 => v,
                    _ => 1.0,
                };
                expand_unbounded_interval(&mut f, seed)
            };
            let alpha = line_search_scalar(&mut f, 0.0, hi, &opts.line_search).unwrap();
            x = x
                .iter()
                .zip(&s)
                .map(|(&xi, &si)| soft_threshold_scalar(xi + alpha * si, alpha * 0.0).max(0.0))
                .collect();
        }

        assert_eq!(result.solution.len(), x.len());
        for (got, want) in result.solution.iter().zip(&x) {
            assert_eq!(got.to_bits(), want.to_bits());
        }
    }

    #[test]
    fn shrunken_toy_run_zeroes_the_first_entry() {
        let opts = SolverOptions {
            init: toy_start(),
            ..Default::default()
        };
        let result = sp_mrnsd(&toy_operator(), &toy_rhs(), 1e-4, &opts).unwrap();
        assert_eq!(result.solution[0], 0.0);
        assert!((result.solution[1] - TOY_SOLUTION[1]).abs() <= 1e-3);
    }

    #[test]
    fn scalar_problem_line_search_drives_misfit_to_zero() {
        // One equation, one unknown: the misfit-only step rule walks the
        // thresholded update straight to the data-consistent point 1,
        // not to a shrunken compromise, and stays there.
        let a = LinearOperator::sparse(SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap());
        let opts = SolverOptions {
            max_iters: 50,
            init: Init::Vector(vec![2.0]),
            ..Default::default()
        };
        let result = sp_mrnsd(&a, &[1.0], 0.25, &opts).unwrap();
        assert!((result.solution[0] - 1.0).abs() <= 1e-6);
        assert!(result.trace.last().unwrap().residual_norm <= 1e-6);
    }

    #[test]
    fn mapped_descent_matches_toy_trajectory() {
        let params = MappingParams::new(1.0, 0.0).unwrap();
        let opts = SolverOptions {
            init: toy_start(),
            ..Default::default()
        };
        let mut errors = Vec::new();
        let result = sp_nngd_observed(&toy_operator(), &toy_rhs(), &params, &opts, |record, x| {
            errors.push((record.iter, sup_diff(x, &TOY_SOLUTION)));
        })
        .unwrap();
        assert!(sup_diff(&result.solution, &TOY_SOLUTION) <= 1e-3);
        // The well-known pattern of this start: still above 1e-3 after
        // five iterations, below it from the seventh on.
        let err_at = |k: usize| errors.iter().find(|(i, _)| *i == k).unwrap().1;
        assert!(err_at(5) > 1e-3, "iteration 5 error {}", err_at(5));
        assert!(err_at(7) <= 1e-3, "iteration 7 error {}", err_at(7));
    }

    #[test]
    fn mapped_descent_with_zero_start_is_absorbed() {
        let params = MappingParams::new(1.0, 0.0).unwrap();
        let opts = SolverOptions {
            init: Init::Constant(0.0),
            ..Default::default()
        };
        let result = sp_nngd(&toy_operator(), &toy_rhs(), &params, &opts).unwrap();
        assert_eq!(result.iterations_run, 0);
        assert!(result.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mapped_descent_rejects_negative_start() {
        let params = MappingParams::new(1.0, 0.0).unwrap();
        let opts = SolverOptions {
            init: Init::Vector(vec![0.1, -0.2]),
            ..Default::default()
        };
        assert!(matches!(
            sp_nngd(&toy_operator(), &toy_rhs(), &params, &opts),
            Err(SolverError::InvalidMappedInit { index: 1, .. })
        ));
    }

    #[test]
    fn mapped_objective_slope_at_zero_is_negative_direction_energy() {
        let (a, b) = random_problem(6, 4, 13);
        let params = MappingParams::new(0.8, -0.25).unwrap();
        let z: Vec<f64> = (0..4)
            .map(|k| params.invert(0.2 + 0.05 * k as f64).unwrap())
            .collect();
        let x = params.apply(&z);
        let r = residual(&a, &x, &b);
        let g = a.apply_adjoint(&r).unwrap();
        let slope = params.apply_derivative(&z);
        let s: Vec<f64> = slope.iter().zip(&g).map(|(&wi, &gi)| -(wi * gi)).collect();
        let psi = |alpha: f64| {
            let trial: Vec<f64> = z
                .iter()
                .zip(&s)
                .map(|(&zi, &si)| params.value(zi + alpha * si))
                .collect();
            half_square_norm(&residual(&a, &trial, &b))
        };
        let analytic: f64 = -s.iter().map(|v| v * v).sum::<f64>();
        let h = 1e-6;
        let finite_diff = (psi(h) - psi(-h)) / (2.0 * h);
        assert!(
            (finite_diff - analytic).abs() <= 1e-5 * analytic.abs(),
            "slope {finite_diff} vs {analytic}"
        );
    }

    #[test]
    fn mapped_descent_residual_never_increases() {
        let (a, b) = random_problem(9, 6, 21);
        let params = MappingParams::new(1.5, -0.5).unwrap();
        let result = sp_nngd(&a, &b, &params, &SolverOptions::default()).unwrap();
        for pair in result.trace.windows(2) {
            assert!(pair[1].rel_residual <= pair[0].rel_residual + 1e-12);
        }
    }

    #[test]
    fn zero_patterns_only_grow() {
        // A right-hand side consistent with a sparse non-negative point
        // pushes some entries to zero; once there they must stay.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (m, n) = (10, 6);
        let mut triplets = Vec::new();
        for i in 0..m {
            for j in 0..n {
                triplets.push((i, j, rng.gen_range(0.0..1.0)));
            }
        }
        let a = LinearOperator::sparse(SparseMatrix::from_triplets(m, n, &triplets).unwrap());
        let planted = vec![0.8, 0.0, 0.4, 0.0, 0.0, 0.6];
        let b = a.apply(&planted).unwrap();

        let assert_nested = |snapshots: &[Vec<bool>]| {
            for pair in snapshots.windows(2) {
                for (was_zero, is_zero) in pair[0].iter().zip(&pair[1]) {
                    assert!(!was_zero || *is_zero, "a zero entry came back to life");
                }
            }
        };

        let mut spm_zero_sets = Vec::new();
        // 5e-2 is strong enough to zero two entries inside the default
        // budget; weaker shrinkage leaves every entry positive at iter 100
        // and the emptiness check below would be vacuous.
        let spm = sp_mrnsd_observed(&a, &b, 5e-2, &SolverOptions::default(), |_, x| {
            spm_zero_sets.push(x.iter().map(|&v| v == 0.0).collect::<Vec<bool>>());
        })
        .unwrap();
        assert_nested(&spm_zero_sets);
        assert!(
            spm.solution.contains(&0.0),
            "expected the shrunken run to produce exact zeros"
        );

        let params = MappingParams::new(1.0, 0.0).unwrap();
        let mut nngd_zero_sets = Vec::new();
        sp_nngd_observed(&a, &b, &params, &SolverOptions::default(), |_, x| {
            nngd_zero_sets.push(x.iter().map(|&v| v == 0.0).collect::<Vec<bool>>());
        })
        .unwrap();
        assert_nested(&nngd_zero_sets);
    }

    #[test]
    fn direction_descends_wherever_the_iterate_is_positive() {
        let (a, b) = random_problem(8, 5, 17);
        let x = vec![0.3; 5];
        let r = residual(&a, &x, &b);
        let g = a.apply_adjoint(&r).unwrap();
        let s: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| -(xi * gi)).collect();
        let along: f64 = s.iter().zip(&g).map(|(si, gi)| si * gi).sum();
        assert!(along < 0.0);
    }

    #[test]
    fn early_stop_rule_fires_on_stagnation() {
        let opts = SolverOptions {
            max_iters: 100,
            rel_change_tol: 1e-4,
            init: toy_start(),
            ..Default::default()
        };
        let result = mrnsd(&toy_operator(), &toy_rhs(), &opts).unwrap();
        assert!(result.iterations_run < 100);
        assert!(sup_diff(&result.solution, &TOY_SOLUTION) <= 0.1);
    }

    #[test]
    fn trace_disabled_still_counts_iterations() {
        let opts = SolverOptions {
            max_iters: 5,
            record_trace: false,
            init: toy_start(),
            ..Default::default()
        };
        let result = mrnsd(&toy_operator(), &toy_rhs(), &opts).unwrap();
        assert!(result.trace.is_empty());
        assert_eq!(result.iterations_run, 5);
    }

    #[test]
    fn rhs_length_mismatch_rejected() {
        let opts = SolverOptions::default();
        assert!(matches!(
            mrnsd(&toy_operator(), &[1.0, 2.0, 3.0], &opts),
            Err(SolverError::RhsLength { rhs: 3, .. })
        ));
        let bad_init = SolverOptions {
            init: Init::Vector(vec![0.1; 3]),
            ..Default::default()
        };
        assert!(matches!(
            mrnsd(&toy_operator(), &toy_rhs(), &bad_init),
            Err(SolverError::InitLength {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn negative_shrinkage_rejected() {
        assert!(matches!(
            sp_mrnsd(&toy_operator(), &toy_rhs(), -0.5, &SolverOptions::default()),
            Err(SolverError::InvalidShrinkage(_))
        ));
    }
}
