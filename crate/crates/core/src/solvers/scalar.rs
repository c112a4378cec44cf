//! Entry-wise nonlinearities and step bounds shared by the solvers: the
//! soft-threshold shrinkage, the smooth non-negative mapping with its
//! derivative and inverse, and the feasibility bounds that keep shrunken
//! updates non-negative.

use super::SolverError;

/// Shrinks one value towards zero by `gamma`: values within `[-gamma,
/// gamma]` collapse to exactly zero, everything else moves `gamma`
/// closer. Callers guarantee `gamma >= 0`.
pub fn soft_threshold_scalar(t: f64, gamma: f64) -> f64 {
    if t > gamma {
        t - gamma
    } else if t < -gamma {
        t + gamma
    } else {
        0.0
    }
}

/// Entry-wise soft threshold of a vector.
pub fn soft_threshold(x: &[f64], gamma: f64) -> Result<Vec<f64>, SolverError> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(SolverError::InvalidShrinkage(gamma));
    }
    Ok(x.iter().map(|&t| soft_threshold_scalar(t, gamma)).collect())
}

/// The smooth non-negative reparameterization `w(z) = exp(a(z-c)) -
/// a(z-c) - 1` for `z > c` and exactly zero otherwise.
///
/// `a > 0` sets the steepness, `c` the switch point below which values
/// (and the derivative) vanish; the mapping is continuously
/// differentiable across the switch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappingParams {
    a: f64,
    c: f64,
}

impl MappingParams {
    pub fn new(a: f64, c: f64) -> Result<Self, SolverError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(SolverError::InvalidSteepness(a));
        }
        if !c.is_finite() {
            return Err(SolverError::InvalidSwitchPoint(c));
        }
        Ok(MappingParams { a, c })
    }

    pub fn steepness(&self) -> f64 {
        self.a
    }

    pub fn switch_point(&self) -> f64 {
        self.c
    }

    /// `w(z)`; exactly zero for `z <= c`.
    pub fn value(&self, z: f64) -> f64 {
        if z > self.c {
            let u = self.a * (z - self.c);
            // exp_m1 keeps the small-u cancellation exp(u) - u - 1 accurate.
            u.exp_m1() - u
        } else {
            0.0
        }
    }

    /// `w'(z) = a (exp(a(z-c)) - 1)`; exactly zero for `z <= c`.
    pub fn derivative(&self, z: f64) -> f64 {
        if z > self.c {
            self.a * (self.a * (z - self.c)).exp_m1()
        } else {
            0.0
        }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&zi| self.value(zi)).collect()
    }

    pub fn apply_derivative(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&zi| self.derivative(zi)).collect()
    }

    /// Solves `w(z) = v` for the unique `z >= c`, so solvers can start
    /// from a prescribed non-negative solution value. `v = 0` maps to the
    /// switch point exactly.
    pub fn invert(&self, v: f64) -> Result<f64, SolverError> {
        if !v.is_finite() || v < 0.0 {
            return Err(SolverError::NegativeMappingTarget(v));
        }
        if v == 0.0 {
            return Ok(self.c);
        }
        // Solve exp_m1(u) - u = v for u > 0, then z = c + u/a. The left
        // side grows from 0, so bracket by doubling and polish with a
        // bracket-guarded Newton iteration.
        let h = |u: f64| u.exp_m1() - u - v;
        let mut lo = 0.0;
        let mut hi = (1.0 + v).ln().max(1.0);
        while h(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..100 {
            let hu = h(u);
            // Keep the current iterate when it already satisfies the
            // residual test; replacing it first would discard the root.
            if hu.abs() <= 1e-14 * (1.0 + v) {
                break;
            }
            if hu > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let slope = u.exp_m1();
            let newton = u - hu / slope;
            u = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        Ok(self.c + u / self.a)
    }
}

/// Largest feasible step along `s` from non-negative `x` before some
/// entry would cross zero: the minimum of `-x_i / s_i` over descending
/// coordinates, or infinity when none descend.
pub fn mrnsd_step_bound(x: &[f64], s: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), s.len());
    x.iter()
        .zip(s)
        .filter(|(_, &si)| si < 0.0)
        .map(|(&xi, &si)| -xi / si)
        .fold(f64::INFINITY, f64::min)
}

/// Largest step for which the shrunken update `S(x + alpha s, alpha
/// lambda)` stays non-negative: the minimum of `-x_i / (s_i + lambda)`
/// over entries with `s_i < -lambda`, or infinity when none qualify.
pub fn spmrnsd_step_bound(x: &[f64], s: &[f64], lambda: f64) -> f64 {
    debug_assert_eq!(x.len(), s.len());
    x.iter()
        .zip(s)
        .filter(|(_, &si)| si < -lambda)
        .map(|(&xi, &si)| -xi / (si + lambda))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_piecewise_values() {
        let out = soft_threshold(&[1.0, -0.3, 0.75], 0.5).unwrap();
        assert_eq!(out, vec![0.5, 0.0, 0.25]);
    }

    #[test]
    fn soft_threshold_zero_gamma_is_identity() {
        let x = [1.5, -2.0, 0.0, 3.25];
        assert_eq!(soft_threshold(&x, 0.0).unwrap(), x.to_vec());
    }

    #[test]
    fn soft_threshold_rejects_negative_gamma() {
        assert!(matches!(
            soft_threshold(&[1.0], -0.1),
            Err(SolverError::InvalidShrinkage(_))
        ));
    }

    #[test]
    fn soft_threshold_is_shrinkage_prox() {
        // Brute-force minimize 0.5 (t - y)^2 + gamma |t| over a fine grid
        // and compare with the closed form.
        let (y, gamma) = (0.8, 0.3);
        let mut best = (f64::INFINITY, 0.0);
        let mut t = -2.0f64;
        while t <= 2.0 {
            let obj = 0.5 * (t - y) * (t - y) + gamma * t.abs();
            if obj < best.0 {
                best = (obj, t);
            }
            t += 1e-4;
        }
        let closed = soft_threshold_scalar(y, gamma);
        assert!((closed - 0.5).abs() < 1e-12);
        assert!((best.1 - closed).abs() <= 1e-4 + 1e-12);
    }

    #[test]
    fn mapping_vanishes_at_and_below_switch() {
        let w = MappingParams::new(1.0, 0.0).unwrap();
        assert_eq!(w.value(0.0), 0.0);
        assert_eq!(w.value(-5.0), 0.0);
        assert_eq!(w.derivative(0.0), 0.0);
        assert_eq!(w.derivative(-5.0), 0.0);
    }

    #[test]
    fn mapping_matches_closed_forms() {
        let w = MappingParams::new(1.0, 0.0).unwrap();
        assert!((w.value(1.0) - (std::f64::consts::E - 2.0)).abs() < 1e-15);
        assert!((w.derivative(1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn mapping_is_smooth_across_switch() {
        // Just above the switch point the value is O(eps^2) and the
        // derivative O(eps): both continuous extensions of zero.
        let w = MappingParams::new(2.0, 1.5).unwrap();
        let eps = 1e-8;
        assert!(w.value(1.5 + eps) < 1e-14);
        assert!(w.derivative(1.5 + eps) < 1e-7);
    }

    #[test]
    fn mapping_derivative_matches_central_differences() {
        let w = MappingParams::new(0.5, -1.0).unwrap();
        let (z, h) = (0.7, 1e-5);
        let fd = (w.value(z + h) - w.value(z - h)) / (2.0 * h);
        assert!((w.derivative(z) - fd).abs() <= 1e-6);
    }

    #[test]
    fn derivative_zero_exactly_where_value_zero() {
        let w = MappingParams::new(3.0, 0.25).unwrap();
        for z in [-2.0, 0.0, 0.25, 0.3, 1.0] {
            assert_eq!(w.value(z) == 0.0, w.derivative(z) == 0.0);
        }
    }

    #[test]
    fn mapping_inverse_round_trips() {
        let w = MappingParams::new(0.7, -0.3).unwrap();
        for v in [0.0, 1e-9, 1e-4, 0.1, 1.0, 37.5, 1e6] {
            let z = w.invert(v).unwrap();
            assert!(z >= w.switch_point());
            assert!(
                (w.value(z) - v).abs() <= 1e-9 * (1.0 + v),
                "w({z}) = {} != {v}",
                w.value(z)
            );
        }
        assert_eq!(w.invert(0.0).unwrap(), -0.3);
        assert!(matches!(
            w.invert(-1.0),
            Err(SolverError::NegativeMappingTarget(_))
        ));
    }

    #[test]
    fn mapping_rejects_bad_parameters() {
        assert!(matches!(
            MappingParams::new(0.0, 1.0),
            Err(SolverError::InvalidSteepness(_))
        ));
        assert!(matches!(
            MappingParams::new(-2.0, 1.0),
            Err(SolverError::InvalidSteepness(_))
        ));
        assert!(matches!(
            MappingParams::new(1.0, f64::NAN),
            Err(SolverError::InvalidSwitchPoint(_))
        ));
    }

    #[test]
    fn step_bound_single_negative_direction() {
        assert_eq!(mrnsd_step_bound(&[1.0, 1.0], &[-2.0, 1.0]), 0.5);
    }

    #[test]
    fn step_bound_infinite_without_descent() {
        assert_eq!(mrnsd_step_bound(&[1.0, 2.0], &[3.0, 4.0]), f64::INFINITY);
    }

    #[test]
    fn shrunken_step_bound_examples() {
        assert_eq!(spmrnsd_step_bound(&[1.0], &[-3.0], 1.0), 0.5);
        // Entries with s_i in [-lambda, 0) do not bind.
        assert_eq!(spmrnsd_step_bound(&[1.0], &[-0.5], 1.0), f64::INFINITY);
    }

    #[test]
    fn shrunken_bound_reduces_to_plain_bound_at_zero_lambda() {
        let x = [0.3, 0.0, 2.0, 1.0];
        let s = [-0.1, 0.5, -4.0, 0.0];
        assert_eq!(spmrnsd_step_bound(&x, &s, 0.0), mrnsd_step_bound(&x, &s));
    }

    proptest! {
        #[test]
        fn shrunken_update_stays_non_negative_at_the_bound(
            xs in proptest::collection::vec((0.0f64..5.0, -5.0f64..5.0), 1..12),
            lambda in 0.0f64..2.0,
        ) {
            let x: Vec<f64> = xs.iter().map(|p| p.0).collect();
            let s: Vec<f64> = xs.iter().map(|p| p.1).collect();
            let u = spmrnsd_step_bound(&x, &s, lambda);
            prop_assume!(u.is_finite());
            let shrunk = soft_threshold(
                &x.iter().zip(&s).map(|(xi, si)| xi + u * si).collect::<Vec<_>>(),
                u * lambda,
            ).unwrap();
            let scale = 1.0 + x.iter().chain(&s).fold(0.0f64, |m, v| m.max(v.abs()));
            for v in shrunk {
                prop_assert!(v >= -1e-10 * scale, "entry {v} dropped below zero");
            }
        }

        #[test]
        fn mapping_value_and_slope_non_negative(
            a in 0.01f64..10.0,
            c in -3.0f64..3.0,
            z in -10.0f64..10.0,
        ) {
            let w = MappingParams::new(a, c).unwrap();
            prop_assert!(w.value(z) >= 0.0);
            prop_assert!(w.derivative(z) >= 0.0);
        }
    }
}
