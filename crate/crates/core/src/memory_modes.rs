//! Closed-form modal dynamics of the adjoint system with exponential memory.
//!
//! Projecting the adjoint onto an eigenmode with eigenvalue `lambda` gives
//!
//! ```text
//! -alpha'(t) + lambda alpha(t) + b lambda int_t^T e^{-a (s - t)} alpha(s) ds = 0,
//! alpha(T) = beta,
//! ```
//!
//! equivalent to `-alpha'' + (lambda + a) alpha' - lambda (a + b) alpha = 0`
//! with `alpha'(T) = lambda beta`. With `D = (lambda + a)^2 - 4 (a + b) lambda`
//! the solution is `alpha(t) = C1 e^{mu+ (T - t)} + C2 e^{mu- (T - t)}`.
//!
//! Several quantities are evaluated in rearranged forms because the direct
//! expressions cancel catastrophically once `lambda` is large:
//!
//! ```text
//! a - lambda + sqrt(D) = -4 b lambda / (sqrt(D) + lambda - a)          (lambda >= a)
//! mu-                  = -2 (a + b) lambda / (lambda + a + sqrt(D))
//! B = -mu- - a - b     = 4 b lambda (a + b) / ((lambda + a + sqrt(D)) (lambda - a + sqrt(D)))
//! ```

use crate::error::{Error, Result};
use crate::precision::Ext;
use crate::spectrum::ModeTable;
use serde::{Deserialize, Serialize};

/// Memory kernel `b e^{-a t}` and time horizon `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
}

impl MemoryParams {
    pub fn new(a: f64, b: f64, horizon: f64) -> Result<MemoryParams> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::config("a", format!("must be positive and finite, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::config("b", format!("must be positive and finite, got {b}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config("T", format!("must be positive and finite, got {horizon}")));
        }
        Ok(MemoryParams { a, b, horizon })
    }
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            a: 1.0,
            b: 1.0,
            horizon: 2.0,
        }
    }
}

/// `(lambda + a)^2 - 4 (a + b) lambda`.
pub fn discriminant(lambda: f64, params: &MemoryParams) -> f64 {
    let (a, b) = (params.a, params.b);
    let d = lambda - a;
    d * d - 4.0 * b * lambda
}

/// Ratios `C1 / beta` and `C2 / beta`.
fn coefficient_ratios(lambda: f64, a: f64, b: f64, s: f64) -> (f64, f64) {
    if lambda >= a {
        let small = -4.0 * b * lambda / (s + lambda - a);
        ((lambda - a + s) / (2.0 * s), small / (2.0 * s))
    } else {
        let small = -4.0 * b * lambda / (s + a - lambda);
        (small / (2.0 * s), (a - lambda + s) / (2.0 * s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDynamics {
    pub lambda: f64,
    pub beta: f64,
    pub discriminant: f64,
    pub sqrt_disc: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub c1: f64,
    pub c2: f64,
    /// `B = -mu- - a - b`.
    pub shift: f64,
    pub params: MemoryParams,
}

pub fn mode_dynamics(lambda: f64, params: &MemoryParams, beta: f64) -> Result<ModeDynamics> {
    let (a, b) = (params.a, params.b);
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("eigenvalue must be positive, got {lambda}")));
    }
    let disc = discriminant(lambda, params);
    if !(disc > 0.0) {
        return Err(Error::Discriminant {
            lambda,
            discriminant: disc,
            n0: None,
        });
    }
    let s = disc.sqrt();
    let sum = lambda + a + s;
    let mu_plus = -0.5 * sum;
    let mu_minus = -2.0 * (a + b) * lambda / sum;
    let (r1, r2) = coefficient_ratios(lambda, a, b, s);
    let shift = if lambda >= a {
        4.0 * b * lambda * (a + b) / (sum * (lambda - a + s))
    } else {
        (a + b) * (lambda - a - s) / sum
    };
    Ok(ModeDynamics {
        lambda,
        beta,
        discriminant: disc,
        sqrt_disc: s,
        mu_plus,
        mu_minus,
        c1: beta * r1,
        c2: beta * r2,
        shift,
        params: *params,
    })
}

/// Same as [`mode_dynamics`] for mode `n` of a table; a negative discriminant
/// reports the smallest admissible index of the table.
pub fn mode_dynamics_for(table: &ModeTable, n: usize, params: &MemoryParams, beta: f64) -> Result<ModeDynamics> {
    let lambda = table.mode(n)?.lambda;
    mode_dynamics(lambda, params, beta).map_err(|e| match e {
        Error::Discriminant {
            lambda,
            discriminant,
            ..
        } => Error::Discriminant {
            lambda,
            discriminant,
            n0: admissible_start(table, params),
        },
        other => other,
    })
}

/// Rates and amplitude ratios (`beta = 1`) in extended precision. Forming them at
/// high precision keeps `mu+ + mu- = -(lambda + a)` and `c1 + c2 = 1` exact, which
/// the cancellations in packet and Gramian integrals depend on.
#[derive(Clone, Debug)]
pub struct ExtDynamics {
    pub mu_plus: Ext,
    pub mu_minus: Ext,
    pub c1: Ext,
    pub c2: Ext,
}

/// Caller guarantees a positive discriminant.
pub fn ext_dynamics(lambda: f64, params: &MemoryParams, bits: usize) -> ExtDynamics {
    let lam = Ext::from_f64(lambda, bits);
    let a = Ext::from_f64(params.a, bits);
    let ab = Ext::from_f64(params.a + params.b, bits);
    let sum = &lam + &a;
    let s = (&sum * &sum - &ab * &lam * 4.0).sqrt();
    let big = &sum + &s;
    let c1 = (&lam - &a + &s) / (&s * 2.0);
    ExtDynamics {
        mu_plus: -(&big / 2.0),
        mu_minus: -(&ab * &lam * 2.0 / &big),
        c2: Ext::from_f64(1.0, bits) - &c1,
        c1,
    }
}

impl ExtDynamics {
    pub fn terms(&self) -> [(Ext, Ext); 2] {
        [(self.c1.clone(), self.mu_plus.clone()), (self.c2.clone(), self.mu_minus.clone())]
    }

    /// Extended-precision counterpart of [`ModeDynamics::traction_terms`].
    pub fn traction_terms(&self, params: &MemoryParams) -> [(Ext, Ext); 3] {
        let bits = self.c1.bits();
        let one = Ext::from_f64(1.0, bits);
        let a = Ext::from_f64(params.a, bits);
        let b = Ext::from_f64(params.b, bits);
        let d1 = &a + &self.mu_plus;
        let d2 = &a + &self.mu_minus;
        let tail = -(&b * (&self.c1 / &d1 + &self.c2 / &d2));
        [
            (&self.c1 * (&one + &b / &d1), self.mu_plus.clone()),
            (&self.c2 * (&one + &b / &d2), self.mu_minus.clone()),
            (tail, -a),
        ]
    }
}

/// Smallest `n0` such that the discriminant is positive for every mode `n >= n0` of the table.
pub fn admissible_start(table: &ModeTable, params: &MemoryParams) -> Option<usize> {
    let mut start = None;
    for m in table.modes.iter().rev() {
        if discriminant(m.lambda, params) > 0.0 {
            start = Some(m.index);
        } else {
            break;
        }
    }
    start
}

/// `int_0^u e^{-a (u - s)} e^{mu s} ds = (e^{mu u} - e^{-a u}) / (a + mu)`.
pub fn memory_integral(mu: f64, a: f64, u: f64) -> f64 {
    let x = (a + mu) * u;
    let ratio = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
    (-a * u).exp() * u * ratio
}

impl ModeDynamics {
    /// `(coefficient, rate)` pairs with `alpha = sum c e^{rate (T - t)}`.
    pub fn terms(&self) -> [(f64, f64); 2] {
        [(self.c1, self.mu_plus), (self.c2, self.mu_minus)]
    }

    /// `alpha(t)` and `alpha'(t)`.
    pub fn alpha_eval(&self, t: f64) -> (f64, f64) {
        let u = self.params.horizon - t;
        let e1 = self.c1 * (self.mu_plus * u).exp();
        let e2 = self.c2 * (self.mu_minus * u).exp();
        (e1 + e2, -(self.mu_plus * e1 + self.mu_minus * e2))
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.alpha_eval(t).0
    }

    pub fn alpha_at_zero(&self) -> f64 {
        self.alpha(0.0)
    }

    /// `int_t^T e^{-a (s - t)} alpha(s) ds`.
    pub fn memory_tail(&self, t: f64) -> f64 {
        let u = self.params.horizon - t;
        let a = self.params.a;
        self.c1 * memory_integral(self.mu_plus, a, u) + self.c2 * memory_integral(self.mu_minus, a, u)
    }

    /// Left-hand side of the integro-differential equation at `t`.
    pub fn integro_residual(&self, t: f64) -> f64 {
        let (al, dal) = self.alpha_eval(t);
        -dal + self.lambda * al + self.params.b * self.lambda * self.memory_tail(t)
    }

    /// `(coefficient, rate)` triples of `alpha + b * tail` as an exponential sum in `T - t`.
    pub fn traction_terms(&self) -> [(f64, f64); 3] {
        let (a, b) = (self.params.a, self.params.b);
        let d1 = a + self.mu_plus;
        let d2 = a + self.mu_minus;
        [
            (self.c1 * (1.0 + b / d1), self.mu_plus),
            (self.c2 * (1.0 + b / d2), self.mu_minus),
            (-b * (self.c1 / d1 + self.c2 / d2), -a),
        ]
    }
}

/// Values of `alpha` on the grid `t_i = T - i T / steps`, ordered from `t = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Largest `lambda * dt` accepted by the RK4 oracle.
pub const ORACLE_STEP_LIMIT: f64 = 0.1;

/// Backward RK4 integration of the equivalent second-order equation.
pub fn alpha_oracle(lambda: f64, params: &MemoryParams, beta: f64, steps: usize) -> Result<OracleTrajectory> {
    let t_end = params.horizon;
    let steps = steps.max(1);
    let h = t_end / steps as f64;
    let ratio = lambda * h;
    if ratio > ORACLE_STEP_LIMIT {
        return Err(Error::Stability {
            ratio,
            limit: ORACLE_STEP_LIMIT,
            suggested_steps: (lambda * t_end / ORACLE_STEP_LIMIT).ceil() as usize,
        });
    }
    let (a, b) = (params.a, params.b);
    let p = lambda + a;
    let q = lambda * (a + b);
    let rhs = |y: [f64; 2]| [y[1], -p * y[1] - q * y[0]];
    let mut y = [beta, -lambda * beta];
    let mut times = Vec::with_capacity(steps + 1);
    let mut alpha = Vec::with_capacity(steps + 1);
    times.push(t_end);
    alpha.push(beta);
    for i in 1..=steps {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        times.push(t_end - i as f64 * h);
        alpha.push(y[0]);
    }
    Ok(OracleTrajectory { times, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roots_satisfy_characteristic_equation() {
        let p = MemoryParams::default();
        for &lambda in &[20.19, 1e3, 2.0e6] {
            let d = mode_dynamics(lambda, &p, 1.0).unwrap();
            for mu in [d.mu_plus, d.mu_minus] {
                let c = mu * mu + (lambda + p.a) * mu + lambda * (p.a + p.b);
                assert!(c.abs() <= 1e-12 * lambda * lambda, "lambda {lambda}: {c:e}");
            }
            assert_relative_eq!(d.mu_plus, -lambda + p.b + d.shift, max_relative = 1e-14);
            assert!(d.shift > 0.0);
        }
    }

    #[test]
    fn negative_discriminant_is_rejected() {
        let p = MemoryParams::new(1.0, 1.0, 2.0).unwrap();
        // D < 0 for 3 - 2 sqrt(2) < lambda < 3 + 2 sqrt(2)
        let e = mode_dynamics(3.0, &p, 1.0).unwrap_err();
        assert!(matches!(e, Error::Discriminant { .. }));
    }

    #[test]
    fn small_lambda_branch_matches_direct_formulas() {
        let p = MemoryParams::new(5.0, 0.1, 1.0).unwrap();
        let lambda = 0.5;
        let d = mode_dynamics(lambda, &p, 2.0).unwrap();
        let s = discriminant(lambda, &p).sqrt();
        assert_relative_eq!(d.c1, 2.0 * (lambda - p.a + s) / (2.0 * s), max_relative = 1e-12);
        assert_relative_eq!(d.c2, 2.0 * (p.a - lambda + s) / (2.0 * s), max_relative = 1e-12);
        assert_relative_eq!(d.shift, -d.mu_minus - p.a - p.b, max_relative = 1e-12);
    }

    #[test]
    fn oracle_rejects_large_steps() {
        let p = MemoryParams::default();
        let e = alpha_oracle(1e4, &p, 1.0, 1000).unwrap_err();
        match e {
            Error::Stability { suggested_steps, .. } => assert_eq!(suggested_steps, 200_000),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn memory_integral_confluent_limit() {
        let a = 2.0;
        let u = 0.7;
        let v = memory_integral(-a, a, u);
        assert_relative_eq!(v, u * (-a * u).exp(), max_relative = 1e-15);
        let near = memory_integral(-a + 1e-12, a, u);
        assert_relative_eq!(near, v, max_relative = 1e-11);
    }
}
