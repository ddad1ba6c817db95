//! Special functions and scalar root finding.
//!
//! Bessel functions of the first kind of orders 0 and 1 use the ascending
//! power series (summed in double-double) for `x <= 20` and the Hankel
//! asymptotic expansion beyond. The radial eigenvalues of the ball are the
//! positive fixed points of `tan x = x`, computed in the deficit variable
//! `delta = (n + 1/2) pi - x` where the surrogate `sin x - x cos x` becomes
//! `cos delta - ((n + 1/2) pi - delta) sin delta` up to sign.

use crate::dd::Dd;
use crate::error::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Crossover between the power series and the Hankel expansion.
pub const SERIES_LIMIT: f64 = 20.0;

const MAX_ITERATIONS: usize = 200;
const BISECTION_WIDTH: f64 = 1e-3;

/// Sign-changing bracket with absolute and relative step tolerances.
#[derive(Clone, Copy, Debug)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64) -> RootBracket {
        RootBracket {
            lo,
            hi,
            tol_abs: 1e-13,
            tol_rel: 4.0 * f64::EPSILON,
        }
    }

    pub fn with_tol(mut self, tol_abs: f64) -> RootBracket {
        self.tol_abs = tol_abs;
        self
    }
}

/// Root of `f` in the bracket using bisection followed by secant-Newton steps.
pub fn find_root<F: Fn(f64) -> f64>(f: F, bracket: RootBracket) -> Result<f64> {
    solve(&f, None::<&fn(f64) -> f64>, bracket)
}

/// Root of `f` in the bracket using bisection followed by Newton steps with `df`.
pub fn find_root_newton<F, D>(f: F, df: D, bracket: RootBracket) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    solve(&f, Some(&df), bracket)
}

fn solve<F, D>(f: &F, df: Option<&D>, bracket: RootBracket) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (bracket.lo.min(bracket.hi), bracket.lo.max(bracket.hi));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain(format!("non-finite bracket [{lo}, {hi}]")));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let tol = |x: f64| bracket.tol_abs + bracket.tol_rel * x.abs();

    let mut iterations = 0;
    while hi - lo > BISECTION_WIDTH.max(tol(lo)) {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::NonConvergence { iterations });
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }

    let mut x = 0.5 * (lo + hi);
    let (mut x_prev, mut f_prev) = (lo, flo);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let slope = match df {
            Some(d) => d(x),
            None => (fx - f_prev) / (x - x_prev),
        };
        let step = fx / slope;
        let mut next = x - step;
        let inside = next >= lo && next <= hi;
        if step.abs() <= tol(x) {
            return Ok(if inside { next } else { x });
        }
        if !inside {
            next = 0.5 * (lo + hi);
        }
        if hi - lo <= tol(x) {
            return Ok(next);
        }
        x_prev = x;
        f_prev = fx;
        x = next;
    }
    Err(Error::NonConvergence { iterations })
}

fn check_order(order: u32) -> Result<()> {
    if order > 1 {
        return Err(Error::Domain(format!("Bessel order {order} is not supported")));
    }
    Ok(())
}

/// Ascending series for J_order, summed in double-double.
pub(crate) fn bessel_series(order: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = Dd::prod(h, h);
    let nu = order as f64;
    let mut term = if order == 0 { Dd::ONE } else { Dd::new(h) };
    let mut sum = term;
    let mut peak = term.hi.abs();
    for k in 1..200 {
        let k = k as f64;
        term = (-(term * q)).div_f64(k * (k + nu));
        sum = sum + term;
        peak = peak.max(term.hi.abs());
        if term.hi.abs() <= 1e-34 * peak {
            break;
        }
    }
    sum.to_f64()
}

/// Hankel asymptotic expansion for J_order.
pub(crate) fn bessel_hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let (mut p, mut q) = (0.0, 0.0);
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..120 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        let size = a.abs();
        if size > last || a == 0.0 {
            break;
        }
        last = size;
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
        if size < 1e-18 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    let (cos_chi, sin_chi) = if order == 0 {
        (FRAC_1_SQRT_2 * (c + s), FRAC_1_SQRT_2 * (s - c))
    } else {
        (FRAC_1_SQRT_2 * (s - c), -FRAC_1_SQRT_2 * (s + c))
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Bessel function of the first kind of order 0 or 1 for `x >= 0`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    Ok(if x <= SERIES_LIMIT {
        bessel_series(order, x)
    } else {
        bessel_hankel(order, x)
    })
}

/// `J_1'(x) = J_0(x) - J_1(x) / x`, with the limit 1/2 at the origin.
pub fn bessel_j1_prime(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.5);
    }
    Ok(bessel_j(0, x)? - bessel_j(1, x)? / x)
}

/// `J_1(x) / x`, with the limit 1/2 at the origin.
pub fn bessel_j1_over_x(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.5);
    }
    Ok(bessel_j(1, x)? / x)
}

/// Deficit `(n + 1/2) pi - x_n` of the n-th positive fixed point of `tan x = x`.
pub fn tan_fixed_point_deficit(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("mode index starts at 1".into()));
    }
    let q = (n as f64 + 0.5) * PI;
    let g = |d: f64| d.cos() - (q - d) * d.sin();
    let dg = |d: f64| -(q - d) * d.cos();
    find_root_newton(g, dg, RootBracket::new(0.0, 0.5 * PI))
}

/// n-th positive root of `tan x = x`, lying in `(n pi, (n + 1/2) pi)`.
pub fn tan_fixed_point_root(n: usize) -> Result<f64> {
    let delta = tan_fixed_point_deficit(n)?;
    Ok((n as f64 + 0.5) * PI - delta)
}

/// n-th positive zero of J_1.
pub fn bessel_j1_root(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("zero index starts at 1".into()));
    }
    let center = (n as f64 + 0.25) * PI;
    let f = |x: f64| bessel_j(1, x).unwrap_or(f64::NAN);
    let df = |x: f64| bessel_j1_prime(x).unwrap_or(f64::NAN);
    find_root_newton(f, df, RootBracket::new(center - 0.5 * PI, center + 0.5 * PI))
}

/// n-th positive zero of J_0.
pub fn bessel_j0_root(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("zero index starts at 1".into()));
    }
    let center = (n as f64 - 0.25) * PI;
    let f = |x: f64| bessel_j(0, x).unwrap_or(f64::NAN);
    let df = |x: f64| -bessel_j(1, x).unwrap_or(f64::NAN);
    find_root_newton(f, df, RootBracket::new(center - 0.5 * PI, center + 0.5 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_and_sine_roots() {
        let r = find_root(|x| x - 2.0, RootBracket::new(0.0, 5.0)).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-13);
        let r = find_root(f64::sin, RootBracket::new(3.0, 3.3)).unwrap();
        assert_abs_diff_eq!(r, PI, epsilon = 1e-13);
    }

    #[test]
    fn missing_sign_change_is_reported() {
        let e = find_root(|x| x * x + 1.0, RootBracket::new(-1.0, 1.0)).unwrap_err();
        assert!(matches!(e, Error::NoSignChange { .. }));
    }

    #[test]
    fn bad_derivative_falls_back_to_bisection() {
        let r = find_root_newton(|x| x - 1.0 / 3.0, |_| 1e-300, RootBracket::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(r, 1.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn first_roots_match_reference() {
        assert_abs_diff_eq!(tan_fixed_point_root(1).unwrap(), 4.493409457909064, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j1_root(1).unwrap(), 3.831705970207512, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j0_root(1).unwrap(), 2.404825557695773, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j(0, 2.404825557695773).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn bessel_at_origin_and_bad_input() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert!(bessel_j(1, -1.0).is_err());
        assert!(bessel_j(2, 1.0).is_err());
        assert_eq!(bessel_j1_over_x(0.0).unwrap(), 0.5);
    }

    #[test]
    fn series_and_hankel_agree_across_crossover() {
        for i in 0..=40 {
            let x = 18.0 + 0.1 * i as f64;
            for order in 0..2 {
                let d = bessel_series(order, x) - bessel_hankel(order, x);
                assert!(d.abs() < 1e-12, "order {order} x {x} diff {d:e}");
            }
        }
    }

    #[test]
    fn bessel_matches_frozen_high_precision_values() {
        let table = [
            (0.5, 0.938_469_807_240_812_9, 0.242_268_457_674_873_9),
            (1.0, 0.765_197_686_557_966_6, 0.440_050_585_744_933_5),
            (3.7, -0.399_230_203_371_191_1, 0.053_833_987_745_461_86),
            (7.25, 0.291_996_924_191_779, 0.068_581_700_653_131_74),
            (11.9, 0.025_049_441_699_589_56, -0.228_983_249_661_924_07),
            (12.1, 0.069_666_773_606_807_39, -0.215_748_973_376_924_8),
            (19.99, 0.167_684_799_023_279_16, 0.065_192_578_142_166_36),
            (20.01, 0.166_348_161_489_689_2, 0.068_466_185_258_794_2),
            (35.5, -0.132_331_563_891_330_01, -0.022_347_970_208_817_34),
            (123.4, -0.071_525_536_719_260_19, -0.006_850_999_885_653_966),
            (499.0, -0.009_593_099_634_978_921, 0.034_396_260_940_337_64),
        ];
        for &(x, j0, j1) in &table {
            let envelope = (2.0 / (PI * x)).sqrt().min(1.0);
            for (order, want) in [(0, j0), (1, j1)] {
                let got = bessel_j(order, x).unwrap();
                let scale = f64::max(f64::abs(want), envelope);
                assert!((got - want).abs() <= 1e-12 * scale, "J{order}({x}) = {got}, want {want}");
            }
        }
    }

    #[test]
    fn large_index_bessel_zeros() {
        assert_abs_diff_eq!(bessel_j1_root(50).unwrap(), 157.862_655_401_930_3, epsilon = 1e-11);
        assert_abs_diff_eq!(bessel_j1_root(200).unwrap(), 629.103_332_795_521, epsilon = 1e-10);
    }
}
