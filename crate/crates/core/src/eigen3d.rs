//! Radial Stokes eigenmodes of the ball in three dimensions.
//!
//! For the n-th positive root `x_n` of `tan x = x` the pair
//! `lambda_n = (x_n / R)^2` and
//!
//! ```text
//! phi_n(p) = P_n(|p|) (y - z, z - x, x - y),
//! P_n(r)   = (cos(k r) - sin(k r) / (k r)) / (k r^2),   k = sqrt(lambda_n),
//! ```
//!
//! solves `-Δ phi = lambda phi`, `div phi = 0` in the ball with `phi = 0` on the
//! sphere and a constant pressure. The closed forms used here are
//!
//! ```text
//! ||phi_n||^2          = 2 pi R / lambda_n (1 - cos(2 x_n))
//! int |d_n phi_n|^2    = 8 pi R^2 gamma_n^2,   gamma_n = sin(x_n) / R
//! ```
//!
//! and `eps_n = pi^2 / R^2 (n + 1/2)^2 - lambda_n`, which is positive,
//! decreasing and tends to `2 / R^2`.

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};
use crate::specfun::tan_fixed_point_deficit;
use crate::spectrum::{Dimension, Geometry, Mode, ModeTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenMode3D {
    pub n: usize,
    pub lambda: f64,
    pub eps_n: f64,
    pub norm_sq: f64,
    pub gamma_n: f64,
    /// `x_n = sqrt(lambda_n) R`.
    pub root: f64,
    /// `(n + 1/2) pi - x_n`.
    pub deficit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod {
    ClosedForm,
    Quadrature,
}

pub fn compute_mode_3d(geom: &Geometry, n: usize) -> Result<EigenMode3D> {
    let r = geom.radius;
    let deficit = tan_fixed_point_deficit(n)?;
    let q = (n as f64 + 0.5) * PI;
    let root = q - deficit;
    let lambda = (root / r) * (root / r);
    // q^2 - x^2 = delta (2q - delta), free of cancellation
    let eps_n = deficit * (2.0 * q - deficit) / (r * r);
    // 1 - cos(2x) = 1 + cos(2 delta)
    let norm_sq = 2.0 * PI * r / lambda * (1.0 + (2.0 * deficit).cos());
    Ok(EigenMode3D {
        n,
        lambda,
        eps_n,
        norm_sq,
        gamma_n: root.sin() / r,
        root,
        deficit,
    })
}

/// Modes `1..=n_max`.
pub fn compute_modes_3d(geom: &Geometry, n_max: usize) -> Result<Vec<EigenMode3D>> {
    Geometry::new(geom.radius)?;
    (1..=n_max).into_par_iter().map(|n| compute_mode_3d(geom, n)).collect()
}

pub fn mode_table_3d(geom: &Geometry, n_max: usize) -> Result<ModeTable> {
    let modes = compute_modes_3d(geom, n_max)?;
    Ok(ModeTable {
        dimension: Dimension::Three,
        radius: geom.radius,
        modes: modes
            .iter()
            .map(|m| Mode {
                index: m.n,
                lambda: m.lambda,
                norm_sq: m.norm_sq,
                gamma: m.gamma_n,
            })
            .collect(),
    })
}

/// `(cos x - sin x / x) / x^2`, with a Taylor branch near the origin.
pub fn radial_shape(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut sum = 0.0;
        let mut pow = 1.0;
        let mut fact = 6.0; // (2m + 1)! for m = 1
        for m in 1..=10 {
            let m = m as f64;
            let sign = if m as usize % 2 == 1 { -1.0 } else { 1.0 };
            sum += sign * 2.0 * m * pow / fact;
            pow *= x2;
            fact *= (2.0 * m + 2.0) * (2.0 * m + 3.0);
        }
        sum
    } else {
        (x.cos() - x.sin() / x) / (x * x)
    }
}

/// Radial factor `P(r)` of the mode with wavenumber `k`.
pub fn radial_profile(k: f64, r: f64) -> f64 {
    k * radial_shape(k * r)
}

pub fn eval_mode_3d(mode: &EigenMode3D, geom: &Geometry, p: [f64; 3]) -> Result<[f64; 3]> {
    let [x, y, z] = p;
    let r = (x * x + y * y + z * z).sqrt();
    if r > geom.radius * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("point at radius {r} lies outside the ball")));
    }
    let pr = radial_profile(mode.lambda.sqrt(), r);
    Ok([pr * (y - z), pr * (z - x), pr * (x - y)])
}

/// Normal derivative on the sphere at the unit direction `n`, from the general
/// derivative of the radial factor (the eigenvalue relation is not used).
pub fn normal_derivative_3d(mode: &EigenMode3D, geom: &Geometry, n: [f64; 3]) -> [f64; 3] {
    let rr = geom.radius;
    let k = mode.lambda.sqrt();
    let (s, c) = (k * rr).sin_cos();
    let factor = (-k * s / rr - 2.0 * c / (rr * rr) + 2.0 * s / (k * rr * rr * rr)) / k;
    let [x, y, z] = n;
    [factor * (y - z), factor * (z - x), factor * (x - y)]
}

pub fn boundary_coefficient_3d(mode: &EigenMode3D, geom: &Geometry) -> f64 {
    mode.root.sin() / geom.radius
}

pub fn mode_norm_sq_3d(mode: &EigenMode3D, geom: &Geometry, method: NormMethod) -> Result<f64> {
    let rr = geom.radius;
    match method {
        NormMethod::ClosedForm => Ok(2.0 * PI * rr / mode.lambda * (1.0 - (2.0 * mode.root).cos())),
        NormMethod::Quadrature => {
            let k = mode.lambda.sqrt();
            // r^2 P(r) = (cos kr - sin kr / (kr)) / k
            let f = |r: f64| {
                let v = r * r * radial_profile(k, r);
                v * v
            };
            let opts = AdaptiveOptions {
                initial_panels: 2 * mode.n + 4,
                rel_tol: 1e-14,
                ..AdaptiveOptions::default()
            };
            Ok(8.0 * PI * integrate_adaptive(f, 0.0, rr, opts)?)
        }
    }
}

/// Smallest index from which `cos(2 x_n) < 0` for every later mode in the
/// list, so that `||phi_n||^2 >= 2 pi R / lambda_n` from there on.
pub fn norm_bound_threshold(modes: &[EigenMode3D]) -> Option<usize> {
    let mut threshold = None;
    for m in modes.iter().rev() {
        if (2.0 * m.root).cos() < 0.0 {
            threshold = Some(m.n);
        } else {
            break;
        }
    }
    threshold
}
