//! Radial Stokes eigenmodes of the disk.
//!
//! With `j_{1,n}` the n-th positive zero of `J_1`, `lambda_n = (j_{1,n} / R)^2`
//! and `phi_n(x, y) = J_1(k r) / (k r) (-y, x)`. The boundary coefficient is
//! `gamma_n = J_0(j_{1,n})`, so that `int |d_n phi_n|^2 = 2 pi R gamma_n^2`.

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};
use crate::specfun::{bessel_j, bessel_j1_over_x, bessel_j1_root};
use crate::spectrum::{Dimension, Geometry, Mode, ModeTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenMode2D {
    pub n: usize,
    pub j1n: f64,
    pub lambda: f64,
    pub norm_sq: f64,
    pub gamma_n: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod2D {
    /// Adaptive quadrature of `(2 pi / lambda^2) int_0^j J_1(s)^2 s ds`.
    Quadrature,
    /// Lommel's integral `int_0^j J_1(s)^2 s ds = j^2 J_0(j)^2 / 2` at a zero of `J_1`.
    Lommel,
}

/// `int_0^upper J_1(s)^2 s ds` by adaptive Gauss–Legendre.
pub fn bessel_square_moment(upper: f64) -> Result<f64> {
    let f = |s: f64| {
        let j = bessel_j(1, s).unwrap_or(f64::NAN);
        j * j * s
    };
    let opts = AdaptiveOptions {
        initial_panels: (upper / 2.0).ceil() as usize + 2,
        rel_tol: 1e-14,
        ..AdaptiveOptions::default()
    };
    integrate_adaptive(f, 0.0, upper, opts)
}

pub fn compute_mode_2d(geom: &Geometry, n: usize) -> Result<EigenMode2D> {
    let r = geom.radius;
    let j = bessel_j1_root(n)?;
    let lambda = (j / r) * (j / r);
    let norm_sq = 2.0 * PI / (lambda * lambda) * bessel_square_moment(j)?;
    Ok(EigenMode2D {
        n,
        j1n: j,
        lambda,
        norm_sq,
        gamma_n: bessel_j(0, j)?,
    })
}

pub fn compute_modes_2d(geom: &Geometry, n_max: usize) -> Result<Vec<EigenMode2D>> {
    Geometry::new(geom.radius)?;
    (1..=n_max).into_par_iter().map(|n| compute_mode_2d(geom, n)).collect()
}

pub fn mode_table_2d(geom: &Geometry, n_max: usize) -> Result<ModeTable> {
    let modes = compute_modes_2d(geom, n_max)?;
    Ok(ModeTable {
        dimension: Dimension::Two,
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

pub fn eval_mode_2d(mode: &EigenMode2D, geom: &Geometry, p: [f64; 2]) -> Result<[f64; 2]> {
    let [x, y] = p;
    let r = x.hypot(y);
    if r > geom.radius * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("point at radius {r} lies outside the disk")));
    }
    let f = bessel_j1_over_x(mode.lambda.sqrt() * r)?;
    Ok([-f * y, f * x])
}

pub fn boundary_coefficient_2d(mode: &EigenMode2D) -> Result<f64> {
    bessel_j(0, mode.j1n)
}

pub fn mode_norm_sq_2d(mode: &EigenMode2D, method: NormMethod2D) -> Result<f64> {
    let l2 = mode.lambda * mode.lambda;
    let moment = match method {
        NormMethod2D::Quadrature => bessel_square_moment(mode.j1n)?,
        NormMethod2D::Lommel => {
            let j0 = bessel_j(0, mode.j1n)?;
            0.5 * mode.j1n * mode.j1n * j0 * j0
        }
    };
    Ok(2.0 * PI / l2 * moment)
}

/// Lower and upper bounds `(n + 1/8) pi <= j_{1,n} <= (n + 1/4) pi`.
pub fn lorch_bounds(n: usize) -> (f64, f64) {
    let n = n as f64;
    ((n + 0.125) * PI, (n + 0.25) * PI)
}
