//! Forward modal simulation, the duality identity and finite-mode Gramians.
//!
//! In modal coordinates the distributed-control system with memory reads
//!
//! ```text
//! y' = -lambda y - b lambda z + v,    z' = y - a z,    z(0) = 0,
//! ```
//!
//! where `z(t) = int_0^t e^{-a (t - s)} y(s) ds`. Its characteristic roots are
//! the adjoint rates `mu+` and `mu-`. Multiplying by the adjoint amplitude
//! `alpha` and integrating gives `y(T) beta - y(0) alpha(0) = int_0^T v alpha dt`.
//!
//! The Gramian of the first `N` adjoint modes is assembled and factored in
//! extended precision: its smallest generalized eigenvalue relative to the
//! initial energies falls far below double precision long before `N = 160`.

use crate::error::{Error, Result};
use crate::memory_modes::{ext_dynamics, memory_integral, mode_dynamics, mode_dynamics_for, MemoryParams, ModeDynamics};
use crate::observability::expm1_ratio;
use crate::precision::{ldexp, Ext};
use crate::quadrature::{graded_breaks, GaussLegendre};
use crate::spectrum::ModeTable;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `lambda * dt` accepted by the forward integrator.
pub const STEP_LIMIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    pub y: f64,
    pub z: f64,
}

/// Piecewise-linear control samples per mode on a uniform grid starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub dt: f64,
    pub values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(dt: f64, values: Vec<Vec<f64>>) -> Result<ControlSignal> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("control grid step must be positive, got {dt}")));
        }
        let len = values.first().map_or(0, Vec::len);
        if len < 2 || values.iter().any(|v| v.len() != len) {
            return Err(Error::Domain("every mode needs the same number (>= 2) of control samples".into()));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Domain("control samples must be finite".into()));
        }
        Ok(ControlSignal { dt, values })
    }

    pub fn constant(modes: usize, intervals: usize, horizon: f64, value: f64) -> ControlSignal {
        let intervals = intervals.max(1);
        ControlSignal {
            dt: horizon / intervals as f64,
            values: vec![vec![value; intervals + 1]; modes],
        }
    }

    pub fn zero(modes: usize, intervals: usize, horizon: f64) -> ControlSignal {
        ControlSignal::constant(modes, intervals, horizon, 0.0)
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.values[0].len() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values[0].len()).map(|i| i as f64 * self.dt).collect()
    }

    /// Linear interpolation, clamped to the grid.
    pub fn eval(&self, mode: usize, t: f64) -> f64 {
        let v = &self.values[mode];
        let last = v.len() - 1;
        let x = (t / self.dt).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let f = x - i as f64;
        v[i] + f * (v[i + 1] - v[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `y[mode][step]`.
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self, mode: usize) -> ModalState {
        ModalState {
            y: *self.y[mode].last().unwrap_or(&0.0),
            z: *self.z[mode].last().unwrap_or(&0.0),
        }
    }
}

fn check_steps(lambda_max: f64, horizon: f64, steps: usize) -> Result<f64> {
    let steps = steps.max(1);
    let dt = horizon / steps as f64;
    let ratio = lambda_max * dt;
    if ratio > STEP_LIMIT {
        return Err(Error::Stability {
            ratio,
            limit: STEP_LIMIT,
            suggested_steps: (lambda_max * horizon / STEP_LIMIT).ceil() as usize,
        });
    }
    Ok(dt)
}

/// Classical RK4 on the augmented `(y, z)` system of every mode.
pub fn simulate_distributed(
    y0: &[f64],
    v: &ControlSignal,
    params: &MemoryParams,
    lambdas: &[f64],
    steps: usize,
) -> Result<Trajectory> {
    if y0.len() != lambdas.len() || v.modes() != lambdas.len() {
        return Err(Error::Domain(format!(
            "{} eigenvalues, {} initial values and {} control channels",
            lambdas.len(),
            y0.len(),
            v.modes()
        )));
    }
    let horizon = params.horizon;
    if (v.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(Error::Domain(format!(
            "control grid covers [0, {}] but the horizon is {horizon}",
            v.horizon()
        )));
    }
    let lambda_max = lambdas.iter().fold(0.0f64, |m, &l| m.max(l));
    let dt = check_steps(lambda_max, horizon, steps)?;
    let steps = steps.max(1);
    let (a, b) = (params.a, params.b);
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let per_mode: Vec<(Vec<f64>, Vec<f64>)> = lambdas
        .par_iter()
        .enumerate()
        .map(|(m, &lambda)| {
            let rhs = |t: f64, s: [f64; 2]| [-lambda * s[0] - b * lambda * s[1] + v.eval(m, t), s[0] - a * s[1]];
            let mut s = [y0[m], 0.0];
            let mut ys = Vec::with_capacity(steps + 1);
            let mut zs = Vec::with_capacity(steps + 1);
            ys.push(s[0]);
            zs.push(s[1]);
            for i in 0..steps {
                let t = i as f64 * dt;
                let k1 = rhs(t, s);
                let k2 = rhs(t + 0.5 * dt, [s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
                let k3 = rhs(t + 0.5 * dt, [s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
                let k4 = rhs(t + dt, [s[0] + dt * k3[0], s[1] + dt * k3[1]]);
                for j in 0..2 {
                    s[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
                ys.push(s[0]);
                zs.push(s[1]);
            }
            (ys, zs)
        })
        .collect();
    let (y, z) = per_mode.into_iter().unzip();
    Ok(Trajectory { times, y, z })
}

/// Uncontrolled solution `(y(t), z(t))` of one mode from `y(0) = y0`, `z(0) = 0`.
pub fn homogeneous_solution(lambda: f64, params: &MemoryParams, y0: f64, t: f64) -> Result<ModalState> {
    let d = mode_dynamics(lambda, params, 1.0)?;
    let (a, b) = (params.a, params.b);
    let s = d.sqrt_disc;
    // y = A e^{mu+ t} + B e^{mu- t} with A + B = y0 and mu+ A + mu- B = -lambda y0
    let lam_plus_mu = if lambda >= a {
        2.0 * b * lambda / (lambda - a + s)
    } else {
        0.5 * (lambda - a - s)
    };
    let big_a = y0 * (lambda + d.mu_minus) / s;
    let big_b = -y0 * lam_plus_mu / s;
    Ok(ModalState {
        y: big_a * (d.mu_plus * t).exp() + big_b * (d.mu_minus * t).exp(),
        z: big_a * memory_integral(d.mu_plus, a, t) + big_b * memory_integral(d.mu_minus, a, t),
    })
}

/// `int_0^T v(t) alpha(t) dt` for a piecewise-linear control channel.
pub fn control_pairing(v: &ControlSignal, mode: usize, dynamics: &ModeDynamics) -> f64 {
    let horizon = dynamics.params.horizon;
    let fast = dynamics.mu_plus.abs().max(1.0);
    let mut breaks: Vec<f64> = graded_breaks(0.0, horizon, 0.02 / fast, 1.15)
        .into_iter()
        .map(|u| horizon - u)
        .chain(v.grid())
        .filter(|t| *t >= 0.0 && *t <= horizon)
        .collect();
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * horizon);
    let rule = GaussLegendre::new(8);
    rule.integrate_breaks(|t| v.eval(mode, t) * dynamics.alpha(t), &breaks)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    /// `y(T) beta - y(0) alpha(0)`.
    pub state_side: f64,
    /// `int_0^T v alpha dt`.
    pub control_side: f64,
    pub residual: f64,
    /// `|y(T) beta| + |y(0) alpha(0)| + 1`.
    pub scale: f64,
}

impl DualityCheck {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

/// Duality identity for a single mode with eigenvalue `lambda`.
pub fn modal_duality_check(
    y0: f64,
    v: &ControlSignal,
    beta: f64,
    params: &MemoryParams,
    lambda: f64,
    steps: usize,
) -> Result<DualityCheck> {
    if v.modes() != 1 {
        return Err(Error::Domain("duality check takes a single control channel".into()));
    }
    let traj = simulate_distributed(&[y0], v, params, &[lambda], steps)?;
    let dynamics = mode_dynamics(lambda, params, beta)?;
    let y_t = traj.final_state(0).y;
    let initial = y0 * dynamics.alpha_at_zero();
    let state_side = y_t * beta - initial;
    let control_side = control_pairing(v, 0, &dynamics);
    Ok(DualityCheck {
        state_side,
        control_side,
        residual: (state_side - control_side).abs(),
        scale: (y_t * beta).abs() + initial.abs() + 1.0,
    })
}

/// Boundary observation kernel used in the Gramian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKernel {
    /// `alpha_n(t)`: the normal derivative of the adjoint velocity.
    NormalDerivative,
    /// `alpha_n(t) + b int_t^T e^{-a (s - t)} alpha_n(s) ds`: the full traction with memory.
    FullTraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramianOptions {
    pub weighted: bool,
    pub kernel: ObservationKernel,
    /// Working precision; `None` picks one from the size.
    pub bits: Option<usize>,
}

impl Default for GramianOptions {
    fn default() -> Self {
        GramianOptions {
            weighted: false,
            kernel: ObservationKernel::NormalDerivative,
            bits: None,
        }
    }
}

pub fn default_gramian_bits(n: usize) -> usize {
    320 + 4 * n
}

/// Gramian `G` (extended precision) and the diagonal `K` of initial energies.
#[derive(Clone, Debug)]
pub struct GramianSystem {
    pub n: usize,
    pub bits: usize,
    g: Vec<Ext>,
    pub k: Vec<f64>,
}

fn kernel_terms(lambda: f64, params: &MemoryParams, kernel: ObservationKernel, bits: usize) -> Vec<(Ext, Ext)> {
    let d = ext_dynamics(lambda, params, bits);
    match kernel {
        ObservationKernel::NormalDerivative => d.terms().to_vec(),
        ObservationKernel::FullTraction => d.traction_terms(params).to_vec(),
    }
}

pub fn observability_gramian(n: usize, table: &ModeTable, params: &MemoryParams, opts: &GramianOptions) -> Result<GramianSystem> {
    if n == 0 {
        return Err(Error::Domain("Gramian size must be positive".into()));
    }
    table.mode(n)?;
    let bits = opts.bits.unwrap_or_else(|| default_gramian_bits(n));
    let dyns: Vec<ModeDynamics> = (1..=n)
        .map(|i| mode_dynamics_for(table, i, params, 1.0))
        .collect::<Result<_>>()?;
    let horizon = params.horizon;
    let w = if opts.weighted { 2.0 * (params.a + params.b) } else { 0.0 };
    let t = Ext::from_f64(horizon, bits);
    let ew = Ext::from_f64(w, bits);
    let factor = table.boundary_factor();
    // per mode: (coefficient * gamma * sqrt(factor), rate, e^{(rate + w) T})
    let terms: Vec<Vec<(Ext, Ext, Ext)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mode = &table.modes[i];
            let scale = mode.gamma * factor.sqrt();
            kernel_terms(mode.lambda, params, opts.kernel, bits)
                .into_iter()
                .map(|(c, rate)| {
                    let growth = ((&rate + &ew) * &t).exp();
                    (c * scale, rate, growth)
                })
                .collect()
        })
        .collect();
    let ewt = (&ew * &t).exp();
    let g: Vec<Ext> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            if j > i {
                return Ext::zero(bits);
            }
            let mut s = Ext::zero(bits);
            for (ci, pi, ei) in &terms[i] {
                for (cj, pj, ej) in &terms[j] {
                    let p = pi + pj + &ew;
                    // e^{(pi + w) T} e^{(pj + w) T} / e^{w T}
                    let e = ei * ej / &ewt;
                    s = s + ci * cj * expm1_ratio(&p, &e, horizon);
                }
            }
            s
        })
        .collect();
    let mut g = g;
    for i in 0..n {
        for j in (i + 1)..n {
            g[i * n + j] = g[j * n + i].clone();
        }
    }
    let k = (0..n)
        .map(|i| {
            let a0 = dyns[i].alpha_at_zero();
            a0 * a0 * table.modes[i].norm_sq
        })
        .collect();
    Ok(GramianSystem { n, bits, g, k })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinEigen {
    pub n: usize,
    pub value: f64,
    pub log10: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    pub symmetric: bool,
    pub extended_cholesky: bool,
    pub shifted_cholesky: bool,
}

impl GramianSystem {
    pub fn entry(&self, i: usize, j: usize) -> &Ext {
        &self.g[i * self.n + j]
    }

    /// Gramian rounded to double precision.
    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j).to_f64())
    }

    /// `x^T G x / x^T K x` for a coefficient vector on the leading modes.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let m = x.len().min(self.n);
        let xs: Vec<Ext> = x[..m].iter().map(|&v| Ext::from_f64(v, self.bits)).collect();
        let mut num = Ext::zero(self.bits);
        for i in 0..m {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                if x[j] != 0.0 {
                    num = num + &xs[i] * &xs[j] * self.entry(i, j);
                }
            }
        }
        let den: f64 = (0..m).map(|i| x[i] * x[i] * self.k[i]).sum();
        num.to_f64() / den
    }

    /// `H = K^{-1/2} G K^{-1/2}` in extended precision.
    fn reduced(&self) -> Vec<Ext> {
        let n = self.n;
        let s: Vec<Ext> = self.k.iter().map(|&k| Ext::from_f64(k, self.bits).sqrt()).collect();
        (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                self.g[idx].clone() / (&s[i] * &s[j])
            })
            .collect()
    }

    /// Lower Cholesky factor of `H`, or `None` when a pivot is not positive.
    fn cholesky(&self, h: &[Ext]) -> Option<Vec<Ext>> {
        let n = self.n;
        let mut l = vec![Ext::zero(self.bits); n * n];
        for j in 0..n {
            let mut d = h[j * n + j].clone();
            for k in 0..j {
                d = d - &l[j * n + k] * &l[j * n + k];
            }
            if d.is_negative() || d.is_zero() {
                return None;
            }
            let djj = d.sqrt();
            let col: Vec<(usize, Ext)> = ((j + 1)..n)
                .into_par_iter()
                .map(|i| {
                    let mut s = h[i * n + j].clone();
                    for k in 0..j {
                        s = s - &l[i * n + k] * &l[j * n + k];
                    }
                    (i, s / &djj)
                })
                .collect();
            for (i, v) in col {
                l[i * n + j] = v;
            }
            l[j * n + j] = djj;
        }
        Some(l)
    }

    /// Smallest generalized eigenvalue of `(G_N, K_N)` for every leading size `N = 1..=n`.
    pub fn min_generalized_eigenvalues(&self) -> Result<Vec<MinEigen>> {
        let n = self.n;
        let h = self.reduced();
        let l = self
            .cholesky(&h)
            .ok_or_else(|| Error::Numerical(format!("Gramian is not positive definite at {} bits", self.bits)))?;
        // Z = L^{-1}, lower triangular, column by column
        let cols: Vec<Vec<Ext>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut z = vec![Ext::zero(self.bits); n];
                z[j] = Ext::from_f64(1.0, self.bits) / &l[j * n + j];
                for i in (j + 1)..n {
                    let mut s = Ext::zero(self.bits);
                    for k in j..i {
                        s = s + &l[i * n + k] * &z[k];
                    }
                    z[i] = -(s / &l[i * n + i]);
                }
                z
            })
            .collect();
        // leading blocks of Z invert leading blocks of L, so
        // min eig(H_N) = 1 / sigma_max(Z_N)^2
        let split: Vec<Vec<(f64, i64)>> = cols
            .iter()
            .map(|c| c.iter().map(Ext::frexp).collect())
            .collect();
        (1..=n)
            .into_par_iter()
            .map(|m| {
                let emax = (0..m)
                    .flat_map(|j| (j..m).map(move |i| (i, j)))
                    .map(|(i, j)| split[j][i])
                    .filter(|x| x.0 != 0.0)
                    .map(|x| x.1)
                    .max()
                    .unwrap_or(0);
                let zm = DMatrix::from_fn(m, m, |i, j| {
                    if i < j {
                        0.0
                    } else {
                        let (mant, e) = split[j][i];
                        ldexp(mant, e - emax)
                    }
                });
                let smax = zm.singular_values().max();
                if !(smax > 0.0) {
                    return Err(Error::Numerical(format!("degenerate inverse factor at N = {m}")));
                }
                let log10 = -2.0 * (smax.log10() + emax as f64 * std::f64::consts::LOG10_2);
                Ok(MinEigen {
                    n: m,
                    value: 10f64.powf(log10),
                    log10,
                })
            })
            .collect()
    }

    pub fn psd_check(&self) -> PsdCheck {
        let n = self.n;
        let g = self.to_f64();
        let symmetric = (0..n).all(|i| (0..i).all(|j| g[(i, j)] == g[(j, i)]));
        let extended_cholesky = self.cholesky(&self.reduced()).is_some();
        let d: Vec<f64> = (0..n).map(|i| g[(i, i)].sqrt()).collect();
        let mut c = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (d[i] * d[j]));
        for i in 0..n {
            c[(i, i)] += 1e-14;
        }
        PsdCheck {
            symmetric,
            extended_cholesky,
            shifted_cholesky: c.cholesky().is_some(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantScanRow {
    pub n: usize,
    pub min_generalized_eigenvalue: f64,
    pub log10_min_generalized_eigenvalue: f64,
}

/// Smallest generalized eigenvalue for every `N` in the inclusive range.
pub fn observability_constant_scan(
    n_min: usize,
    n_max: usize,
    table: &ModeTable,
    params: &MemoryParams,
    opts: &GramianOptions,
) -> Result<Vec<ConstantScanRow>> {
    if n_min == 0 || n_min > n_max {
        return Err(Error::Domain(format!("invalid Gramian range [{n_min}, {n_max}]")));
    }
    let sys = observability_gramian(n_max, table, params, opts)?;
    Ok(sys
        .min_generalized_eigenvalues()?
        .into_iter()
        .filter(|e| e.n >= n_min)
        .map(|e| ConstantScanRow {
            n: e.n,
            min_generalized_eigenvalue: e.value,
            log10_min_generalized_eigenvalue: e.log10,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn control_interpolation_and_validation() {
        let v = ControlSignal::new(0.5, vec![vec![0.0, 1.0, 3.0]]).unwrap();
        assert_relative_eq!(v.eval(0, 0.25), 0.5);
        assert_relative_eq!(v.eval(0, 0.75), 2.0);
        assert_relative_eq!(v.eval(0, 5.0), 3.0);
        assert!(ControlSignal::new(0.5, vec![vec![0.0]]).is_err());
        assert!(ControlSignal::new(0.5, vec![vec![0.0, f64::NAN]]).is_err());
    }

    #[test]
    fn large_step_is_rejected_with_suggestion() {
        let p = MemoryParams::default();
        let v = ControlSignal::zero(1, 10, p.horizon);
        match simulate_distributed(&[1.0], &v, &p, &[1000.0], 100) {
            Err(Error::Stability { suggested_steps, .. }) => assert_eq!(suggested_steps, 20_000),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_adjoint_gives_trivial_identity() {
        let p = MemoryParams::default();
        let v = ControlSignal::constant(1, 20, p.horizon, 0.3);
        let c = modal_duality_check(0.7, &v, 0.0, &p, 30.0, 2000).unwrap();
        assert_eq!(c.state_side, 0.0);
        assert_eq!(c.control_side, 0.0);
    }
}
