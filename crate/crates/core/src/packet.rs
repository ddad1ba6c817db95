//! Eight-mode packets and their constraint system.
//!
//! A packet of index `M` uses the modes `8M + 1 ..= 8M + 8`. Its coefficients
//! `beta` span the null space of seven homogeneous linear conditions: five
//! moment conditions `sum_k gamma_k nu_k^j C1_k = 0` (`j = 0..4`) and two
//! conditions cancelling the leading orders of the slow `C2` part.

use crate::error::{Error, Result};
use crate::memory_modes::{admissible_start, ext_dynamics, mode_dynamics_for, ExtDynamics, MemoryParams, ModeDynamics};
use crate::precision::Ext;
use crate::spectrum::ModeTable;
use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const PACKET_SIZE: usize = 8;
pub const CONSTRAINTS: usize = 7;

/// Working precision of the refined null vector and of the packet pair sums.
pub const PACKET_BITS: usize = 384;

pub type ConstraintMatrix = SMatrix<f64, CONSTRAINTS, PACKET_SIZE>;

/// First slow-part condition as a function of the eigenvalue.
pub fn slow_condition_first(lambda: f64, params: &MemoryParams) -> f64 {
    let (a, b) = (params.a, params.b);
    let l = lambda;
    let s = l + a;
    let ab = a + b;
    a / s - l * (l - a) * ab / s.powi(3) - 3.0 * l * l * (l - a) * ab * ab / s.powi(5)
}

/// Second slow-part condition as a function of the eigenvalue.
pub fn slow_condition_second(lambda: f64, params: &MemoryParams) -> f64 {
    let (a, b) = (params.a, params.b);
    let l = lambda;
    let s = l + a;
    let ab = a + b;
    l * l * ab * ab * a / s.powi(4) - l.powi(3) * (l - a) * ab.powi(3) / s.powi(6) - a * a * ab / (s * s)
        + l * (l - a) * a * ab * ab / s.powi(4)
}

fn slow_conditions_ext(lambda: f64, params: &MemoryParams, bits: usize) -> (Ext, Ext) {
    let l = Ext::from_f64(lambda, bits);
    let a = Ext::from_f64(params.a, bits);
    let ab = Ext::from_f64(params.a + params.b, bits);
    let s = &l + &a;
    let lma = &l - &a;
    let s2 = &s * &s;
    let s4 = &s2 * &s2;
    let s6 = &s4 * &s2;
    let ab2 = &ab * &ab;
    let l2 = &l * &l;
    let first = &a / &s - &l * &lma * &ab / (&s2 * &s) - &l2 * &lma * &ab2 * 3.0 / (&s4 * &s);
    let second = &l2 * &ab2 * &a / &s4 - &l2 * &l * &lma * &ab2 * &ab / &s6 - &a * &a * &ab / &s2
        + &l * &lma * &a * &ab2 / &s4;
    (first, second)
}

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub m: usize,
    pub indices: [usize; PACKET_SIZE],
    pub dynamics: [ModeDynamics; PACKET_SIZE],
    pub gammas: [f64; PACKET_SIZE],
    pub nodes: [f64; PACKET_SIZE],
    /// Rows scaled to unit infinity norm.
    pub matrix: ConstraintMatrix,
    pub row_scales: [f64; CONSTRAINTS],
}

/// Node offsets `nu_k = (a + 2b - lambda_k) + Lambda_0 + B_k`, evaluated as
/// `(mu+_k + Lambda_0) + (a + b)` so that they share rounding with the rates.
fn nodes_from_rates(dynamics: &[ModeDynamics; PACKET_SIZE], lambda0: f64, params: &MemoryParams) -> [f64; PACKET_SIZE] {
    std::array::from_fn(|k| (dynamics[k].mu_plus + lambda0) + (params.a + params.b))
}

/// Nodes evaluated literally from the eigenvalues and shifts.
pub fn nodes_direct(system: &ConstraintSystem, table: &ModeTable, params: &MemoryParams) -> [f64; PACKET_SIZE] {
    let lambda0 = table.reference_eigenvalue((PACKET_SIZE * system.m) as f64);
    std::array::from_fn(|k| {
        let d = &system.dynamics[k];
        (params.a + 2.0 * params.b - d.lambda) + lambda0 + d.shift
    })
}

/// Nodes from the expansion `a + 2b - pi^2/R^2 (16 M k + 2 delta k + k^2) + eps_k + B_k`.
pub fn nodes_expanded(system: &ConstraintSystem, table: &ModeTable, params: &MemoryParams) -> [f64; PACKET_SIZE] {
    let pi2 = (std::f64::consts::PI / table.radius).powi(2);
    let delta = table.reference_offset();
    let m = system.m as f64;
    std::array::from_fn(|i| {
        let k = (i + 1) as f64;
        let d = &system.dynamics[i];
        let eps = table.reference_eigenvalue(system.indices[i] as f64) - d.lambda;
        params.a + 2.0 * params.b - pi2 * (16.0 * m * k + 2.0 * delta * k + k * k) + eps + d.shift
    })
}

fn packet_indices(m: usize) -> [usize; PACKET_SIZE] {
    std::array::from_fn(|k| PACKET_SIZE * m + k + 1)
}

pub fn build_constraints(m: usize, table: &ModeTable, params: &MemoryParams) -> Result<ConstraintSystem> {
    let indices = packet_indices(m);
    table.mode(indices[PACKET_SIZE - 1])?;
    match admissible_start(table, params) {
        Some(n0) if n0 <= indices[0] => {}
        n0 => {
            return Err(Error::PacketBelowAdmissible {
                m,
                first: indices[0],
                n0: n0.unwrap_or(table.len() + 1),
            })
        }
    }
    let mut dyns = Vec::with_capacity(PACKET_SIZE);
    for &n in &indices {
        dyns.push(mode_dynamics_for(table, n, params, 1.0)?);
    }
    let dynamics: [ModeDynamics; PACKET_SIZE] = std::array::from_fn(|k| dyns[k]);
    let gammas: [f64; PACKET_SIZE] = std::array::from_fn(|k| table.modes[indices[k] - 1].gamma);
    let lambda0 = table.reference_eigenvalue((PACKET_SIZE * m) as f64);
    let nodes = nodes_from_rates(&dynamics, lambda0, params);

    let mut matrix = ConstraintMatrix::zeros();
    for k in 0..PACKET_SIZE {
        // dynamics were built with beta = 1, so c1 is the ratio C1 / beta
        let base = gammas[k] * dynamics[k].c1;
        let mut p = 1.0;
        for j in 0..5 {
            matrix[(j, k)] = base * p;
            p *= nodes[k];
        }
        matrix[(5, k)] = gammas[k] * slow_condition_first(dynamics[k].lambda, params);
        matrix[(6, k)] = gammas[k] * slow_condition_second(dynamics[k].lambda, params);
    }
    let mut row_scales = [1.0; CONSTRAINTS];
    for (j, scale) in row_scales.iter_mut().enumerate() {
        let mx = matrix.row(j).amax();
        if mx > 0.0 {
            *scale = mx;
            let mut row = matrix.row_mut(j);
            row /= mx;
        }
    }
    Ok(ConstraintSystem {
        m,
        indices,
        dynamics,
        gammas,
        nodes,
        matrix,
        row_scales,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PacketSelection {
    pub m: usize,
    pub indices: [usize; PACKET_SIZE],
    pub betas: [f64; PACKET_SIZE],
    pub c1s: [f64; PACKET_SIZE],
    pub c2s: [f64; PACKET_SIZE],
    pub nodes: [f64; PACKET_SIZE],
    pub gammas: [f64; PACKET_SIZE],
    pub lambdas: [f64; PACKET_SIZE],
    /// `||A beta||_2` of the scaled constraint matrix.
    pub residual: f64,
    /// `||A||_2` of the scaled constraint matrix.
    pub matrix_norm: f64,
    /// Singular values of the scaled 7x8 matrix, descending.
    pub singular_values: [f64; CONSTRAINTS],
}

impl PacketSelection {
    /// Extended-precision coefficients and rates of this packet.
    pub fn ext(&self, params: &MemoryParams, bits: usize) -> Result<ExtPacket> {
        ext_packet(&self.lambdas, &self.gammas, &self.betas, params, bits)
    }

    /// Per-mode dynamics with the selected coefficients.
    pub fn dynamics(&self, params: &MemoryParams) -> Result<Vec<ModeDynamics>> {
        self.lambdas
            .iter()
            .zip(&self.betas)
            .map(|(&l, &b)| crate::memory_modes::mode_dynamics(l, params, b))
            .collect()
    }
}

/// Packet coefficients and rates in extended precision.
#[derive(Clone, Debug)]
pub struct ExtPacket {
    /// Unit Euclidean norm, same sign convention as the double-precision vector.
    pub betas: Vec<Ext>,
    /// Per-mode rates and ratios with `beta = 1`.
    pub dynamics: Vec<ExtDynamics>,
    pub gammas: [f64; PACKET_SIZE],
}

impl ExtPacket {
    /// `(gamma_k beta_k C_{1,k}, mu+_k)` and `(gamma_k beta_k C_{2,k}, mu-_k)`.
    pub fn boundary_terms(&self) -> (Vec<(Ext, Ext)>, Vec<(Ext, Ext)>) {
        let fast = (0..PACKET_SIZE)
            .map(|k| (&self.betas[k] * &self.dynamics[k].c1 * self.gammas[k], self.dynamics[k].mu_plus.clone()))
            .collect();
        let slow = (0..PACKET_SIZE)
            .map(|k| (&self.betas[k] * &self.dynamics[k].c2 * self.gammas[k], self.dynamics[k].mu_minus.clone()))
            .collect();
        (fast, slow)
    }
}

fn ext_abs(x: &Ext) -> f64 {
    x.to_f64().abs()
}

/// Null vector of the constraint system rebuilt at `bits` from the same
/// eigenvalues. The component that is largest in `reference` is fixed to one
/// and the remaining 7x7 system is solved by Gaussian elimination with partial
/// pivoting. Nodes are taken relative to the first rate; a common shift leaves
/// the null space of the moment rows unchanged.
pub fn ext_packet(
    lambdas: &[f64; PACKET_SIZE],
    gammas: &[f64; PACKET_SIZE],
    reference: &[f64; PACKET_SIZE],
    params: &MemoryParams,
    bits: usize,
) -> Result<ExtPacket> {
    let dynamics: Vec<ExtDynamics> = lambdas.iter().map(|&l| ext_dynamics(l, params, bits)).collect();
    let mut rows: Vec<Vec<Ext>> = Vec::with_capacity(CONSTRAINTS);
    let nodes: Vec<Ext> = dynamics.iter().map(|d| &d.mu_plus - &dynamics[0].mu_plus).collect();
    let mut powers: Vec<Ext> = dynamics.iter().zip(gammas).map(|(d, &g)| &d.c1 * g).collect();
    for _ in 0..5 {
        rows.push(powers.clone());
        powers = powers.iter().zip(&nodes).map(|(p, n)| p * n).collect();
    }
    let slow: Vec<(Ext, Ext)> = lambdas.iter().map(|&l| slow_conditions_ext(l, params, bits)).collect();
    rows.push(slow.iter().zip(gammas).map(|(s, &g)| &s.0 * g).collect());
    rows.push(slow.iter().zip(gammas).map(|(s, &g)| &s.1 * g).collect());
    for row in rows.iter_mut() {
        let mx = row.iter().map(ext_abs).fold(0.0, f64::max);
        if mx > 0.0 {
            for x in row.iter_mut() {
                *x = &*x / mx;
            }
        }
    }
    let pivot_col = (0..PACKET_SIZE)
        .max_by(|&i, &j| reference[i].abs().partial_cmp(&reference[j].abs()).unwrap())
        .unwrap_or(0);
    let cols: Vec<usize> = (0..PACKET_SIZE).filter(|&k| k != pivot_col).collect();
    // augmented 7x8: [A_free | -A_pivot]
    let mut aug: Vec<Vec<Ext>> = rows
        .iter()
        .map(|r| cols.iter().map(|&k| r[k].clone()).chain(std::iter::once(-&r[pivot_col])).collect())
        .collect();
    let n = CONSTRAINTS;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| ext_abs(&aug[i][c]).partial_cmp(&ext_abs(&aug[j][c])).unwrap())
            .unwrap_or(c);
        if aug[p][c].is_zero() {
            return Err(Error::Numerical("singular reduced constraint system".into()));
        }
        aug.swap(c, p);
        for r in (c + 1)..n {
            let f = &aug[r][c] / &aug[c][c];
            for k in c..=n {
                let v = &aug[r][k] - &f * &aug[c][k];
                aug[r][k] = v;
            }
        }
    }
    let mut x = vec![Ext::zero(bits); n];
    for c in (0..n).rev() {
        let mut s = aug[c][n].clone();
        for k in (c + 1)..n {
            s = s - &aug[c][k] * &x[k];
        }
        x[c] = s / &aug[c][c];
    }
    let mut betas = vec![Ext::zero(bits); PACKET_SIZE];
    betas[pivot_col] = Ext::from_f64(1.0, bits);
    for (i, &k) in cols.iter().enumerate() {
        betas[k] = x[i].clone();
    }
    let norm = betas.iter().fold(Ext::zero(bits), |acc, b| acc + b * b).sqrt();
    let mut betas: Vec<Ext> = betas.iter().map(|b| b / &norm).collect();
    let cutoff = 1e-14 * betas.iter().map(ext_abs).fold(0.0, f64::max);
    if let Some(first) = betas.iter().find(|b| ext_abs(b) > cutoff) {
        if first.is_negative() {
            betas = betas.iter().map(|b| -b).collect();
        }
    }
    Ok(ExtPacket {
        betas,
        dynamics,
        gammas: *gammas,
    })
}

pub fn select_packet(system: &ConstraintSystem) -> Result<PacketSelection> {
    let mut square = SMatrix::<f64, PACKET_SIZE, PACKET_SIZE>::zeros();
    square.fixed_view_mut::<CONSTRAINTS, PACKET_SIZE>(0, 0).copy_from(&system.matrix);
    let svd = square.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("singular value decomposition failed".into()))?;
    let sv = svd.singular_values;
    let (imin, smallest) = sv.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (i, s)| {
        if s < acc.1 {
            (i, s)
        } else {
            acc
        }
    });
    let largest = sv.max();
    if smallest > 1e-8 * largest {
        return Err(Error::FullRank { smallest, largest });
    }
    let mut beta: SVector<f64, PACKET_SIZE> = v_t.row(imin).transpose();
    beta /= beta.norm();
    let cutoff = 1e-14 * beta.amax();
    if let Some(first) = beta.iter().find(|x| x.abs() > cutoff) {
        if *first < 0.0 {
            beta = -beta;
        }
    }
    let thin = system.matrix.svd(false, false);
    let mut singular: Vec<f64> = thin.singular_values.iter().copied().collect();
    singular.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lambdas: [f64; PACKET_SIZE] = std::array::from_fn(|k| system.dynamics[k].lambda);
    let reference: [f64; PACKET_SIZE] = std::array::from_fn(|k| beta[k]);
    let params = system.dynamics[0].params;
    let refined = ext_packet(&lambdas, &system.gammas, &reference, &params, PACKET_BITS)?;
    let betas: [f64; PACKET_SIZE] = std::array::from_fn(|k| refined.betas[k].to_f64());
    let residual = (system.matrix * SVector::<f64, PACKET_SIZE>::from(betas)).norm();
    Ok(PacketSelection {
        m: system.m,
        indices: system.indices,
        betas,
        c1s: std::array::from_fn(|k| betas[k] * system.dynamics[k].c1),
        c2s: std::array::from_fn(|k| betas[k] * system.dynamics[k].c2),
        nodes: system.nodes,
        gammas: system.gammas,
        lambdas,
        residual,
        matrix_norm: singular[0],
        singular_values: std::array::from_fn(|k| singular[k]),
    })
}

pub fn packet(m: usize, table: &ModeTable, params: &MemoryParams) -> Result<PacketSelection> {
    select_packet(&build_constraints(m, table, params)?)
}

/// Relative residuals of the seven conditions at the selected coefficients:
/// `|sum_k t_k| / sum_k |t_k|` for the unscaled terms `t_k` of each row.
pub fn constraint_residuals(sel: &PacketSelection, params: &MemoryParams) -> [f64; CONSTRAINTS] {
    let rel = |terms: &[f64]| {
        let s: f64 = terms.iter().sum();
        let a: f64 = terms.iter().map(|t| t.abs()).sum();
        if a == 0.0 {
            0.0
        } else {
            s.abs() / a
        }
    };
    std::array::from_fn(|j| {
        let terms: Vec<f64> = (0..PACKET_SIZE)
            .map(|k| match j {
                0..=4 => sel.gammas[k] * sel.c1s[k] * sel.nodes[k].powi(j as i32),
                5 => sel.gammas[k] * slow_condition_first(sel.lambdas[k], params) * sel.betas[k],
                _ => sel.gammas[k] * slow_condition_second(sel.lambdas[k], params) * sel.betas[k],
            })
            .collect();
        rel(&terms)
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PacketScanRow {
    pub m: usize,
    pub c1_inf_norm: f64,
    pub residual: f64,
    pub sigma_smallest: f64,
    pub sigma_second_smallest: f64,
}

/// Packets for every `M` in the inclusive range, in ascending order.
pub fn packet_range(m_min: usize, m_max: usize, table: &ModeTable, params: &MemoryParams) -> Result<Vec<PacketSelection>> {
    (m_min..=m_max)
        .into_par_iter()
        .map(|m| packet(m, table, params))
        .collect()
}

pub fn packet_boundedness_scan(
    m_min: usize,
    m_max: usize,
    table: &ModeTable,
    params: &MemoryParams,
) -> Result<Vec<PacketScanRow>> {
    Ok(packet_range(m_min, m_max, table, params)?
        .into_iter()
        .map(|p| PacketScanRow {
            m: p.m,
            c1_inf_norm: p.c1s.iter().fold(0.0, |a: f64, c| a.max(c.abs())),
            residual: p.residual,
            sigma_smallest: p.singular_values[CONSTRAINTS - 1],
            sigma_second_smallest: p.singular_values[CONSTRAINTS - 2],
        })
        .collect())
}
