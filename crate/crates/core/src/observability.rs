//! Initial energy and boundary observation of packet-built adjoint states.
//!
//! For a packet `phi^M = sum_k alpha_k(t) phi_{8M+k}` the initial energy is the
//! orthogonal series `sum_k alpha_k(0)^2 ||phi_k||^2` and the boundary
//! observation is
//!
//! ```text
//! S int_0^T w(t) (sum_k gamma_k alpha_k(t))^2 dt,     w = e^{2 (a + b) (T - t)} or 1,
//! ```
//!
//! with `S` the boundary factor of the mode table. The integrand is a sum of
//! sixteen exponentials whose coefficients cancel to many orders, so the square
//! is expanded into exponential pairs and each pair is integrated in closed
//! form in extended precision. A graded Gauss–Legendre rule evaluated in
//! double-double serves as an independent check.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::memory_modes::MemoryParams;
use crate::packet::{packet, PacketSelection};
use crate::precision::Ext;
use crate::quadrature::{graded_breaks, GaussLegendre};
use crate::spectrum::ModeTable;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::packet::PACKET_BITS;

/// Exponential sum `sum c_i e^{p_i u}` in the backward time `u = T - t`.
pub type ExpTerms = Vec<(f64, f64)>;

/// `(e^{p T} - 1) / p` in extended precision given `e^{p T}`.
pub(crate) fn expm1_ratio(p: &Ext, e_pt: &Ext, horizon: f64) -> Ext {
    let bits = p.bits();
    let t = Ext::from_f64(horizon, bits);
    if p.is_zero() {
        return t;
    }
    let x = p * &t;
    // below this size the series is exact to working precision
    if x.log10_abs() < -(bits as f64) * 0.08 {
        let x2 = &x * &x;
        return &t * (Ext::from_f64(1.0, bits) + &x / 2.0 + &x2 / 6.0 + &x2 * &x / 24.0);
    }
    (e_pt - 1.0) / p
}

/// `int_0^T e^{w u} (sum_i c_i e^{p_i u})^2 du`, exactly up to the working precision.
pub fn pair_integral(terms: &[(f64, f64)], weight_rate: f64, horizon: f64, bits: usize) -> Ext {
    let ext: Vec<(Ext, Ext)> = terms
        .iter()
        .map(|&(c, p)| (Ext::from_f64(c, bits), Ext::from_f64(p, bits)))
        .collect();
    pair_integral_ext(&ext, weight_rate, horizon, bits)
}

/// [`pair_integral`] with coefficients and rates already in extended precision.
pub fn pair_integral_ext(terms: &[(Ext, Ext)], weight_rate: f64, horizon: f64, bits: usize) -> Ext {
    let n = terms.len();
    let t = Ext::from_f64(horizon, bits);
    let growth: Vec<Ext> = terms.iter().map(|(_, p)| (p * &t).exp()).collect();
    let w = Ext::from_f64(weight_rate, bits);
    let ew = (&w * &t).exp();
    let mut sum = Ext::zero(bits);
    for i in 0..n {
        for j in i..n {
            let p = &terms[i].1 + &terms[j].1 + &w;
            let e = &growth[i] * &growth[j] * &ew;
            let mut v = &terms[i].0 * &terms[j].0 * expm1_ratio(&p, &e, horizon);
            if i != j {
                v = v * 2.0;
            }
            sum = sum + v;
        }
    }
    sum
}

/// The same integral by graded composite Gauss–Legendre with the integrand in double-double.
pub fn pair_integral_quadrature(terms: &[(f64, f64)], weight_rate: f64, horizon: f64, order: usize, ratio: f64) -> f64 {
    let fastest = terms.iter().fold(1.0f64, |m, &(_, p)| m.max(p.abs()));
    let breaks = graded_breaks(0.0, horizon, 0.02 / fastest, ratio);
    let rule = GaussLegendre::new(order);
    let f = |u: f64| {
        let mut s = Dd::ZERO;
        for &(c, p) in terms {
            s = s + Dd::prod(p, u).exp().mul_f64(c);
        }
        (s * s).to_f64() * (weight_rate * u).exp()
    };
    rule.integrate_breaks(f, &breaks)
}

/// Boundary exponential terms `(gamma_k C_{i,k}, mu_{i,k})` of a packet, rounded to double.
pub fn boundary_terms(sel: &PacketSelection, params: &MemoryParams) -> Result<(ExpTerms, ExpTerms)> {
    let (fast, slow) = sel.ext(params, PACKET_BITS)?.boundary_terms();
    let round = |v: Vec<(Ext, Ext)>| v.iter().map(|(c, p)| (c.to_f64(), p.to_f64())).collect();
    Ok((round(fast), round(slow)))
}

/// `alpha_k(0)` for every packet mode.
pub fn initial_amplitudes(sel: &PacketSelection, params: &MemoryParams) -> Result<Vec<f64>> {
    Ok(sel.dynamics(params)?.iter().map(|d| d.alpha_at_zero()).collect())
}

/// `||phi^M(., 0)||^2` as the orthogonal series.
pub fn initial_norm_sq(sel: &PacketSelection, table: &ModeTable, params: &MemoryParams) -> Result<f64> {
    let amps = initial_amplitudes(sel, params)?;
    let mut s = 0.0;
    for (k, a0) in amps.iter().enumerate() {
        s += a0 * a0 * table.mode(sel.indices[k])?.norm_sq;
    }
    Ok(s)
}

/// Lower series `sum_k 2 pi R / lambda_k alpha_k(0)^2`.
pub fn initial_norm_lower_series(sel: &PacketSelection, table: &ModeTable, params: &MemoryParams) -> Result<f64> {
    let amps = initial_amplitudes(sel, params)?;
    let c = 2.0 * std::f64::consts::PI * table.radius;
    Ok(amps.iter().zip(&sel.lambdas).map(|(a0, l)| c / l * a0 * a0).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryObservation {
    pub weighted: f64,
    pub unweighted: f64,
    /// Split-bound term of the fast part, with the pointwise constant.
    pub a1: f64,
    /// Split-bound term of the slow part, with the pointwise constant.
    pub a2: f64,
}

pub fn boundary_observation(sel: &PacketSelection, table: &ModeTable, params: &MemoryParams) -> Result<BoundaryObservation> {
    let (fast, slow) = sel.ext(params, PACKET_BITS)?.boundary_terms();
    let all: Vec<(Ext, Ext)> = fast.iter().chain(&slow).cloned().collect();
    let t = params.horizon;
    let w = 2.0 * (params.a + params.b);
    let s = table.boundary_factor();
    let k = table.split_bound_constant();
    let out = BoundaryObservation {
        weighted: s * pair_integral_ext(&all, w, t, PACKET_BITS).to_f64(),
        unweighted: s * pair_integral_ext(&all, 0.0, t, PACKET_BITS).to_f64(),
        a1: k * pair_integral_ext(&fast, w, t, PACKET_BITS).to_f64(),
        a2: k * pair_integral_ext(&slow, w, t, PACKET_BITS).to_f64(),
    };
    if !(out.weighted >= 0.0 && out.unweighted >= 0.0) {
        return Err(Error::Numerical(format!(
            "negative boundary observation for M = {}: {:e} / {:e}",
            sel.m, out.weighted, out.unweighted
        )));
    }
    Ok(out)
}

/// Single weighting variant of [`boundary_observation`].
pub fn boundary_observation_norm(sel: &PacketSelection, table: &ModeTable, params: &MemoryParams, weighted: bool) -> Result<f64> {
    let (fast, slow) = sel.ext(params, PACKET_BITS)?.boundary_terms();
    let all: Vec<(Ext, Ext)> = fast.into_iter().chain(slow).collect();
    let w = if weighted { 2.0 * (params.a + params.b) } else { 0.0 };
    Ok(table.boundary_factor() * pair_integral_ext(&all, w, params.horizon, PACKET_BITS).to_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub m: usize,
    pub initial_norm_sq: f64,
    pub a1: f64,
    pub a2: f64,
    pub boundary_weighted: f64,
    pub boundary_unweighted: f64,
    /// `initial_norm_sq / boundary_unweighted`.
    pub quotient: f64,
}

pub fn observability_report(sel: &PacketSelection, table: &ModeTable, params: &MemoryParams) -> Result<ObservabilityReport> {
    let init = initial_norm_sq(sel, table, params)?;
    let b = boundary_observation(sel, table, params)?;
    Ok(ObservabilityReport {
        m: sel.m,
        initial_norm_sq: init,
        a1: b.a1,
        a2: b.a2,
        boundary_weighted: b.weighted,
        boundary_unweighted: b.unweighted,
        quotient: init / b.unweighted,
    })
}

/// Reports for every `M` in the inclusive range, ascending.
pub fn observability_scan(m_min: usize, m_max: usize, table: &ModeTable, params: &MemoryParams) -> Result<Vec<ObservabilityReport>> {
    (m_min..=m_max)
        .into_par_iter()
        .map(|m| observability_report(&packet(m, table, params)?, table, params))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln y)`, optionally restricted to `window`.
pub fn fit_power_law(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<SlopeFit> {
    let chosen: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, _)| window.is_none_or(|(lo, hi)| x >= lo && x <= hi))
        .collect();
    if chosen.len() < 4 {
        return Err(Error::TooFewPoints {
            need: 4,
            got: chosen.len(),
        });
    }
    for (i, &(x, y)) in chosen.iter().enumerate() {
        if !(y > 0.0) {
            return Err(Error::NonPositive { index: i, value: y });
        }
        if !(x > 0.0) {
            return Err(Error::NonPositive { index: i, value: x });
        }
    }
    let n = chosen.len() as f64;
    let lx: Vec<f64> = chosen.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = chosen.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        x_min: chosen.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        x_max: chosen.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        points: chosen.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContradictionRow {
    pub m: usize,
    pub k0: usize,
    pub pairing: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContradictionReport {
    pub rows: Vec<ContradictionRow>,
    pub pairing_fit: SlopeFit,
    pub bound_fit: SlopeFit,
    /// Smallest scanned `M` from which the pairing exceeds the bound for every later scanned `M`.
    pub crossover: Option<usize>,
    pub truncation: usize,
    pub v_norm: f64,
    /// `sum_{l <= L} l^{-3/2}`, the squared norm of the truncated initial datum.
    pub initial_datum_norm_sq: f64,
    /// `sum_{l > L} l^{-3/2}`.
    pub truncation_tail: f64,
}

/// `zeta(3/2)`.
const ZETA_THREE_HALVES: f64 = 2.612_375_348_685_488_3;

/// Tail `sum_{l > L} l^{-3/2}`.
pub fn three_halves_tail(l: usize) -> f64 {
    ZETA_THREE_HALVES - (1..=l).map(|k| (k as f64).powf(-1.5)).sum::<f64>()
}

pub fn contradiction_report(
    truncation: usize,
    m_min: usize,
    m_max: usize,
    v_norm: f64,
    table: &ModeTable,
    params: &MemoryParams,
) -> Result<ContradictionReport> {
    if truncation < m_max {
        return Err(Error::config(
            "L_truncation",
            format!("must be at least the largest packet index {m_max}, got {truncation}"),
        ));
    }
    if !(v_norm >= 0.0 && v_norm.is_finite()) {
        return Err(Error::config("v_norm", format!("must be finite and non-negative, got {v_norm}")));
    }
    let memory = 1.0 + params.b / params.a;
    let rows: Vec<ContradictionRow> = (m_min..=m_max)
        .into_par_iter()
        .map(|m| -> Result<ContradictionRow> {
            let sel = packet(m, table, params)?;
            let amps = initial_amplitudes(&sel, params)?;
            let mut best = (0usize, -1.0f64);
            for (k, a0) in amps.iter().enumerate() {
                let e = table.mode(sel.indices[k])?.norm_sq * a0 * a0;
                if e > best.1 {
                    best = (k, e);
                }
            }
            let pairing = (m as f64).powf(-0.75) * best.1.sqrt();
            let bnd = boundary_observation_norm(&sel, table, params, false)?;
            Ok(ContradictionRow {
                m,
                k0: best.0 + 1,
                pairing,
                bound: v_norm * memory * bnd.sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    let pts = |f: fn(&ContradictionRow) -> f64| rows.iter().map(|r| (r.m as f64, f(r))).collect::<Vec<_>>();
    let pairing_fit = fit_power_law(&pts(|r| r.pairing), None)?;
    let bound_fit = fit_power_law(&pts(|r| r.bound), None)?;
    let mut crossover = None;
    for r in rows.iter().rev() {
        if r.pairing > r.bound {
            crossover = Some(r.m);
        } else {
            break;
        }
    }
    let head: f64 = (1..=truncation).map(|k| (k as f64).powf(-1.5)).sum();
    Ok(ContradictionReport {
        rows,
        pairing_fit,
        bound_fit,
        crossover,
        truncation,
        v_norm,
        initial_datum_norm_sq: head,
        truncation_tail: three_halves_tail(truncation),
    })
}
