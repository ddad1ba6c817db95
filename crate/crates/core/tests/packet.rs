use approx::assert_relative_eq;
use stokes_memory::eigen3d::mode_table_3d;
use stokes_memory::memory_modes::MemoryParams;
use stokes_memory::packet::*;
use stokes_memory::spectrum::{Geometry, ModeTable};
use stokes_memory::Error;

fn table(n: usize) -> ModeTable {
    mode_table_3d(&Geometry::new(1.0).unwrap(), n).unwrap()
}

#[test]
fn residual_small_over_wide_range() {
    let t = table(8 * 80 + 8);
    let p = MemoryParams::default();
    let sels = packet_range(10, 80, &t, &p).unwrap();
    assert_eq!(sels.len(), 71);
    for (s, m) in sels.iter().zip(10..) {
        assert_eq!(s.m, m);
        assert!(s.residual <= 1e-9, "M = {m}: {:e}", s.residual);
        let norm: f64 = s.betas.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-15);
    }
}

#[test]
fn coefficients_stay_bounded_over_the_scan() {
    let t = table(456);
    let rows = packet_boundedness_scan(24, 56, &t, &MemoryParams::default()).unwrap();
    let mut c: Vec<f64> = rows.iter().map(|r| r.c1_inf_norm).collect();
    let sup = c.iter().cloned().fold(0.0, f64::max);
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = c[c.len() / 2];
    assert!(sup <= 2.0 * median);
    for r in &rows {
        assert!(r.residual <= 1e-9);
        assert!(r.sigma_second_smallest > r.sigma_smallest);
    }
}

#[test]
fn empty_range_gives_empty_scan() {
    let t = table(456);
    assert!(packet_boundedness_scan(30, 29, &t, &MemoryParams::default()).unwrap().is_empty());
}

#[test]
fn all_seven_conditions_vanish() {
    let t = table(456);
    let p = MemoryParams::default();
    for m in [24, 37, 56] {
        let s = packet(m, &t, &p).unwrap();
        for (j, r) in constraint_residuals(&s, &p).iter().enumerate() {
            assert!(*r <= 1e-8, "M = {m}, row {j}: {r:e}");
        }
    }
}

#[test]
fn terminal_derivatives_of_fast_part_vanish() {
    // f(t) = sum gamma C1 e^{mu+ (T - t)}: f^(j)(T) = (-1)^j sum gamma C1 mu+^j
    let t = table(456);
    let p = MemoryParams::default();
    let s = packet(40, &t, &p).unwrap();
    let d = s.dynamics(&p).unwrap();
    for j in 0..5 {
        let terms: Vec<f64> = (0..PACKET_SIZE).map(|k| s.gammas[k] * d[k].c1 * d[k].mu_plus.powi(j)).collect();
        let scale = (0..PACKET_SIZE)
            .map(|k| (s.gammas[k] * s.c1s[k] * s.nodes[k].powi(j)).abs())
            .fold(0.0, f64::max);
        let big = terms.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let sum: f64 = terms.iter().sum();
        assert!(sum.abs() <= 1e-8 * big.max(scale), "j = {j}: {sum:e} vs {big:e}");
    }
}

#[test]
fn nodes_agree_three_ways() {
    let t = table(456);
    let p = MemoryParams::default();
    for m in [24, 56] {
        let sys = build_constraints(m, &t, &p).unwrap();
        let direct = nodes_direct(&sys, &t, &p);
        let expanded = nodes_expanded(&sys, &t, &p);
        for k in 0..PACKET_SIZE {
            let scale = sys.nodes[k].abs().max(1.0);
            assert!((direct[k] - sys.nodes[k]).abs() <= 1e-9 * scale);
            assert!((expanded[k] - sys.nodes[k]).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn selection_is_deterministic() {
    let t = table(456);
    let p = MemoryParams::default();
    let a = packet(33, &t, &p).unwrap();
    let b = packet(33, &t, &p).unwrap();
    assert_eq!(a.betas.map(f64::to_bits), b.betas.map(f64::to_bits));
    assert_eq!(a.c1s.map(f64::to_bits), b.c1s.map(f64::to_bits));
}

#[test]
fn reference_coefficients_at_m24() {
    // mpmath at 60 digits, exact eigenvalues
    let want = [0.01676, 0.118, 0.3557, 0.5959, 0.599, 0.3612, 0.121, 0.01737];
    let s = packet(24, &table(456), &MemoryParams::default()).unwrap();
    for (b, w) in s.betas.iter().zip(want) {
        assert_relative_eq!(*b, w, max_relative = 2e-3);
    }
    // singular values of the scaled system, smallest two
    assert_relative_eq!(s.singular_values[5], 3.0e-8, max_relative = 0.05);
    assert_relative_eq!(s.singular_values[6], 1.19e-11, max_relative = 0.05);
}

#[test]
fn extended_refinement_is_consistent() {
    let p = MemoryParams::default();
    let s = packet(45, &table(456), &p).unwrap();
    let e = s.ext(&p, PACKET_BITS).unwrap();
    for k in 0..PACKET_SIZE {
        assert_eq!(e.betas[k].to_f64(), s.betas[k]);
    }
    let e2 = s.ext(&p, 2 * PACKET_BITS).unwrap();
    for k in 0..PACKET_SIZE {
        assert_relative_eq!(e2.betas[k].to_f64(), s.betas[k], max_relative = 1e-15);
    }
}

#[test]
fn packet_below_admissible_index_is_rejected() {
    let t = table(200);
    let p = MemoryParams::new(1.0, 400.0, 2.0).unwrap();
    match packet(1, &t, &p) {
        Err(Error::PacketBelowAdmissible { n0, first, .. }) => {
            assert_eq!(first, 9);
            assert!(n0 > 9);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(packet(2, &t, &p).is_ok());
}

#[test]
fn packet_beyond_table_is_rejected() {
    match packet(60, &table(456), &MemoryParams::default()) {
        Err(Error::ModeOutOfRange { index, len }) => {
            assert_eq!(index, 488);
            assert_eq!(len, 456);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn slow_conditions_expand_in_inverse_eigenvalue() {
    // first ~ (a - (a + b)) / lambda,
    // second ~ (2 a (a + b)^2 - (a + b)^3 - a^2 (a + b)) / lambda^2
    let p = MemoryParams::new(1.0, 1.0, 2.0).unwrap();
    let l = 1e8;
    let first = slow_condition_first(l, &p);
    assert_relative_eq!(first * l, 1.0 - 2.0, max_relative = 1e-6);
    let second = slow_condition_second(l, &p);
    assert_relative_eq!(second * l * l, 8.0 - 8.0 - 2.0, max_relative = 1e-6);
}
