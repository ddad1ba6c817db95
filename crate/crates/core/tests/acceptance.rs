//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::process::Command;
use stokes_memory::eigen2d::compute_modes_2d;
use stokes_memory::eigen3d::{compute_modes_3d, mode_norm_sq_3d, mode_table_3d, norm_bound_threshold, NormMethod};
use stokes_memory::memory_modes::*;
use stokes_memory::observability::{contradiction_report, observability_scan};
use stokes_memory::packet::{constraint_residuals, packet_boundedness_scan, packet_range, PACKET_SIZE};
use stokes_memory::report::{scan_slopes, verdicts, violated_constant_growth};
use stokes_memory::simulate::*;
use stokes_memory::spectrum::{Geometry, ModeTable};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn unit() -> Geometry {
    Geometry::new(1.0).unwrap()
}

fn eigen_layer() -> Outcome {
    let g = unit();
    let modes = compute_modes_3d(&g, 500).map_err(|e| e.to_string())?;
    for m in &modes {
        let n = m.n as f64;
        check(m.root > n * PI && m.root < (n + 0.5) * PI, || format!("x_{} = {} outside its interval", m.n, m.root))?;
        check(m.eps_n > 0.0, || format!("eps_{} = {}", m.n, m.eps_n))?;
    }
    for w in modes.windows(2) {
        check(w[1].eps_n < w[0].eps_n, || format!("eps increases at n = {}", w[1].n))?;
    }
    let mut worst = 0.0f64;
    for m in &modes {
        let q = mode_norm_sq_3d(m, &g, NormMethod::Quadrature).map_err(|e| e.to_string())?;
        worst = worst.max((q - m.norm_sq).abs() / m.norm_sq);
    }
    check(worst <= 1e-8, || format!("norm quadrature mismatch {worst:e}"))?;
    let n1 = norm_bound_threshold(&modes).ok_or("no norm threshold")?;
    for m in &modes[n1 - 1..] {
        check(m.norm_sq >= 2.0 * PI / m.lambda, || format!("norm bound fails at n = {}", m.n))?;
    }
    let plane = compute_modes_2d(&g, 200).map_err(|e| e.to_string())?;
    for m in &plane {
        let n = m.n as f64;
        check((n + 0.125) * PI <= m.j1n && m.j1n <= (n + 0.25) * PI, || format!("j_1,{} = {}", m.n, m.j1n))?;
    }
    Ok(format!("norm mismatch {worst:.1e}, threshold n1 = {n1}"))
}

fn mode_dynamics_layer(table: &ModeTable) -> Outcome {
    let p = MemoryParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=table.len());
        let beta: f64 = rng.gen_range(-3.0..3.0);
        let t = rng.gen_range(0.0..p.horizon);
        let d = mode_dynamics_for(table, n, &p, beta).map_err(|e| e.to_string())?;
        let r = d.integro_residual(t).abs() / (d.lambda * beta.abs());
        worst = worst.max(r);
    }
    check(worst <= 1e-9, || format!("integro residual {worst:e}"))?;
    for lambda in [table.modes[0].lambda, 150.0, 1000.0, 1e4] {
        let d = mode_dynamics(lambda, &p, 0.8).map_err(|e| e.to_string())?;
        let steps = ((lambda * p.horizon / ORACLE_STEP_LIMIT).ceil() as usize).max(2000);
        let o = alpha_oracle(lambda, &p, 0.8, steps).map_err(|e| e.to_string())?;
        let peak = o.alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        for (t, a) in o.times.iter().zip(&o.alpha) {
            check((d.alpha(*t) - a).abs() <= 1e-6 * peak, || format!("oracle mismatch at lambda = {lambda}, t = {t}"))?;
        }
    }
    for n in [1, 100, table.len()] {
        let d = mode_dynamics_for(table, n, &p, -1.7).map_err(|e| e.to_string())?;
        let (a, da) = d.alpha_eval(p.horizon);
        check((a + 1.7).abs() <= 1e-12 * 1.7, || format!("alpha(T) = {a} at n = {n}"))?;
        check((da + 1.7 * d.lambda).abs() <= 1e-12 * 1.7 * d.lambda, || format!("alpha'(T) = {da} at n = {n}"))?;
    }
    let last = mode_dynamics_for(table, table.len(), &p, 1.0).map_err(|e| e.to_string())?;
    let gap = (last.mu_minus + p.a + p.b).abs();
    check(gap < 1e-3, || format!("slow rate gap {gap:e}"))?;
    Ok(format!("integro residual {worst:.1e}, slow rate gap {gap:.1e}"))
}

fn packet_layer(table: &ModeTable) -> Outcome {
    let p = MemoryParams::default();
    let sels = packet_range(24, 56, table, &p).map_err(|e| e.to_string())?;
    let mut worst_res = 0.0f64;
    let mut worst_row = 0.0f64;
    for s in &sels {
        worst_res = worst_res.max(s.residual);
        for r in constraint_residuals(s, &p) {
            worst_row = worst_row.max(r);
        }
        let d = s.dynamics(&p).map_err(|e| e.to_string())?;
        for j in 0..5 {
            let terms: Vec<f64> = (0..PACKET_SIZE).map(|k| s.gammas[k] * d[k].c1 * d[k].mu_plus.powi(j)).collect();
            let big = terms.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let sum: f64 = terms.iter().sum();
            check(sum.abs() <= 1e-8 * big, || format!("moment {j} at M = {}: {:e}", s.m, sum / big))?;
        }
    }
    check(worst_res <= 1e-9, || format!("packet residual {worst_res:e}"))?;
    check(worst_row <= 1e-8, || format!("constraint row residual {worst_row:e}"))?;
    let rows = packet_boundedness_scan(24, 56, table, &p).map_err(|e| e.to_string())?;
    let mut c: Vec<f64> = rows.iter().map(|r| r.c1_inf_norm).collect();
    let sup = c.iter().cloned().fold(0.0, f64::max);
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = c[c.len() / 2];
    check(sup <= 2.0 * median, || format!("sup {sup} > 2 x median {median}"))?;
    Ok(format!("residual {worst_res:.1e}, rows {worst_row:.1e}, sup/median {:.3}", sup / median))
}

fn scaling(table: &ModeTable) -> Outcome {
    let p = MemoryParams::default();
    let reports = observability_scan(24, 56, table, &p).map_err(|e| e.to_string())?;
    let slopes = scan_slopes(&reports).map_err(|e| e.to_string())?;
    let v = verdicts(&reports, &slopes, None);
    check(v.initial_norm_slope, || format!("initial slope {}", slopes.initial_norm_sq.slope))?;
    check(v.boundary_weighted_slope, || format!("boundary slope {}", slopes.boundary_weighted.slope))?;
    check(v.quotient_slope, || format!("quotient slope {}", slopes.quotient.slope))?;
    check(v.quotient_increasing, || "quotient not increasing".into())?;
    let growth = violated_constant_growth(&reports);
    let (first, last) = (growth[0], growth[growth.len() - 1]);
    Ok(format!(
        "slopes initial {:.4}, boundary {:.4}, quotient {:.4}; violated constant {:.3e} (M = {}) -> {:.3e} (M = {})",
        slopes.initial_norm_sq.slope, slopes.boundary_weighted.slope, slopes.quotient.slope, first.1, first.0, last.1, last.0
    ))
}

fn contradiction(table: &ModeTable) -> Outcome {
    let c = contradiction_report(512, 24, 56, 1.0, table, &MemoryParams::default()).map_err(|e| e.to_string())?;
    check((-4.1..=-3.5).contains(&c.pairing_fit.slope), || format!("pairing slope {}", c.pairing_fit.slope))?;
    check(c.bound_fit.slope <= -4.6, || format!("bound slope {}", c.bound_fit.slope))?;
    let m = c.crossover.ok_or("no crossover")?;
    Ok(format!(
        "pairing slope {:.4}, bound slope {:.4}, crossover M* = {m}",
        c.pairing_fit.slope, c.bound_fit.slope
    ))
}

fn duality(table: &ModeTable) -> Outcome {
    let p = MemoryParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let lambda = table.modes[n - 1].lambda;
        let y0 = rng.gen_range(-2.0..2.0);
        let beta = rng.gen_range(-2.0..2.0);
        let intervals = 50;
        let vals = (0..=intervals).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = ControlSignal::new(p.horizon / intervals as f64, vec![vals]).map_err(|e| e.to_string())?;
        let steps = intervals * ((lambda * p.horizon / 0.01 / intervals as f64).ceil() as usize);
        let c = modal_duality_check(y0, &v, beta, &p, lambda, steps).map_err(|e| e.to_string())?;
        worst = worst.max(c.relative());
    }
    check(worst <= 1e-7, || format!("duality residual {worst:e}"))?;
    let lambda = table.modes[0].lambda;
    let intervals = 404;
    let dt = p.horizon / intervals as f64;
    let v = ControlSignal::new(dt, vec![(0..=intervals).map(|i| (3.0 * i as f64 * dt).sin()).collect()])
        .map_err(|e| e.to_string())?;
    let mut r = Vec::new();
    for s in [404, 808, 1616] {
        r.push(modal_duality_check(0.4, &v, 1.0, &p, lambda, s).map_err(|e| e.to_string())?.residual);
    }
    for w in r.windows(2) {
        check(w[0] >= 8.0 * w[1] || w[1] < 1e-12, || format!("residuals {r:?}"))?;
    }
    Ok(format!("worst {worst:.1e}, halving ratios {:.1}, {:.1}", r[0] / r[1], r[1] / r[2]))
}

fn gramian(table: &ModeTable) -> Outcome {
    let p = MemoryParams::default();
    let sys = observability_gramian(160, table, &p, &GramianOptions::default()).map_err(|e| e.to_string())?;
    let eig = sys.min_generalized_eigenvalues().map_err(|e| e.to_string())?;
    let scan: Vec<_> = eig.iter().filter(|e| e.n >= 8).collect();
    for w in scan.windows(2) {
        check(w[1].value <= w[0].value, || format!("increase at N = {}", w[1].n))?;
    }
    let reports = observability_scan(1, 19, table, &p).map_err(|e| e.to_string())?;
    for r in &reports {
        let n = 8 * r.m + 8;
        check(eig[n - 1].value <= 1.0 / r.quotient, || format!("infeasible at M = {}", r.m))?;
    }
    let psd = sys.psd_check();
    check(psd.symmetric && psd.extended_cholesky && psd.shifted_cholesky, || format!("{psd:?}"))?;
    let cross = eig.iter().find(|e| e.value < 1e-100).map_or(0, |e| e.n);
    Ok(format!("min eig at N = 160: {:.3e}, below 1e-100 from N = {cross}", eig[159].value))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_stokes-memory");
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        let st = Command::new(bin)
            .args(["--output-dir", d.path().to_str().unwrap(), "report"])
            .env_remove("STOKES_MEMORY_OUTPUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        check(st.status.success(), || String::from_utf8_lossy(&st.stderr).into_owned())?;
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    check(!names.is_empty(), || "no CSV written".into())?;
    for n in &names {
        let a = std::fs::read(dirs[0].path().join(n)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(n)).map_err(|e| e.to_string())?;
        check(a == b, || format!("{} differs", n.to_string_lossy()))?;
    }
    Ok(format!("{} CSV files identical", names.len()))
}

fn main() {
    let table = mode_table_3d(&unit(), 456).expect("mode table");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 eigen layer", Box::new(eigen_layer)),
        ("2 mode dynamics", Box::new(|| mode_dynamics_layer(&table))),
        ("3 packet selection", Box::new(|| packet_layer(&table))),
        ("4 scaling", Box::new(|| scaling(&table))),
        ("5 contradiction", Box::new(|| contradiction(&table))),
        ("6 duality", Box::new(|| duality(&table))),
        ("7 gramian", Box::new(|| gramian(&table))),
        ("8 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        match f() {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
