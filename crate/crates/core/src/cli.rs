//! Command-line front end.
//!
//! Settings come from defaults, then an optional TOML file (`--config`), then the
//! `STOKES_MEMORY_OUTPUT_DIR` environment variable for the output directory, then flags.

use crate::eigen2d::compute_modes_2d;
use crate::eigen3d::{compute_modes_3d, norm_bound_threshold};
use crate::error::{Error, Result};
use crate::memory_modes::{admissible_start, mode_dynamics_for, MemoryParams};
use crate::observability::{contradiction_report, observability_report, observability_scan, ContradictionReport, ObservabilityReport};
use crate::packet::{packet, packet_boundedness_scan, packet_range};
use crate::report::{self, Csv, THRESHOLDS, VERSION};
use crate::simulate::{
    modal_duality_check, observability_gramian, simulate_distributed, ControlSignal, GramianOptions, ObservationKernel,
};
use crate::spectrum::{Dimension, Geometry, ModeTable};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const OUTPUT_DIR_ENV: &str = "STOKES_MEMORY_OUTPUT_DIR";

/// Tolerance names accepted in the `tolerances` table.
pub const TOLERANCE_NAMES: [&str; 4] = ["root_abs", "packet_residual", "duality", "gramian_threshold"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "R")]
    pub radius: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dimension: u8,
    pub n_max: usize,
    #[serde(rename = "M_min")]
    pub m_min: usize,
    #[serde(rename = "M_max")]
    pub m_max: usize,
    #[serde(rename = "L_truncation")]
    pub l_truncation: usize,
    #[serde(rename = "gramian_N_min")]
    pub gramian_n_min: usize,
    #[serde(rename = "gramian_N_max")]
    pub gramian_n_max: usize,
    pub gramian_weighted: bool,
    pub gramian_kernel: ObservationKernel,
    pub steps: usize,
    pub simulate_modes: usize,
    pub control_amplitude: f64,
    pub control_intervals: usize,
    pub v_norm: f64,
    pub seed: u64,
    pub threads: usize,
    pub emit_dat: bool,
    pub emit_plot_script: bool,
    pub output_dir: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            radius: 1.0,
            a: 1.0,
            b: 1.0,
            horizon: 2.0,
            dimension: 3,
            n_max: 8 * 56 + 8,
            m_min: 24,
            m_max: 56,
            l_truncation: 512,
            gramian_n_min: 8,
            gramian_n_max: 160,
            gramian_weighted: false,
            gramian_kernel: ObservationKernel::NormalDerivative,
            steps: 20_000,
            simulate_modes: 8,
            control_amplitude: 0.0,
            control_intervals: 100,
            v_norm: 1.0,
            seed: 0,
            threads: 0,
            emit_dat: false,
            emit_plot_script: false,
            output_dir: PathBuf::from("output"),
            tolerances: default_tolerances(),
        }
    }
}

pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("root_abs", 1e-13),
        ("packet_residual", 1e-9),
        ("duality", 1e-7),
        ("gramian_threshold", 1e-100),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {x}")))
    }
}

fn positive_int(field: &str, x: usize) -> Result<()> {
    if x > 0 {
        Ok(())
    } else {
        Err(Error::config(field, "must be a positive integer"))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        let mut tol = default_tolerances();
        tol.extend(std::mem::take(&mut cfg.tolerances));
        cfg.tolerances = tol;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        positive("R", self.radius)?;
        positive("a", self.a)?;
        positive("b", self.b)?;
        positive("T", self.horizon)?;
        if !matches!(self.dimension, 2 | 3) {
            return Err(Error::config("dimension", format!("must be 2 or 3, got {}", self.dimension)));
        }
        positive_int("n_max", self.n_max)?;
        positive_int("M_min", self.m_min)?;
        positive_int("M_max", self.m_max)?;
        positive_int("L_truncation", self.l_truncation)?;
        positive_int("gramian_N_min", self.gramian_n_min)?;
        positive_int("gramian_N_max", self.gramian_n_max)?;
        positive_int("steps", self.steps)?;
        positive_int("simulate_modes", self.simulate_modes)?;
        positive_int("control_intervals", self.control_intervals)?;
        if !self.control_amplitude.is_finite() {
            return Err(Error::config("control_amplitude", "must be finite"));
        }
        if !(self.v_norm >= 0.0 && self.v_norm.is_finite()) {
            return Err(Error::config("v_norm", format!("must be finite and non-negative, got {}", self.v_norm)));
        }
        if self.m_min <= self.m_max {
            if 8 * self.m_max + 8 > self.n_max {
                return Err(Error::config(
                    "n_max",
                    format!("must be at least 8 * M_max + 8 = {}, got {}", 8 * self.m_max + 8, self.n_max),
                ));
            }
            if self.l_truncation < self.m_max {
                return Err(Error::config(
                    "L_truncation",
                    format!("must be at least M_max = {}, got {}", self.m_max, self.l_truncation),
                ));
            }
        }
        if self.gramian_n_min > self.gramian_n_max {
            return Err(Error::config("gramian_N_min", "must not exceed gramian_N_max"));
        }
        if self.gramian_n_max > self.n_max {
            return Err(Error::config("gramian_N_max", format!("must not exceed n_max = {}", self.n_max)));
        }
        if self.simulate_modes > self.n_max {
            return Err(Error::config("simulate_modes", format!("must not exceed n_max = {}", self.n_max)));
        }
        for (k, v) in &self.tolerances {
            if !TOLERANCE_NAMES.contains(&k.as_str()) {
                return Err(Error::config(format!("tolerances.{k}"), "unknown tolerance"));
            }
            positive(&format!("tolerances.{k}"), *v)?;
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| default_tolerances()[name])
    }

    pub fn params(&self) -> Result<MemoryParams> {
        MemoryParams::new(self.a, self.b, self.horizon)
    }

    pub fn dimension(&self) -> Dimension {
        if self.dimension == 2 {
            Dimension::Two
        } else {
            Dimension::Three
        }
    }

    pub fn mode_table(&self) -> Result<ModeTable> {
        let g = Geometry::new(self.radius)?;
        match self.dimension() {
            Dimension::Three => crate::eigen3d::mode_table_3d(&g, self.n_max),
            Dimension::Two => crate::eigen2d::mode_table_2d(&g, self.n_max),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "stokes-memory", version = VERSION, about = "Radial Stokes modes with memory: packet scans, observability and Gramians")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long = "R", global = true)]
    radius: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    dimension: Option<u8>,
    #[arg(long = "n-max", global = true)]
    n_max: Option<usize>,
    #[arg(long = "M-min", global = true)]
    m_min: Option<usize>,
    #[arg(long = "M-max", global = true)]
    m_max: Option<usize>,
    #[arg(long = "L-truncation", global = true)]
    l_truncation: Option<usize>,
    #[arg(long = "gramian-N-min", global = true)]
    gramian_n_min: Option<usize>,
    #[arg(long = "gramian-N-max", global = true)]
    gramian_n_max: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long = "output-dir", global = true)]
    output_dir: Option<PathBuf>,
    /// Also write whitespace-separated .dat files.
    #[arg(long, global = true)]
    dat: bool,
    /// Also write a gnuplot script next to the CSV files.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelArg {
    NormalDerivative,
    FullTraction,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenpairs on the ball.
    Eigs3d,
    /// Eigenpairs on the disk.
    Eigs2d,
    /// Packet selection for one M, or the boundedness scan over the M range.
    Packet {
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Initial and boundary norms over the M range with slope fits.
    Scan,
    /// Pairing against the truncated initial datum versus the boundary bound.
    Contradiction {
        #[arg(long = "v-norm")]
        v_norm: Option<f64>,
    },
    /// Forward RK4 simulation of the leading modes and the duality check.
    Simulate {
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        control: Option<f64>,
    },
    /// Smallest generalized eigenvalue of the finite-mode Gramian.
    Gramian {
        #[arg(long)]
        weighted: bool,
        #[arg(long, value_enum)]
        kernel: Option<KernelArg>,
    },
    /// Every pipeline with a combined summary.
    Report,
}

fn resolve_config(cli: &Cli, env_output: Option<OsString>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = env_output.filter(|d| !d.is_empty()) {
        cfg.output_dir = PathBuf::from(dir);
    }
    let o = &cli.overrides;
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { cfg.$f = v; } )* };
    }
    set!(radius, a, b, horizon, dimension, n_max, m_min, m_max, l_truncation, gramian_n_min, gramian_n_max, steps, seed, threads, output_dir);
    cfg.emit_dat |= o.dat;
    cfg.emit_plot_script |= o.plot;
    match &cli.command {
        Command::Contradiction { v_norm: Some(v) } => cfg.v_norm = *v,
        Command::Simulate { modes, control } => {
            if let Some(m) = modes {
                cfg.simulate_modes = *m;
            }
            if let Some(c) = control {
                cfg.control_amplitude = *c;
            }
        }
        Command::Gramian { weighted, kernel } => {
            cfg.gramian_weighted |= *weighted;
            if let Some(k) = kernel {
                cfg.gramian_kernel = match k {
                    KernelArg::NormalDerivative => ObservationKernel::NormalDerivative,
                    KernelArg::FullTraction => ObservationKernel::FullTraction,
                };
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `argv` (program name first), runs the pipeline and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli, std::env::var_os(OUTPUT_DIR_ENV))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Eigs3d => eigs3d(&cfg),
        Command::Eigs2d => eigs2d(&cfg),
        Command::Packet { m } => packet_cmd(&cfg, *m),
        Command::Scan => scan_cmd(&cfg).map(|_| ()),
        Command::Contradiction { .. } => contradiction_cmd(&cfg).map(|_| ()),
        Command::Simulate { .. } => simulate_cmd(&cfg).map(|_| ()),
        Command::Gramian { .. } => gramian_cmd(&cfg).map(|_| ()),
        Command::Report => report_cmd(&cfg),
    })
}

fn emit(cfg: &RunConfig, name: &str, csv: &Csv) -> Result<()> {
    let path = report::write_csv(&cfg.output_dir, &format!("{name}.csv"), csv)?;
    println!("wrote {}", path.display());
    if cfg.emit_dat {
        let path = report::write_text(&cfg.output_dir, &format!("{name}.dat"), &csv.render_dat())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn emit_json(cfg: &RunConfig, name: &str, value: &serde_json::Value) -> Result<()> {
    let path = report::write_json(&cfg.output_dir, name, value)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn eigs3d(cfg: &RunConfig) -> Result<()> {
    let modes = compute_modes_3d(&Geometry::new(cfg.radius)?, cfg.n_max)?;
    match norm_bound_threshold(&modes) {
        Some(n) => println!("norm lower bound 2 pi R / lambda_n holds from n = {n}"),
        None => println!("norm lower bound threshold not reached within n_max = {}", cfg.n_max),
    }
    emit(cfg, "eigs3d", &report::eigen3d_csv(&modes))
}

fn eigs2d(cfg: &RunConfig) -> Result<()> {
    let modes = compute_modes_2d(&Geometry::new(cfg.radius)?, cfg.n_max)?;
    emit(cfg, "eigs2d", &report::eigen2d_csv(&modes, cfg.radius))
}

fn packet_cmd(cfg: &RunConfig, m: Option<usize>) -> Result<()> {
    let table = cfg.mode_table()?;
    let params = cfg.params()?;
    if let Some(n0) = admissible_start(&table, &params) {
        println!("admissible modes start at n0 = {n0}");
    }
    match m {
        Some(m) => {
            let sel = packet(m, &table, &params)?;
            println!("M = {m}: residual {:e}", sel.residual);
            emit(cfg, "packet", &report::packet_csv(&[sel]))
        }
        None => {
            let sels = packet_range(cfg.m_min, cfg.m_max, &table, &params)?;
            emit(cfg, "packet", &report::packet_csv(&sels))?;
            let rows = packet_boundedness_scan(cfg.m_min, cfg.m_max, &table, &params)?;
            let tol = cfg.tolerance("packet_residual");
            let worst = rows.iter().fold(0.0f64, |w, r| w.max(r.residual));
            println!("{} packets, largest residual {worst:e} (tolerance {tol:e})", rows.len());
            emit(cfg, "packet_scan", &report::packet_scan_csv(&rows))
        }
    }
}

fn scan_summary(cfg: &RunConfig, reports: &[ObservabilityReport], contradiction: Option<&ContradictionReport>) -> Result<serde_json::Value> {
    let slopes = report::scan_slopes(reports)?;
    let verdicts = match cfg.dimension() {
        Dimension::Three => serde_json::to_value(report::verdicts(reports, &slopes, contradiction))
            .map_err(|e| Error::Numerical(e.to_string()))?,
        Dimension::Two => serde_json::Value::Null,
    };
    let growth: Vec<serde_json::Value> = report::violated_constant_growth(reports)
        .into_iter()
        .map(|(m, c)| json!({ "M": m, "smallest_admissible_constant": c }))
        .collect();
    Ok(json!({
        "version": VERSION,
        "config": config_json(cfg),
        "slopes": slopes,
        "thresholds": THRESHOLDS,
        "verdicts": verdicts,
        "violated_constant_growth": growth,
    }))
}

fn scan_cmd(cfg: &RunConfig) -> Result<Vec<ObservabilityReport>> {
    let table = cfg.mode_table()?;
    let params = cfg.params()?;
    let reports = observability_scan(cfg.m_min, cfg.m_max, &table, &params)?;
    emit(cfg, "scan", &report::scan_csv(&reports))?;
    let summary = scan_summary(cfg, &reports, None)?;
    let s = &summary["slopes"];
    println!(
        "slopes: initial {:.4}, boundary weighted {:.4}, unweighted {:.4}, quotient {:.4}",
        s["initial_norm_sq"]["slope"].as_f64().unwrap_or(f64::NAN),
        s["boundary_weighted"]["slope"].as_f64().unwrap_or(f64::NAN),
        s["boundary_unweighted"]["slope"].as_f64().unwrap_or(f64::NAN),
        s["quotient"]["slope"].as_f64().unwrap_or(f64::NAN),
    );
    if let (Some(first), Some(last)) = (reports.first(), reports.last()) {
        println!(
            "no observability constant fits the scan: the quotient grows from {:e} at M = {} to {:e} at M = {}",
            first.quotient, first.m, last.quotient, last.m
        );
    }
    emit_json(cfg, "summary.json", &summary)?;
    if cfg.emit_plot_script {
        let p = report::write_text(&cfg.output_dir, "scan.gp", &report::plot_script("scan.csv", None))?;
        println!("wrote {}", p.display());
    }
    Ok(reports)
}

fn contradiction_cmd(cfg: &RunConfig) -> Result<ContradictionReport> {
    let table = cfg.mode_table()?;
    let params = cfg.params()?;
    let rep = contradiction_report(cfg.l_truncation, cfg.m_min, cfg.m_max, cfg.v_norm, &table, &params)?;
    emit(cfg, "contradiction", &report::contradiction_csv(&rep))?;
    println!(
        "pairing slope {:.4}, bound slope {:.4}, crossover {}",
        rep.pairing_fit.slope,
        rep.bound_fit.slope,
        rep.crossover.map_or("none".to_string(), |m| format!("M* = {m}"))
    );
    println!("truncation L = {}, tail sum_(l > L) l^(-3/2) = {:e}", rep.truncation, rep.truncation_tail);
    emit_json(
        cfg,
        "contradiction.json",
        &json!({ "version": VERSION, "config": config_json(cfg), "report": rep }),
    )?;
    Ok(rep)
}

fn simulate_cmd(cfg: &RunConfig) -> Result<serde_json::Value> {
    let table = cfg.mode_table()?;
    let params = cfg.params()?;
    let n = cfg.simulate_modes;
    let lambdas: Vec<f64> = table.modes[..n].iter().map(|m| m.lambda).collect();
    let indices: Vec<usize> = (1..=n).collect();
    let y0 = vec![1.0; n];
    let intervals = cfg.control_intervals;
    let shape: Vec<f64> = (0..=intervals)
        .map(|i| cfg.control_amplitude * (std::f64::consts::PI * i as f64 / intervals as f64).sin())
        .collect();
    let control = ControlSignal::new(cfg.horizon / intervals as f64, vec![shape.clone(); n])?;
    let traj = simulate_distributed(&y0, &control, &params, &lambdas, cfg.steps)?;
    emit(cfg, "trajectory", &report::trajectory_csv(&traj, &indices))?;
    let single = ControlSignal::new(control.dt, vec![shape])?;
    let mut csv = Csv::new(&["mode", "state_side", "control_side", "residual", "relative"]);
    let mut worst = 0.0f64;
    for (k, &lambda) in lambdas.iter().enumerate() {
        mode_dynamics_for(&table, k + 1, &params, 1.0)?;
        let c = modal_duality_check(y0[k], &single, 1.0, &params, lambda, cfg.steps)?;
        worst = worst.max(c.relative());
        csv.push(vec![
            (k + 1).to_string(),
            report::fmt_float(c.state_side),
            report::fmt_float(c.control_side),
            report::fmt_float(c.residual),
            report::fmt_float(c.relative()),
        ]);
    }
    emit(cfg, "duality", &csv)?;
    let bounded = traj
        .y
        .iter()
        .zip(&y0)
        .all(|(ys, y0)| ys.iter().all(|y| y.abs() <= y0.abs() * (1.0 + 1e-9)));
    let tol = cfg.tolerance("duality");
    println!("largest relative duality residual {worst:e} (tolerance {tol:e})");
    let summary = json!({
        "version": VERSION,
        "config": config_json(cfg),
        "largest_relative_duality_residual": worst,
        "duality_within_tolerance": worst <= tol,
        "uncontrolled": cfg.control_amplitude == 0.0,
        "amplitudes_bounded_by_initial": bounded,
    });
    emit_json(cfg, "simulate.json", &summary)?;
    Ok(summary)
}

fn gramian_cmd(cfg: &RunConfig) -> Result<serde_json::Value> {
    let table = cfg.mode_table()?;
    let params = cfg.params()?;
    let opts = GramianOptions {
        weighted: cfg.gramian_weighted,
        kernel: cfg.gramian_kernel,
        bits: None,
    };
    let sys = observability_gramian(cfg.gramian_n_max, &table, &params, &opts)?;
    let eigs = sys.min_generalized_eigenvalues()?;
    let rows: Vec<_> = eigs
        .iter()
        .filter(|e| e.n >= cfg.gramian_n_min)
        .map(|e| crate::simulate::ConstantScanRow {
            n: e.n,
            min_generalized_eigenvalue: e.value,
            log10_min_generalized_eigenvalue: e.log10,
        })
        .collect();
    emit(cfg, "gramian", &report::gramian_csv(&rows))?;
    let nonincreasing = rows.windows(2).all(|w| w[1].min_generalized_eigenvalue <= w[0].min_generalized_eigenvalue);
    let threshold = cfg.tolerance("gramian_threshold");
    let crossing = rows.iter().find(|r| r.min_generalized_eigenvalue < threshold).map(|r| r.n);
    let psd = sys.psd_check();
    let mut feasibility = Vec::new();
    if cfg.gramian_kernel == ObservationKernel::NormalDerivative {
        let first = admissible_start(&table, &params).unwrap_or(1);
        let m_lo = first.saturating_sub(1).div_ceil(8).max(1);
        for m in m_lo.. {
            let n = 8 * m + 8;
            if n > cfg.gramian_n_max {
                break;
            }
            let sel = packet(m, &table, &params)?;
            let rep = observability_report(&sel, &table, &params)?;
            let boundary = if cfg.gramian_weighted {
                rep.boundary_weighted
            } else {
                rep.boundary_unweighted
            };
            let inverse_quotient = boundary / rep.initial_norm_sq;
            let min_eig = eigs[n - 1].value;
            feasibility.push(json!({
                "M": m,
                "N": n,
                "min_generalized_eigenvalue": min_eig,
                "inverse_quotient": inverse_quotient,
                "feasible": min_eig <= inverse_quotient * (1.0 + 1e-9),
            }));
        }
    }
    let feasible = feasibility.iter().all(|f| f["feasible"].as_bool() == Some(true));
    println!(
        "N = {}..{}: nonincreasing {nonincreasing}, PSD {}, packet feasibility {feasible}",
        cfg.gramian_n_min,
        cfg.gramian_n_max,
        psd.extended_cholesky && psd.shifted_cholesky && psd.symmetric
    );
    match crossing {
        Some(n) => println!("smallest eigenvalue drops below {threshold:e} at N = {n}"),
        None => println!("smallest eigenvalue stays above {threshold:e}"),
    }
    let summary = json!({
        "version": VERSION,
        "config": config_json(cfg),
        "working_bits": sys.bits,
        "nonincreasing": nonincreasing,
        "psd": psd,
        "threshold": threshold,
        "threshold_crossing_N": crossing,
        "feasibility": feasibility,
        "feasible": feasible,
    });
    emit_json(cfg, "gramian.json", &summary)?;
    Ok(summary)
}

fn report_cmd(cfg: &RunConfig) -> Result<()> {
    match cfg.dimension() {
        Dimension::Three => eigs3d(cfg)?,
        Dimension::Two => eigs2d(cfg)?,
    }
    packet_cmd(cfg, None)?;
    let reports = scan_cmd(cfg)?;
    let contradiction = contradiction_cmd(cfg)?;
    let gramian = gramian_cmd(cfg)?;
    let mut summary = scan_summary(cfg, &reports, Some(&contradiction))?;
    summary["slopes"]["pairing"] = json!(contradiction.pairing_fit);
    summary["slopes"]["bound"] = json!(contradiction.bound_fit);
    summary["crossover"] = json!(contradiction.crossover);
    summary["gramian"] = gramian;
    emit_json(cfg, "summary.json", &summary)?;
    if cfg.emit_plot_script {
        let p = report::write_text(
            &cfg.output_dir,
            "report.gp",
            &report::plot_script("scan.csv", Some("contradiction.csv")),
        )?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_unknown_keys() {
        let c = RunConfig::from_toml("a = 2.5\nM_max = 30\n[tolerances]\nduality = 1e-6\n").unwrap();
        assert_eq!(c.a, 2.5);
        assert_eq!(c.m_max, 30);
        assert_eq!(c.tolerance("duality"), 1e-6);
        assert_eq!(c.tolerance("packet_residual"), 1e-9);
        assert!(RunConfig::from_toml("alpha = 1").is_err());
    }

    #[test]
    fn negative_memory_rate_names_field() {
        let c = RunConfig { a: -1.0, ..RunConfig::default() };
        match c.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
