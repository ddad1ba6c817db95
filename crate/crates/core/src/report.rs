//! Deterministic CSV, plot-data and JSON summary writers.
//!
//! Every float is written with 17 significant digits in scientific notation,
//! rows end in `\n`, and row order follows the input order.

use crate::eigen2d::EigenMode2D;
use crate::eigen3d::EigenMode3D;
use crate::error::Result;
use crate::observability::{fit_power_law, ContradictionReport, ObservabilityReport, SlopeFit};
use crate::packet::{PacketScanRow, PacketSelection};
use crate::simulate::{ConstantScanRow, Trajectory};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Version string in `git describe` style.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated columns with a `#` header line, for gnuplot.
    pub fn render_dat(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for r in &self.rows {
            out.push_str(&r.join(" "));
            out.push('\n');
        }
        out
    }
}

fn f(x: f64) -> String {
    fmt_float(x)
}

fn i(x: usize) -> String {
    x.to_string()
}

pub fn eigen3d_csv(modes: &[EigenMode3D]) -> Csv {
    let mut c = Csv::new(&["n", "lambda", "eps_n", "norm_sq", "gamma_n"]);
    for m in modes {
        c.push(vec![i(m.n), f(m.lambda), f(m.eps_n), f(m.norm_sq), f(m.gamma_n)]);
    }
    c
}

/// `eps_n` is the gap below `((n + 1/4) pi / R)^2`.
pub fn eigen2d_csv(modes: &[EigenMode2D], radius: f64) -> Csv {
    let mut c = Csv::new(&["n", "lambda", "eps_n", "norm_sq", "gamma_n", "j1n"]);
    for m in modes {
        let q = (m.n as f64 + 0.25) * std::f64::consts::PI / radius;
        c.push(vec![i(m.n), f(m.lambda), f(q * q - m.lambda), f(m.norm_sq), f(m.gamma_n), f(m.j1n)]);
    }
    c
}

pub fn packet_csv(selections: &[PacketSelection]) -> Csv {
    let mut c = Csv::new(&["M", "k", "index", "beta_k", "C1_k", "node_k", "gamma_k", "residual"]);
    for s in selections {
        for k in 0..s.indices.len() {
            c.push(vec![
                i(s.m),
                i(k + 1),
                i(s.indices[k]),
                f(s.betas[k]),
                f(s.c1s[k]),
                f(s.nodes[k]),
                f(s.gammas[k]),
                f(s.residual),
            ]);
        }
    }
    c
}

pub fn packet_scan_csv(rows: &[PacketScanRow]) -> Csv {
    let mut c = Csv::new(&["M", "c1_inf_norm", "residual", "sigma_smallest", "sigma_second_smallest"]);
    for r in rows {
        c.push(vec![
            i(r.m),
            f(r.c1_inf_norm),
            f(r.residual),
            f(r.sigma_smallest),
            f(r.sigma_second_smallest),
        ]);
    }
    c
}

pub fn scan_csv(reports: &[ObservabilityReport]) -> Csv {
    let mut c = Csv::new(&[
        "M",
        "initial_norm_sq",
        "A1",
        "A2",
        "boundary_weighted",
        "boundary_unweighted",
        "quotient",
    ]);
    for r in reports {
        c.push(vec![
            i(r.m),
            f(r.initial_norm_sq),
            f(r.a1),
            f(r.a2),
            f(r.boundary_weighted),
            f(r.boundary_unweighted),
            f(r.quotient),
        ]);
    }
    c
}

pub fn contradiction_csv(report: &ContradictionReport) -> Csv {
    let mut c = Csv::new(&["M", "k0", "pairing", "bound"]);
    for r in &report.rows {
        c.push(vec![i(r.m), i(r.k0), f(r.pairing), f(r.bound)]);
    }
    c
}

pub fn trajectory_csv(traj: &Trajectory, mode_indices: &[usize]) -> Csv {
    let mut c = Csv::new(&["t", "mode", "y", "z"]);
    for (step, &t) in traj.times.iter().enumerate() {
        for (m, &idx) in mode_indices.iter().enumerate() {
            c.push(vec![f(t), i(idx), f(traj.y[m][step]), f(traj.z[m][step])]);
        }
    }
    c
}

pub fn gramian_csv(rows: &[ConstantScanRow]) -> Csv {
    let mut c = Csv::new(&["N", "min_generalized_eigenvalue", "log10_min_generalized_eigenvalue"]);
    for r in rows {
        c.push(vec![
            i(r.n),
            f(r.min_generalized_eigenvalue),
            f(r.log10_min_generalized_eigenvalue),
        ]);
    }
    c
}

/// Gnuplot script drawing the log-log scans from the CSV files next to it.
pub fn plot_script(scan_file: &str, contradiction_file: Option<&str>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "set xlabel 'M'");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output 'scan.png'");
    let _ = writeln!(
        s,
        "plot '{scan_file}' every ::1 using 1:2 with linespoints title 'initial norm', \\\n     \
         '{scan_file}' every ::1 using 1:5 with linespoints title 'boundary (weighted)', \\\n     \
         '{scan_file}' every ::1 using 1:6 with linespoints title 'boundary (unweighted)', \\\n     \
         '{scan_file}' every ::1 using 1:7 with linespoints title 'quotient'"
    );
    if let Some(c) = contradiction_file {
        let _ = writeln!(s, "set output 'contradiction.png'");
        let _ = writeln!(
            s,
            "plot '{c}' every ::1 using 1:3 with linespoints title 'pairing', \\\n     \
             '{c}' every ::1 using 1:4 with linespoints title 'bound'"
        );
    }
    s
}

/// Acceptance thresholds on the scan slopes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub initial_norm_slope_min: f64,
    pub initial_norm_slope_max: f64,
    pub boundary_weighted_slope_max: f64,
    pub quotient_slope_min: f64,
    pub pairing_slope_min: f64,
    pub pairing_slope_max: f64,
    pub bound_slope_max: f64,
}

pub const THRESHOLDS: Thresholds = Thresholds {
    initial_norm_slope_min: -6.6,
    initial_norm_slope_max: -5.4,
    boundary_weighted_slope_max: -9.0,
    quotient_slope_min: 3.4,
    pairing_slope_min: -4.1,
    pairing_slope_max: -3.5,
    bound_slope_max: -4.6,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSlopes {
    pub initial_norm_sq: SlopeFit,
    pub boundary_weighted: SlopeFit,
    pub boundary_unweighted: SlopeFit,
    pub quotient: SlopeFit,
}

pub fn scan_slopes(reports: &[ObservabilityReport]) -> Result<ScanSlopes> {
    let pts = |g: fn(&ObservabilityReport) -> f64| reports.iter().map(|r| (r.m as f64, g(r))).collect::<Vec<_>>();
    Ok(ScanSlopes {
        initial_norm_sq: fit_power_law(&pts(|r| r.initial_norm_sq), None)?,
        boundary_weighted: fit_power_law(&pts(|r| r.boundary_weighted), None)?,
        boundary_unweighted: fit_power_law(&pts(|r| r.boundary_unweighted), None)?,
        quotient: fit_power_law(&pts(|r| r.quotient), None)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub initial_norm_slope: bool,
    pub boundary_weighted_slope: bool,
    pub quotient_slope: bool,
    pub quotient_increasing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_slope: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_slope: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover_found: Option<bool>,
}

pub fn verdicts(reports: &[ObservabilityReport], slopes: &ScanSlopes, contradiction: Option<&ContradictionReport>) -> Verdicts {
    let t = THRESHOLDS;
    let s0 = slopes.initial_norm_sq.slope;
    Verdicts {
        initial_norm_slope: (t.initial_norm_slope_min..=t.initial_norm_slope_max).contains(&s0),
        boundary_weighted_slope: slopes.boundary_weighted.slope <= t.boundary_weighted_slope_max,
        quotient_slope: slopes.quotient.slope >= t.quotient_slope_min,
        quotient_increasing: reports.windows(2).all(|w| w[1].quotient > w[0].quotient),
        pairing_slope: contradiction.map(|c| (t.pairing_slope_min..=t.pairing_slope_max).contains(&c.pairing_fit.slope)),
        bound_slope: contradiction.map(|c| c.bound_fit.slope <= t.bound_slope_max),
        crossover_found: contradiction.map(|c| c.crossover.is_some()),
    }
}

/// Growth of the smallest constant compatible with the observability inequality
/// over the scan: the largest quotient seen up to each `M`.
pub fn violated_constant_growth(reports: &[ObservabilityReport]) -> Vec<(usize, f64)> {
    let mut best = 0.0f64;
    reports
        .iter()
        .map(|r| {
            best = best.max(r.quotient);
            (r.m, best)
        })
        .collect()
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_csv(dir: &Path, name: &str, csv: &Csv) -> Result<PathBuf> {
    write_text(dir, name, &csv.render())
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    s.push('\n');
    write_text(dir, name, &s)
}
