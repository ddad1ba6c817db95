//! Gauss–Legendre rules, composite and adaptive integration.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> GaussLegendre {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// Sum of the rule over consecutive intervals given by sorted breakpoints.
    pub fn integrate_breaks<F: FnMut(f64) -> f64>(&self, mut f: F, breaks: &[f64]) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(&mut f, w[0], w[1]))
            .sum()
    }

    /// Composite rule over `panels` equal subintervals.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| self.integrate(&mut f, a + i as f64 * h, a + (i + 1) as f64 * h))
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Breakpoints on `[a, b]` whose widths grow geometrically from `first` by `ratio`.
pub fn graded_breaks(a: f64, b: f64, first: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![a];
    let mut h = first.max(f64::MIN_POSITIVE);
    let mut x = a;
    while x + h < b {
        x += h;
        out.push(x);
        h *= ratio;
    }
    out.push(b);
    out
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOptions {
    pub initial_panels: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper limit on the number of panels before giving up.
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            initial_panels: 4,
            rel_tol: 1e-13,
            abs_tol: 1e-300,
            max_panels: 100_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection: the panel with the largest estimated error is
/// split until the total estimate meets the tolerance. The estimate of a panel
/// is the difference between a 15-point rule on it and on its two halves, less
/// a roundoff allowance.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<f64> {
    let rule = GaussLegendre::new(15);
    let panel = |lo: f64, hi: f64| {
        let m = 0.5 * (lo + hi);
        let whole = rule.integrate(&f, lo, hi);
        let left = rule.integrate(&f, lo, m);
        let right = rule.integrate(&f, m, hi);
        let value = left + right;
        let noise = 256.0 * f64::EPSILON * (left.abs() + right.abs());
        Panel {
            a: lo,
            b: hi,
            value,
            error: ((value - whole).abs() - noise).max(0.0),
        }
    };
    let n = opts.initial_panels.max(1);
    let h = (b - a) / n as f64;
    let mut heap: std::collections::BinaryHeap<Panel> = (0..n)
        .map(|i| {
            let lo = a + i as f64 * h;
            panel(lo, if i + 1 == n { b } else { lo + h })
        })
        .collect();
    let mut total: f64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        if error <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            // sum in position order so the result does not depend on the split history
            let mut panels: Vec<Panel> = heap.into_vec();
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} above tolerance after {} panels",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        let (l, r) = (panel(worst.a, m), panel(m, worst.b));
        total += l.value + r.value - worst.value;
        error = (error + l.error + r.error - worst.error).max(0.0);
        heap.push(l);
        heap.push(r);
        if heap.len().is_multiple_of(1024) {
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Composite Simpson rule with `n` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
