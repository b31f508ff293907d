//! Gauss–Legendre and Gauss–Kronrod rules.
//!
//! Fixed composite rules carry their embedded 7-point Gauss weights so every
//! integral comes with a `|K15 - G7|` error estimate at no extra evaluations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the 7-point rule sitting on the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 nodes and both weight sets of a single GK15 panel on [-1, 1].
pub(crate) fn gk15_reference() -> ([f64; 15], [f64; 15], [f64; 15]) {
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for i in 0..7 {
        x[i] = -XGK[i];
        x[14 - i] = XGK[i];
        wk[i] = WGK[i];
        wk[14 - i] = WGK[i];
        if i % 2 == 1 {
            wg[i] = WG[i / 2];
            wg[14 - i] = WG[i / 2];
        }
    }
    x[7] = 0.0;
    wk[7] = WGK[7];
    wg[7] = WG[3];
    (x, wk, wg)
}

/// Integral value plus error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
}

/// n-point Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration
/// on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        // the Newton iterate for the middle node can be off by rounding
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite GK15 rule over a list of breakpoints.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Embedded Gauss weights; zero on Kronrod-only nodes.
    pub gauss_weights: Vec<f64>,
}

impl CompositeRule {
    pub const PANEL: usize = 15;

    pub fn from_breakpoints(breaks: &[f64]) -> Self {
        let (x, wk, wg) = gk15_reference();
        let panels = breaks.len().saturating_sub(1);
        let mut nodes = Vec::with_capacity(panels * 15);
        let mut weights = Vec::with_capacity(panels * 15);
        let mut gauss_weights = Vec::with_capacity(panels * 15);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for i in 0..15 {
                nodes.push(mid + half * x[i]);
                weights.push(half * wk[i]);
                gauss_weights.push(half * wg[i]);
            }
        }
        Self { nodes, weights, gauss_weights }
    }

    pub fn uniform(a: f64, b: f64, panels: usize) -> Self {
        Self::from_breakpoints(&linspace(a, b, panels.max(1) + 1))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.nodes.len() / Self::PANEL
    }

    /// Integrate already-sampled values (one per node).
    pub fn apply(&self, values: &[f64]) -> Estimate {
        debug_assert_eq!(values.len(), self.nodes.len());
        let mut total = 0.0;
        let mut err = 0.0;
        for p in 0..self.panels() {
            let mut k = 0.0;
            let mut g = 0.0;
            for i in p * 15..(p + 1) * 15 {
                k += self.weights[i] * values[i];
                g += self.gauss_weights[i] * values[i];
            }
            total += k;
            err += (k - g).abs();
        }
        Estimate::new(total, err)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Estimate {
        let values: Vec<f64> = self.nodes.iter().map(|&x| f(x)).collect();
        self.apply(&values)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
        .collect()
}

fn gk15_interval(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let s = f(mid - dx) + f(mid + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive GK15 on `[a, b]`, bisecting the worst interval until
/// the summed error estimate meets `max(abs_tol, rel_tol * |I|)`.
///
/// `breaks` are interior points where the integrand has kinks or jumps.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in points.windows(2) {
        let (v, e) = gk15_interval(&f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Interval { a: w[0], b: w[1], value: v, error: e });
    }
    loop {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            // running sums lose digits when a large interval is replaced;
            // confirm against a fresh sum before stopping
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
            if err <= abs_tol.max(rel_tol * total.abs()) {
                break;
            }
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NonConvergence {
                what: format!("adaptive quadrature on [{a}, {b}]"),
                achieved: err,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let worst = heap.pop().expect("heap holds at least one interval");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NonConvergence {
                what: format!("adaptive quadrature on [{a}, {b}]: interval at {} exhausted", worst.a),
                achieved: err,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let (v1, e1) = gk15_interval(&f, worst.a, mid);
        let (v2, e2) = gk15_interval(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Interval { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // recompute sums in a fixed order so the result does not depend on
    // accumulated add/subtract rounding
    let mut parts: Vec<Interval> = heap.into_vec();
    parts.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = parts.iter().map(|p| p.value).sum();
    let error = parts.iter().map(|p| p.error).sum();
    Ok(Estimate::new(value, error))
}
