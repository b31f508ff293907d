//! Spherical and temporal Fourier transforms of radial profiles, Mellin
//! moments and their high-order time derivatives.
//!
//! Radial transform: 4π ∫ r² f(r) sin(kr)/(kr) dr. Its Taylor coefficients
//! in k² are the moments M_n = 4π(−1)ⁿ/(2n+1)! ∫ r^{2n+2} f dr, so that
//! Σ M_n k^{2n} reproduces the transform for small k.
//!
//! Tables and moment tracks hold the *dynamic* part ξ − ξ_static of the
//! squeezing function. The static remainder only adds a δ(Ω) spike at
//! Ω = 0, which pair creation (Ω = ω_k + ω_k' > 0) never samples.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::{integrate_adaptive, linspace, CompositeRule, Estimate};
use crate::scenario::{DielectricProfile, ScenarioConfig};

/// Fraction of the time window covered by each cosine taper.
pub const TAPER_FRACTION: f64 = 0.05;

/// sin(x)/x, series near the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Transform of the indicator of a ball of radius `radius`:
/// 4π (sin qR − qR cos qR)/q³.
pub fn ball_ft(q: f64, radius: f64) -> f64 {
    let x = q * radius;
    let r3 = 4.0 * PI * radius * radius * radius;
    if x.abs() < 1.0 {
        // Σ_{n≥1} (−1)^{n+1} 2n x^{2n−2}/(2n+1)!
        let x2 = x * x;
        let mut term = 1.0 / 3.0;
        let mut sum = term;
        for n in 1..14 {
            let nf = n as f64;
            term *= -x2 * (2.0 * nf + 2.0) / (2.0 * nf * (2.0 * nf + 2.0) * (2.0 * nf + 3.0));
            sum += term;
        }
        r3 * sum
    } else {
        r3 * (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// 4π ∫₀^upper r² f(r) sinc(kr) dr by adaptive quadrature.
///
/// `breaks` marks kinks or jumps of `f`.
pub fn radial_ft(f: impl Fn(f64) -> f64, k: f64, upper: f64, breaks: &[f64], tol: f64) -> Result<Estimate> {
    let mut br = breaks.to_vec();
    if k > 0.0 {
        // keep panels shorter than a few oscillations
        let n = (k * upper / PI).ceil() as usize;
        if n > 1 {
            br.extend(linspace(0.0, upper, n + 1));
        }
    }
    let est = integrate_adaptive(|r| 4.0 * PI * r * r * f(r) * sinc(k * r), 0.0, upper, &br, tol * 1e-3, tol)?;
    Ok(est)
}

/// Spatial transform of the full ξ(·, t); the sharp wall uses the closed form.
pub fn profile_radial_ft(config: &ScenarioConfig, t: f64, k: f64) -> Result<Estimate> {
    let eps = config.epsilon_inf;
    match &config.profile {
        DielectricProfile::SharpBubble { track } => {
            Ok(Estimate::new(0.5 * (1.0 - 1.0 / eps) * ball_ft(k, track.radius(t)), 0.0))
        }
        p => {
            let (upper, breaks) = full_radial_breaks(p, t);
            radial_ft(|r| p.xi(eps, r, t), k, upper, &breaks, 1e-12)
        }
    }
}

fn full_radial_breaks(p: &DielectricProfile, t: f64) -> (f64, Vec<f64>) {
    match p {
        DielectricProfile::SmoothBubble { track, wall_width } => {
            let r = track.radius(t);
            let upper = p.support_radius().max(r + 30.0 * wall_width);
            let breaks = [r - 20.0 * wall_width, r - 2.0 * wall_width, r, r + 2.0 * wall_width]
                .into_iter()
                .filter(|&x| x > 0.0)
                .collect();
            (upper, breaks)
        }
        DielectricProfile::GaussianBlob { length, .. } => (8.0 * length, vec![*length, 2.0 * length]),
        DielectricProfile::SharpBubble { track } => (track.radius(t), vec![]),
    }
}

/// 4π(−1)ⁿ/(2n+1)!.
pub fn moment_coefficient(n: usize) -> f64 {
    let fact: f64 = (2..=(2 * n + 1)).map(|k| k as f64).product();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    4.0 * PI * sign / fact
}

/// How fast a radial profile decays, declared rather than detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "power")]
pub enum RadialDecay {
    Compact,
    Gaussian,
    /// |f(r)| ~ r^{−p} at large r.
    PowerLaw(f64),
}

impl RadialDecay {
    pub fn for_profile(p: &DielectricProfile) -> Self {
        match p {
            DielectricProfile::SharpBubble { .. } => RadialDecay::Compact,
            _ => RadialDecay::Gaussian,
        }
    }

    /// Whether ∫ r^{2n+2} f dr converges.
    pub fn admits(&self, n: usize) -> bool {
        match self {
            RadialDecay::Compact | RadialDecay::Gaussian => true,
            RadialDecay::PowerLaw(p) => *p > (2 * n + 3) as f64,
        }
    }
}

/// M_n of a generic radial function supported (numerically) on [0, upper].
pub fn mellin_moment_of(
    f: impl Fn(f64) -> f64,
    n: usize,
    decay: RadialDecay,
    upper: f64,
    breaks: &[f64],
) -> Result<Estimate> {
    if !decay.admits(n) {
        return Err(Error::MomentDivergence { order: n });
    }
    let c = moment_coefficient(n);
    let p = 2 * n as i32 + 2;
    let est = integrate_adaptive(|r| r.powi(p) * f(r), 0.0, upper, breaks, 1e-300, 1e-13)?;
    Ok(Estimate::new(c * est.value, c.abs() * est.error))
}

/// Closed-form M_n of the sharp bubble at time t.
pub fn sharp_moment(eps_inf: f64, radius: f64, n: usize) -> f64 {
    let k = 2 * n as i32 + 3;
    moment_coefficient(n) * 0.5 * (1.0 - 1.0 / eps_inf) * radius.powi(k) / k as f64
}

/// Full moment M_n(t) by quadrature of ξ.
pub fn full_moment(config: &ScenarioConfig, n: usize, t: f64) -> Result<Estimate> {
    let p = &config.profile;
    let eps = config.epsilon_inf;
    let (upper, breaks) = match p {
        DielectricProfile::SharpBubble { track } => {
            let r = track.radius(t);
            (2.0 * r, vec![r])
        }
        _ => full_radial_breaks(p, t),
    };
    mellin_moment_of(|r| p.xi(eps, r, t), n, RadialDecay::for_profile(p), upper, &breaks)
}

/// Full moments M_0..=M_{n_max} at time t; closed form when available.
pub fn full_moments_at(config: &ScenarioConfig, t: f64, n_max: usize) -> Result<Vec<f64>> {
    (0..=n_max)
        .map(|n| match &config.profile {
            DielectricProfile::SharpBubble { track } => Ok(sharp_moment(config.epsilon_inf, track.radius(t), n)),
            _ => full_moment(config, n, t).map(|e| e.value),
        })
        .collect()
}

/// Radial GK15 rule covering the support of ξ_dynamic(·, t), fine enough
/// for wavenumbers up to `q_max`.
fn dynamic_radial_rule(p: &DielectricProfile, t: f64, q_max: f64, n_r: usize) -> CompositeRule {
    match p {
        DielectricProfile::SmoothBubble { track, wall_width } => {
            let (a, b) = if track.radius(t) < track.base {
                (track.radius(t), track.base)
            } else {
                (track.base, track.radius(t))
            };
            let lo = (a - 20.0 * wall_width).max(0.0);
            let hi = b + 20.0 * wall_width;
            let by_wall = n_r + ((b - a) / wall_width).ceil() as usize;
            let by_wave = (q_max * (hi - lo) / 2.0).ceil() as usize;
            CompositeRule::uniform(lo, hi, by_wall.max(by_wave))
        }
        DielectricProfile::GaussianBlob { length, .. } => {
            let upper = 8.0 * length;
            let by_wave = (q_max * upper / 2.0).ceil() as usize;
            CompositeRule::uniform(0.0, upper, n_r.max(4).max(by_wave))
        }
        DielectricProfile::SharpBubble { .. } => unreachable!("sharp wall uses the closed form"),
    }
}

// ---------------------------------------------------------------------------
// spectral table

/// (q, Ω) sample points for a [`SpectralTable`].
#[derive(Debug, Clone, Serialize)]
pub struct TableGrids {
    pub q_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    /// End of the uniformly sampled region in Ω.
    pub omega_dense: f64,
    /// End of the uniformly sampled region in q.
    pub q_dense: f64,
    /// Multiplies the number of time panels (convergence checks).
    pub time_refinement: usize,
}

/// Uniform nodes on [0, dense] then geometric nodes (ratio ~1.25) up to `max`.
fn dense_then_coarse(dense: f64, max: f64, n_dense: usize) -> Vec<f64> {
    let dense = dense.min(max);
    let mut g = linspace(0.0, dense, n_dense);
    if max > dense * (1.0 + 1e-12) {
        let steps = ((max / dense).ln() / 1.25f64.ln()).ceil().max(1.0) as usize;
        let ratio = (max / dense).powf(1.0 / steps as f64);
        for i in 1..=steps {
            g.push(if i == steps { max } else { dense * ratio.powi(i as i32) });
        }
    }
    g
}

impl TableGrids {
    /// Grids sized from the scenario's spectral support and cutoff.
    pub fn for_scenario(config: &ScenarioConfig) -> Self {
        let eps = config.epsilon_inf;
        let sq = eps.sqrt();
        let tau = config.profile.time_scale();
        let omega_s = config.profile.spectral_support(eps);
        let omega_max = (2.0 * config.cutoff_k / sq).max(omega_s);
        let q_s = sq * omega_s;
        let q_max = (2.0 * config.cutoff_k).max(sq * omega_max);
        let n_omega = config.quadrature.n_omega.max((4.8 * omega_s * tau).ceil() as usize);
        let size = config.profile.support_radius();
        let n_q = config.quadrature.n_q.max((4.0 * q_s.min(q_max) * size).ceil() as usize);
        Self {
            q_grid: dense_then_coarse(q_s, q_max, n_q),
            omega_grid: dense_then_coarse(omega_s, omega_max, n_omega),
            omega_dense: omega_s.min(omega_max),
            q_dense: q_s.min(q_max),
            time_refinement: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableMeta {
    pub scenario_hash: String,
    pub epsilon_inf: f64,
    pub cutoff_k: f64,
    /// Phase reference: values are ∫ dt e^{iΩ(t − t_ref)} (…).
    pub t_ref: f64,
    pub time_window: [f64; 2],
    pub taper_fraction: f64,
    pub time_panels: usize,
    pub radial_panels_max: usize,
    pub n_q: usize,
    pub n_omega: usize,
    pub q_dense: f64,
    pub omega_dense: f64,
    pub content: &'static str,
}

/// Sampled ξ̃(q, Ω) of the dynamic squeezing function on Ω ≥ 0.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    pub q_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    values: Vec<Complex64>,
    errors: Vec<f64>,
    pub meta: TableMeta,
}

/// Cosine taper rising over the first and falling over the last
/// `TAPER_FRACTION` of the window.
pub fn taper(t: f64, window: [f64; 2]) -> f64 {
    let width = TAPER_FRACTION * (window[1] - window[0]);
    let edge = (t - window[0]).min(window[1] - t);
    if edge <= 0.0 {
        0.0
    } else if edge >= width {
        1.0
    } else {
        0.5 * (1.0 - (PI * edge / width).cos())
    }
}

/// Per-time-node radial samples: F(q, t) = Σ w_i sinc(q r_i).
struct RadialSamples {
    r: Vec<f64>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
}

pub fn build_spectral_table(config: &ScenarioConfig, grids: &TableGrids) -> Result<SpectralTable> {
    let eps = config.epsilon_inf;
    let window = config.time_window;
    let profile = &config.profile;
    let t_ref = profile.center_time();
    let omega_max = *grids.omega_grid.last().expect("nonempty grid");
    let q_max = *grids.q_grid.last().expect("nonempty grid");
    if q_max < 2.0 * config.cutoff_k * (1.0 - 1e-12) || omega_max < 2.0 * config.cutoff_k / eps.sqrt() * (1.0 - 1e-12) {
        return Err(Error::Coverage(format!(
            "table grids end at q = {q_max:.4e}, Omega = {omega_max:.4e}; need 2K_c = {:.4e} and 2K_c/sqrt(eps) = {:.4e}",
            2.0 * config.cutoff_k,
            2.0 * config.cutoff_k / eps.sqrt()
        )));
    }

    let span = window[1] - window[0];
    let panels = config
        .quadrature
        .n_t
        .max((omega_max * span / 8.0).ceil() as usize)
        * grids.time_refinement.max(1);
    let time_rule = CompositeRule::uniform(window[0], window[1], panels);
    let tau = profile.time_scale();
    if span / panels as f64 > 0.5 * tau {
        log::warn!("time panels ({panels}) are coarse relative to the pulse time scale T = {tau}");
    }

    // radial samples per active time node
    let sharp_track = match profile {
        DielectricProfile::SharpBubble { track } => Some(*track),
        _ => None,
    };
    let xi_in = 0.5 * (1.0 - 1.0 / eps);
    let active: Vec<usize> = (0..time_rule.len())
        .filter(|&j| profile.pulse(time_rule.nodes[j]) > 1e-22 && taper(time_rule.nodes[j], window) > 0.0)
        .collect();
    let samples: Vec<RadialSamples> = if sharp_track.is_some() {
        Vec::new()
    } else {
        active
            .par_iter()
            .map(|&j| {
                let t = time_rule.nodes[j];
                let rule = dynamic_radial_rule(profile, t, q_max, config.quadrature.n_r);
                let mut out = RadialSamples { r: rule.nodes.clone(), kronrod: Vec::new(), gauss: Vec::new() };
                for i in 0..rule.len() {
                    let r = rule.nodes[i];
                    let f = 4.0 * PI * r * r * profile.xi_dynamic(eps, r, t);
                    out.kronrod.push(rule.weights[i] * f);
                    out.gauss.push(rule.gauss_weights[i] * f);
                }
                out
            })
            .collect()
    };
    let radial_panels_max = samples.iter().map(|s| s.r.len() / CompositeRule::PANEL).max().unwrap_or(0);

    let n_om = grids.omega_grid.len();
    let rows: Vec<(Vec<Complex64>, Vec<f64>)> = grids
        .q_grid
        .par_iter()
        .map(|&q| {
            // spatial transform at each active time node, with its error
            let (spatial, spatial_err): (Vec<f64>, Vec<f64>) = active
                .iter()
                .enumerate()
                .map(|(a, &j)| {
                    let t = time_rule.nodes[j];
                    if let Some(track) = &sharp_track {
                        (xi_in * (ball_ft(q, track.radius(t)) - ball_ft(q, track.base)), 0.0)
                    } else {
                        let s = &samples[a];
                        let mut k = 0.0;
                        let mut g = 0.0;
                        for i in 0..s.r.len() {
                            let w = sinc(q * s.r[i]);
                            k += s.kronrod[i] * w;
                            g += s.gauss[i] * w;
                        }
                        (k, (k - g).abs())
                    }
                })
                .unzip();
            let weighted: Vec<f64> = active
                .iter()
                .zip(&spatial)
                .map(|(&j, f)| f * taper(time_rule.nodes[j], window))
                .collect();
            let mut vals = Vec::with_capacity(n_om);
            let mut errs = Vec::with_capacity(n_om);
            let prop: f64 =
                active.iter().zip(&spatial_err).map(|(&j, e)| time_rule.weights[j].abs() * e).sum();
            for &om in &grids.omega_grid {
                let mut total = Complex64::new(0.0, 0.0);
                let mut err = 0.0;
                let mut panel = usize::MAX;
                let mut kp = Complex64::new(0.0, 0.0);
                let mut gp = Complex64::new(0.0, 0.0);
                for (a, &j) in active.iter().enumerate() {
                    if j / CompositeRule::PANEL != panel {
                        total += kp;
                        err += (kp - gp).norm();
                        kp = Complex64::new(0.0, 0.0);
                        gp = Complex64::new(0.0, 0.0);
                        panel = j / CompositeRule::PANEL;
                    }
                    let t = time_rule.nodes[j];
                    let v = Complex64::from_polar(weighted[a], om * (t - t_ref));
                    kp += v * time_rule.weights[j];
                    gp += v * time_rule.gauss_weights[j];
                }
                total += kp;
                err += (kp - gp).norm();
                vals.push(total);
                errs.push(err + prop);
            }
            (vals, errs)
        })
        .collect();

    let mut values = Vec::with_capacity(grids.q_grid.len() * n_om);
    let mut errors = Vec::with_capacity(grids.q_grid.len() * n_om);
    for (v, e) in rows {
        values.extend(v);
        errors.extend(e);
    }
    Ok(SpectralTable {
        q_grid: grids.q_grid.clone(),
        omega_grid: grids.omega_grid.clone(),
        values,
        errors,
        meta: TableMeta {
            scenario_hash: config.hash().0,
            epsilon_inf: eps,
            cutoff_k: config.cutoff_k,
            t_ref,
            time_window: window,
            taper_fraction: TAPER_FRACTION,
            time_panels: panels,
            radial_panels_max,
            n_q: grids.q_grid.len(),
            n_omega: n_om,
            q_dense: grids.q_dense,
            omega_dense: grids.omega_dense,
            content: "transform of xi - xi_static (static part contributes only at Omega = 0)",
        },
    })
}

/// Stencil start for local Lagrange interpolation with `points` nodes.
fn stencil(grid: &[f64], x: f64, points: usize) -> usize {
    let n = grid.len();
    let i = grid.partition_point(|&g| g <= x).saturating_sub(1);
    let start = i.saturating_sub((points - 1) / 2);
    start.min(n - points)
}

fn lagrange_weights(grid: &[f64], start: usize, points: usize, x: f64, w: &mut [f64; 4]) {
    for a in 0..points {
        let mut l = 1.0;
        let xa = grid[start + a];
        for b in 0..points {
            if a != b {
                let xb = grid[start + b];
                l *= (x - xb) / (xa - xb);
            }
        }
        w[a] = l;
    }
}

impl SpectralTable {
    pub fn q_max(&self) -> f64 {
        *self.q_grid.last().expect("nonempty")
    }

    pub fn omega_max(&self) -> f64 {
        *self.omega_grid.last().expect("nonempty")
    }

    pub fn value_at_node(&self, iq: usize, iw: usize) -> Complex64 {
        self.values[iq * self.omega_grid.len() + iw]
    }

    pub fn error_at_node(&self, iq: usize, iw: usize) -> f64 {
        self.errors[iq * self.omega_grid.len() + iw]
    }

    /// Largest node error estimate.
    pub fn max_error(&self) -> f64 {
        self.errors.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn interp(&self, q: f64, omega: f64, points: usize) -> Complex64 {
        let mut wq = [0.0; 4];
        let mut ww = [0.0; 4];
        let sq = stencil(&self.q_grid, q, points);
        let sw = stencil(&self.omega_grid, omega, points);
        lagrange_weights(&self.q_grid, sq, points, q, &mut wq);
        lagrange_weights(&self.omega_grid, sw, points, omega, &mut ww);
        let n_om = self.omega_grid.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..points {
            let row = (sq + a) * n_om + sw;
            let mut inner = Complex64::new(0.0, 0.0);
            for b in 0..points {
                inner += self.values[row + b] * ww[b];
            }
            acc += inner * wq[a];
        }
        acc
    }

    /// Bicubic interpolation; negative Ω through conjugate symmetry.
    pub fn eval(&self, q: f64, omega: f64) -> Complex64 {
        if omega < 0.0 {
            return self.interp(q, -omega, 4).conj();
        }
        self.interp(q, omega, 4)
    }

    /// Cubic value and |cubic − quadratic| as an interpolation error proxy.
    pub fn eval_with_error(&self, q: f64, omega: f64) -> (Complex64, f64) {
        let conj = omega < 0.0;
        let om = omega.abs();
        let c = self.interp(q, om, 4);
        let e = (c - self.interp(q, om, 3)).norm();
        (if conj { c.conj() } else { c }, e)
    }

    /// Rows (q, Ω, re, im, err) in grid order.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 5]> + '_ {
        let n_om = self.omega_grid.len();
        (0..self.values.len()).map(move |i| {
            let (iq, iw) = (i / n_om, i % n_om);
            let v = self.values[i];
            [self.q_grid[iq], self.omega_grid[iw], v.re, v.im, self.errors[i]]
        })
    }

    /// Ω⁸-weighted fraction of the q = 0 spectrum lying at Ω ≥ `omega_cut`.
    pub fn tail_fraction(&self, omega_cut: f64) -> f64 {
        let n = self.omega_grid.len();
        let (mut total, mut tail) = (0.0, 0.0);
        for i in 0..n - 1 {
            let (a, b) = (self.omega_grid[i], self.omega_grid[i + 1]);
            let fa = a.powi(8) * self.values[i].norm_sqr();
            let fb = b.powi(8) * self.values[i + 1].norm_sqr();
            let piece = 0.5 * (b - a) * (fa + fb);
            total += piece;
            if a >= omega_cut {
                tail += piece;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

// ---------------------------------------------------------------------------
// moments and derivatives

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    #[default]
    ClosedForm,
    Spectral,
}

/// Dynamic moment tracks M_n(t) − M_n(±∞) and their (4+2n)-th derivatives
/// on a uniform time grid.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSeries {
    pub n_max: usize,
    pub t0: f64,
    pub step: f64,
    pub times: Vec<f64>,
    /// values[n][j] = M_n(t_j) − M_n(±∞).
    pub values: Vec<Vec<f64>>,
    /// M_n of the t → ±∞ profile.
    pub static_values: Vec<f64>,
    /// derivatives[n][j] = M_n^{(4+2n)}(t_j).
    pub derivatives: Vec<Vec<f64>>,
    pub method: DerivativeMethod,
    pub decay: RadialDecay,
}

impl MomentSeries {
    pub fn max_derivative_order(&self) -> usize {
        4 + 2 * self.n_max
    }

    pub fn derivative(&self, n: usize) -> Result<&[f64]> {
        self.derivatives.get(n).map(Vec::as_slice).ok_or(Error::DerivativeOrder {
            requested: 4 + 2 * n,
            available: self.max_derivative_order(),
        })
    }
}

/// Jets of the dynamic moments M_0..=M_{n_max} at time t, each of order
/// 4 + 2 n_max, with a GK error bound on the value.
pub fn dynamic_moment_jets(config: &ScenarioConfig, t: f64, n_max: usize) -> Vec<Jet> {
    let eps = config.epsilon_inf;
    let order = 4 + 2 * n_max;
    let p = &config.profile;
    match p {
        DielectricProfile::SharpBubble { track } => {
            let r = track.jet(t, order);
            let xi_in = 0.5 * (1.0 - 1.0 / eps);
            (0..=n_max)
                .map(|n| {
                    let k = 2 * n as u32 + 3;
                    let c = moment_coefficient(n) * xi_in / k as f64;
                    r.powi(k).add_scalar(-track.base.powi(k as i32)).scale(c)
                })
                .collect()
        }
        _ => {
            let rule = dynamic_radial_rule(p, t, 0.0, config.quadrature.n_r);
            let mut acc = vec![vec![0.0; order + 1]; n_max + 1];
            for i in 0..rule.len() {
                let r = rule.nodes[i];
                let jet = p.xi_jet(eps, r, t, order).expect("smooth profile");
                let stat = p.xi_static(eps, r);
                let w = rule.weights[i];
                let mut rp = r * r;
                for (n, a) in acc.iter_mut().enumerate() {
                    let c = w * rp * moment_coefficient(n);
                    for (j, cj) in jet.coefficients().iter().enumerate() {
                        let v = if j == 0 { cj - stat } else { *cj };
                        a[j] += c * v;
                    }
                    rp *= r * r;
                }
            }
            acc.into_iter().map(Jet::from_coefficients).collect()
        }
    }
}

/// Uniform time samples used for moment tracks.
pub fn moment_time_grid(config: &ScenarioConfig) -> (f64, f64, usize) {
    let [a, b] = config.time_window;
    let omega_s = config.profile.spectral_support(config.epsilon_inf);
    let by_nyquist = (4.0 * omega_s * (b - a) / PI).ceil() as usize;
    // even, so the energy series can compare steps h and 2h
    let intervals = (config.quadrature.n_t * 16).max(by_nyquist).max(64).next_multiple_of(2);
    (a, (b - a) / intervals as f64, intervals + 1)
}

pub fn mellin_moments(config: &ScenarioConfig, n_max: usize) -> Result<MomentSeries> {
    mellin_moments_with(config, n_max, DerivativeMethod::ClosedForm)
}

pub fn mellin_moments_with(config: &ScenarioConfig, n_max: usize, method: DerivativeMethod) -> Result<MomentSeries> {
    let decay = RadialDecay::for_profile(&config.profile);
    if let Some(n) = (0..=n_max).find(|&n| !decay.admits(n)) {
        return Err(Error::MomentDivergence { order: n });
    }
    let (t0, step, count) = moment_time_grid(config);
    let times: Vec<f64> = (0..count).map(|j| t0 + step * j as f64).collect();
    let jets: Vec<Vec<Jet>> = times
        .par_iter()
        .map(|&t| {
            if config.profile.pulse(t) < 1e-300 {
                vec![Jet::zero(4 + 2 * n_max); n_max + 1]
            } else {
                dynamic_moment_jets(config, t, n_max)
            }
        })
        .collect();
    let values: Vec<Vec<f64>> = (0..=n_max).map(|n| jets.iter().map(|j| j[n].value()).collect()).collect();
    let derivatives = match method {
        DerivativeMethod::ClosedForm => (0..=n_max)
            .map(|n| jets.iter().map(|j| j[n].derivative(4 + 2 * n)).collect())
            .collect(),
        DerivativeMethod::Spectral => (0..=n_max)
            .map(|n| spectral_derivative(&values[n], step, 4 + 2 * n))
            .collect::<Result<Vec<_>>>()?,
    };
    let static_values = static_moments(config, n_max)?;
    Ok(MomentSeries { n_max, t0, step, times, values, static_values, derivatives, method, decay })
}

pub fn static_moments(config: &ScenarioConfig, n_max: usize) -> Result<Vec<f64>> {
    let eps = config.epsilon_inf;
    let p = &config.profile;
    (0..=n_max)
        .map(|n| match p {
            DielectricProfile::SharpBubble { track } => Ok(sharp_moment(eps, track.base, n)),
            DielectricProfile::SmoothBubble { track, wall_width } => {
                let upper = track.base + 30.0 * wall_width;
                let breaks = [track.base - 20.0 * wall_width, track.base, track.base + 2.0 * wall_width];
                mellin_moment_of(|r| p.xi_static(eps, r), n, RadialDecay::Gaussian, upper, &breaks).map(|e| e.value)
            }
            DielectricProfile::GaussianBlob { .. } => Ok(0.0),
        })
        .collect()
}

/// A time track to differentiate.
pub enum Track<'a> {
    /// Exact derivatives from Taylor jets at the listed times.
    ClosedForm { times: &'a [f64], jet: &'a (dyn Fn(f64, usize) -> Jet + Sync) },
    /// Uniform samples with spacing `step`.
    Sampled { values: &'a [f64], step: f64 },
}

pub fn high_order_derivative(track: &Track<'_>, order: usize) -> Result<Vec<f64>> {
    match track {
        Track::ClosedForm { times, jet } => Ok(times.iter().map(|&t| jet(t, order).derivative(order)).collect()),
        Track::Sampled { values, step } => spectral_derivative(values, *step, order),
    }
}

/// FFT differentiation of uniform samples whose ends are quiet.
///
/// A linear ramp through the end points is removed first so the periodic
/// extension is continuous. Fourier coefficients below 1e-13 of the peak
/// are dropped; if the retained band reaches 80% of Nyquist the track is
/// under-resolved and [`Error::NoisyTrack`] is returned.
pub fn spectral_derivative(values: &[f64], step: f64, order: usize) -> Result<Vec<f64>> {
    let count = values.len();
    if count < 8 {
        return Err(Error::NoisyTrack { order });
    }
    let (first, last) = (values[0], values[count - 1]);
    let slope = (last - first) / ((count - 1) as f64 * step);
    let n = count - 1;
    let mut buf: Vec<Complex64> =
        (0..n).map(|j| Complex64::new(values[j] - first - slope * step * j as f64, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let fwd: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(n);
    fwd.process(&mut buf);

    let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = 1e-13 * peak;
    let half = n / 2;
    let freq = |j: usize| -> f64 {
        let m = if j <= half { j as f64 } else { j as f64 - n as f64 };
        2.0 * PI * m / (n as f64 * step)
    };
    let band = (0..n)
        .filter(|&j| buf[j].norm() > floor)
        .map(|j| if j <= half { j } else { n - j })
        .max()
        .unwrap_or(0);
    if peak > 0.0 && band as f64 > 0.8 * half as f64 {
        return Err(Error::NoisyTrack { order });
    }
    let unit = Complex64::new(0.0, 1.0);
    for (j, c) in buf.iter_mut().enumerate() {
        let dist = if j <= half { j } else { n - j };
        if dist > band || (n % 2 == 0 && j == half) {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= (unit * freq(j)).powu(order as u32);
        }
    }
    let inv = planner.plan_fft_inverse(n);
    inv.process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    let ramp = if order == 1 { slope } else { 0.0 };
    if order == 0 {
        for (j, v) in out.iter_mut().enumerate() {
            *v += first + slope * step * j as f64;
        }
    } else {
        for v in out.iter_mut() {
            *v += ramp;
        }
    }
    out.push(if order == 0 { last } else { out[0] });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::gaussian_derivative;
    use crate::scenario::{LoadOptions, RadiusTrack};

    fn sharp_config(dr: f64, tau: f64) -> ScenarioConfig {
        let text = format!(
            r#"{{"epsilon_inf": 1.78, "profile": {{"kind": "sharp_bubble", "R0": 1.0, "dR": {dr}, "T": {tau}}}, "cutoff_k": 4.0}}"#
        );
        ScenarioConfig::from_json_str(&text, LoadOptions::default()).unwrap()
    }

    #[test]
    fn ball_transform_matches_quadrature() {
        for &k in &[0.0, 1e-3, 0.3, 0.99, 1.01, 4.0, 17.0] {
            let oracle = radial_ft(|_| 1.0, k, 1.3, &[], 1e-13).unwrap().value;
            let closed = ball_ft(k, 1.3);
            assert!((closed - oracle).abs() < 1e-8 * oracle.abs().max(1e-3), "k={k}: {closed} vs {oracle}");
        }
    }

    #[test]
    fn zero_profile_transforms_to_zero() {
        for &k in &[0.0, 0.5, 3.0] {
            assert_eq!(radial_ft(|_| 0.0, k, 2.0, &[], 1e-10).unwrap().value, 0.0);
        }
        let m = mellin_moment_of(|_| 0.0, 2, RadialDecay::Compact, 1.0, &[]).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn k_zero_is_volume() {
        let cfg = sharp_config(0.2, 10.0);
        let ft = profile_radial_ft(&cfg, 3.0, 0.0).unwrap().value;
        let r = cfg.profile.track().unwrap().radius(3.0);
        let vol = 0.5 * (1.0 - 1.0 / 1.78) * 4.0 / 3.0 * PI * r.powi(3);
        assert!((ft - vol).abs() < 1e-14 * vol);
    }

    #[test]
    fn sharp_first_moment_matches_small_k_fit() {
        // fit radial_ft(k) on k ∈ [0, 0.01/R] to a + b k² + c k⁴
        let cfg = sharp_config(0.2, 10.0);
        let t = 1.0;
        let r = cfg.profile.track().unwrap().radius(t);
        let ks: Vec<f64> = (1..=20).map(|i| 0.01 / r * i as f64 / 20.0).collect();
        let ys: Vec<f64> = ks.iter().map(|&k| profile_radial_ft(&cfg, t, k).unwrap().value).collect();
        let m0 = sharp_moment(1.78, r, 0);
        // remove M0 and divide by k²: remaining is M1 + M2 k² + ...
        let slopes: Vec<f64> = ks.iter().zip(&ys).map(|(k, y)| (y - m0) / (k * k)).collect();
        let m1_fit = slopes[0] - (slopes[1] - slopes[0]) / (ks[1].powi(2) - ks[0].powi(2)) * ks[0].powi(2);
        let m1 = sharp_moment(1.78, r, 1);
        assert!((m1_fit - m1).abs() < 1e-6 * m1.abs(), "{m1_fit} vs {m1}");
        let expected = -(2.0 * PI / 15.0) * (1.0 - 1.0 / 1.78) * r.powi(5) / 2.0;
        assert!((m1 - expected).abs() < 1e-14 * expected.abs());
    }

    #[test]
    fn series_matches_transform_at_small_k() {
        let configs = [sharp_config(0.2, 10.0), ScenarioConfig::reference()];
        for cfg in &configs {
            let t = cfg.profile.center_time() + 0.3 * cfg.profile.time_scale();
            let m = full_moments_at(cfg, t, 3).unwrap();
            let rmax = cfg.profile.support_radius();
            for i in 1..=5 {
                let k = 0.1 / rmax * i as f64 / 5.0;
                let ft = profile_radial_ft(cfg, t, k).unwrap().value;
                let series: f64 = (0..=2).map(|n| m[n] * k.powi(2 * n as i32)).sum();
                let bound = 2.0 * m[3].abs() * k.powi(6) + 1e-12 * m[0].abs();
                assert!((ft - series).abs() <= bound, "k={k}: {} vs bound {bound}", (ft - series).abs());
            }
        }
    }

    #[test]
    fn moment_divergence_is_reported() {
        let f = |r: f64| 1.0 / (1.0 + r.powi(6));
        assert!(mellin_moment_of(f, 1, RadialDecay::PowerLaw(6.0), 100.0, &[]).is_ok());
        assert!(matches!(
            mellin_moment_of(f, 2, RadialDecay::PowerLaw(6.0), 100.0, &[]),
            Err(Error::MomentDivergence { order: 2 })
        ));
    }

    #[test]
    fn sharp_dynamic_moment_matches_quadrature() {
        let cfg = sharp_config(0.2, 10.0);
        let t = -4.0;
        let jets = dynamic_moment_jets(&cfg, t, 2);
        for n in 0..=2 {
            let full = full_moment(&cfg, n, t).unwrap().value;
            let stat = sharp_moment(1.78, 1.0, n);
            assert!((jets[n].value() - (full - stat)).abs() < 1e-12 * full.abs());
        }
    }

    #[test]
    fn smooth_dynamic_moment_matches_quadrature() {
        let cfg = ScenarioConfig::reference();
        let t = 20.0;
        let jets = dynamic_moment_jets(&cfg, t, 1);
        let stat = static_moments(&cfg, 1).unwrap();
        for n in 0..=1 {
            let full = full_moment(&cfg, n, t).unwrap().value;
            let dynamic = full - stat[n];
            assert!((jets[n].value() - dynamic).abs() < 1e-7 * dynamic.abs(), "{} vs {dynamic}", jets[n].value());
        }
    }

    #[test]
    fn gaussian_fourth_derivative_against_richardson() {
        let tau: f64 = 2.0;
        let g = |t: f64| (-(t * t) / (tau * tau)).exp();
        // 5-point fourth difference, two Richardson levels over h, h/2, h/4
        let d4 = |h: f64| (g(2.0 * h) - 4.0 * g(h) + 6.0 * g(0.0) - 4.0 * g(-h) + g(-2.0 * h)) / h.powi(4);
        let (a, b, c) = (d4(0.1), d4(0.05), d4(0.025));
        let (r1, r2) = ((4.0 * b - a) / 3.0, (4.0 * c - b) / 3.0);
        let rich = (16.0 * r2 - r1) / 15.0;
        let jet = |t: f64, order: usize| {
            let s = Jet::variable(t, order).scale(1.0 / tau);
            (-(&s * &s)).exp()
        };
        let times = [0.0];
        let d = high_order_derivative(&Track::ClosedForm { times: &times, jet: &jet }, 4).unwrap()[0];
        assert!((d - 12.0 / tau.powi(4)).abs() < 1e-15);
        assert!((d - rich).abs() < 1e-6 * d.abs(), "{d} vs {rich}");
    }

    #[test]
    fn constant_track_has_zero_derivatives() {
        let values = vec![3.5; 257];
        for order in 1..=8 {
            let d = spectral_derivative(&values, 0.1, order).unwrap();
            assert!(d.iter().all(|&v| v.abs() < 1e-12));
        }
        let jet = |_t: f64, order: usize| Jet::constant(3.5, order);
        let times = [0.0, 1.0];
        let d = high_order_derivative(&Track::ClosedForm { times: &times, jet: &jet }, 6).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn closed_form_derivative_is_linear() {
        let f = RadiusTrack::gaussian(0.0, 1.0, 2.0, 0.3);
        let g = RadiusTrack::bump(0.0, 1.0, 3.0, -0.2);
        let (a, b) = (1.7, -0.6);
        let combo = |t: f64, order: usize| &f.shape_jet(t, order).scale(a) + &g.shape_jet(t, order).scale(b);
        let times: Vec<f64> = linspace(-3.0, 3.0, 41);
        let lhs = high_order_derivative(&Track::ClosedForm { times: &times, jet: &combo }, 6).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let rhs = a * f.shape_jet(t, 6).derivative(6) + b * g.shape_jet(t, 6).derivative(6);
            assert!((lhs[i] - rhs).abs() <= 1e-13 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn spectral_and_closed_form_paths_agree() {
        let tau = 3.0;
        let step = 0.05;
        let times: Vec<f64> = (0..=960).map(|j| -24.0 + step * j as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| (-(t * t) / (tau * tau)).exp()).collect();
        for order in [1usize, 4, 8] {
            let spec = spectral_derivative(&values, step, order).unwrap();
            let peak = times.iter().map(|&t| gaussian_derivative(t, 0.0, tau, order).abs()).fold(0.0, f64::max);
            for (j, &t) in times.iter().enumerate() {
                let exact = gaussian_derivative(t, 0.0, tau, order);
                assert!((spec[j] - exact).abs() < 1e-8 * peak, "order {order} t={t}");
            }
        }
    }

    #[test]
    fn unresolved_track_is_noisy() {
        let values: Vec<f64> = (0..257).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * (j as f64 / 30.0).sin()).collect();
        assert!(matches!(spectral_derivative(&values, 0.1, 4), Err(Error::NoisyTrack { .. })));
    }

    #[test]
    fn moment_series_paths_agree_on_reference() {
        let cfg = ScenarioConfig::reference();
        let a = mellin_moments_with(&cfg, 2, DerivativeMethod::ClosedForm).unwrap();
        let b = mellin_moments_with(&cfg, 2, DerivativeMethod::Spectral).unwrap();
        for n in 0..=2 {
            let peak = a.derivatives[n].iter().map(|v| v.abs()).fold(0.0, f64::max);
            let diff = a.derivatives[n].iter().zip(&b.derivatives[n]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-6 * peak, "n={n}: {diff} vs {peak}");
        }
        // tracks vanish at the window edges
        for n in 0..=2 {
            assert!(a.values[n][0].abs() < 1e-12 * a.static_values[n].abs());
        }
    }

    #[test]
    fn table_q0_row_matches_gaussian_volume_transform() {
        // ξ̃(0, Ω) of a sharp Gaussian-radius bubble, expanded in powers of ΔR
        let (r0, dr, tau) = (1.0, 0.2, 10.0);
        let cfg = sharp_config(dr, tau);
        let grids = TableGrids::for_scenario(&cfg);
        let table = build_spectral_table(&cfg, &grids).unwrap();
        let xi_in = 0.5 * (1.0 - 1.0 / 1.78);
        let coeffs = [3.0 * r0 * r0 * dr, 3.0 * r0 * dr * dr, dr * dr * dr];
        let closed = |om: f64| -> f64 {
            (1..=3)
                .map(|j| {
                    let jf = j as f64;
                    coeffs[j - 1] * tau * (PI / jf).sqrt() * (-(om * om) * tau * tau / (4.0 * jf)).exp()
                })
                .sum::<f64>()
                * xi_in
                * 4.0
                * PI
                / 3.0
        };
        let peak = closed(0.0);
        for (iw, &om) in table.omega_grid.iter().enumerate() {
            let exact = closed(om);
            if exact.abs() < 1e-3 * peak {
                continue;
            }
            let v = table.value_at_node(0, iw);
            assert!((v.re - exact).abs() < 1e-6 * exact.abs(), "om={om}: {} vs {exact}", v.re);
            assert!(v.im.abs() < 1e-9 * peak);
        }
    }

    #[test]
    fn static_bubble_table_is_zero() {
        let cfg = sharp_config(0.0, 10.0);
        let table = build_spectral_table(&cfg, &TableGrids::for_scenario(&cfg)).unwrap();
        assert_eq!(table.max_abs(), 0.0);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_conjugates() {
        let cfg = sharp_config(0.2, 10.0);
        let table = build_spectral_table(&cfg, &TableGrids::for_scenario(&cfg)).unwrap();
        let (iq, iw) = (3, 5);
        let (q, om) = (table.q_grid[iq], table.omega_grid[iw]);
        let v = table.value_at_node(iq, iw);
        assert!((table.eval(q, om) - v).norm() < 1e-14 * v.norm().max(1e-300));
        assert_eq!(table.eval(q, -om), table.eval(q, om).conj());
    }
}
