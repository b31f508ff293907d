//! Photon yield of the squeezing term at second order in the disturbance.
//!
//! All public quantities are quantization-volume free. With box modes the
//! occupation of mode (k, λ) carries a 1/V; the continuum replacement
//! Σ_k → V/(2π)³ ∫d³k is done once, so the functions here return V·N_k and
//! the spectral energy density e(ω), in which V has cancelled.
//!
//! With ω_k = k/√ε_∞, q = |k + k'| and μ = cos∠(k, k'):
//!
//! V·N_k = (2π)⁻³ · 2π ∫₀^{K_c} k'² dk' ∫₋₁¹ dμ ω_k ω_k' |ξ̃(q, ω_k + ω_k')|² K(μ)
//!
//! e(ω) = (2π)⁻³ · 4πk² · √ε_∞ · ω · V·N_k,  k = √ε_∞ ω
//!
//! where K(μ) = 1 + μ² summed over both polarizations of k.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gnm::GnmTable;
use crate::quadrature::{linspace, CompositeRule, Estimate};
use crate::scenario::ScenarioConfig;
use crate::transforms::{build_spectral_table, mellin_moments_with, DerivativeMethod, MomentSeries, SpectralTable, TableGrids};

/// Tail fraction of the Ω⁸-weighted spectrum beyond K_c/√ε_∞ above which
/// results depend on the cutoff.
pub const COVERAGE_TOL: f64 = 1e-6;

/// Angular weight after averaging over the azimuth of k' about k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AngularKernel {
    /// Both polarizations of k: 1 + μ².
    #[default]
    Summed,
    /// One polarization of k: (1 + μ²)/2.
    PerPolarization,
}

impl AngularKernel {
    pub fn weight(self, mu: f64) -> f64 {
        match self {
            AngularKernel::Summed => 1.0 + mu * mu,
            AngularKernel::PerPolarization => 0.5 * (1.0 + mu * mu),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub points: usize,
}

/// Ordinary least squares y = a + b x with the standard error of b.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::Fit(format!("need at least 3 paired points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_std_error = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(LinearFit { slope, intercept, slope_std_error, points: n })
}

/// Panel breakpoints in wavenumber: uniform panels over the spectrally
/// active range [0, k_s] (the first one split geometrically towards 0),
/// then geometric panels out to the cutoff.
pub fn k_breakpoints(cutoff: f64, active: f64, n_k: usize) -> Vec<f64> {
    let ks = active.min(cutoff);
    let mut br = linspace(0.0, ks, n_k.max(1) + 1);
    let h = br[1];
    let mut head = vec![0.0, h / 8.0, h / 4.0, h / 2.0];
    head.extend_from_slice(&br[1..]);
    br = head;
    if cutoff > ks * (1.0 + 1e-12) {
        let steps = ((cutoff / ks).ln() / 1.5f64.ln()).ceil().max(1.0) as usize;
        let ratio = (cutoff / ks).powf(1.0 / steps as f64);
        for i in 1..=steps {
            br.push(if i == steps { cutoff } else { ks * ratio.powi(i as i32) });
        }
    }
    br
}

/// Integration rules shared by the mode and energy integrals.
#[derive(Debug, Clone)]
pub struct MomentumRules {
    pub k: CompositeRule,
    pub mu: CompositeRule,
    pub cutoff: f64,
    pub epsilon_inf: f64,
}

impl MomentumRules {
    pub fn new(table: &SpectralTable, n_k: usize, n_mu: usize) -> Self {
        let eps = table.meta.epsilon_inf;
        let cutoff = table.meta.cutoff_k;
        let active = eps.sqrt() * table.meta.omega_dense;
        Self {
            k: CompositeRule::from_breakpoints(&k_breakpoints(cutoff, active, n_k)),
            mu: CompositeRule::uniform(-1.0, 1.0, n_mu),
            cutoff,
            epsilon_inf: eps,
        }
    }

    pub fn for_config(table: &SpectralTable, config: &ScenarioConfig) -> Self {
        Self::new(table, config.quadrature.n_k, config.quadrature.n_mu)
    }
}

fn check_mode_coverage(table: &SpectralTable, k: f64, cutoff: f64, eps: f64) -> Result<()> {
    if !(k >= 0.0) || k > cutoff * (1.0 + 1e-12) {
        return Err(Error::Coverage(format!("k = {k} lies outside [0, K_c = {cutoff}]")));
    }
    let need_q = k + cutoff;
    let need_om = need_q / eps.sqrt();
    if table.q_max() < need_q * (1.0 - 1e-12) || table.omega_max() < need_om * (1.0 - 1e-12) {
        return Err(Error::Coverage(format!(
            "table reaches q = {:.4e}, Omega = {:.4e}; mode k = {k} needs q = {need_q:.4e}, Omega = {need_om:.4e}",
            table.q_max(),
            table.omega_max()
        )));
    }
    Ok(())
}

/// Inner (k', μ) integral Σ w k'² ω_k' |ξ̃|² K(μ) for fixed k, with
/// quadrature and interpolation error estimates.
fn inner_mode_integral(table: &SpectralTable, rules: &MomentumRules, k: f64, kernel: AngularKernel) -> (f64, f64, f64) {
    let sq = rules.epsilon_inf.sqrt();
    let wk = k / sq;
    let (mut total, mut quad_err, mut interp_err) = (0.0, 0.0, 0.0);
    let kr = &rules.k;
    for p in 0..kr.panels() {
        let (mut kp, mut gp) = (0.0, 0.0);
        for i in p * 15..(p + 1) * 15 {
            let kk = kr.nodes[i];
            let wkk = kk / sq;
            let om = wk + wkk;
            let (mut mu_k, mut mu_err, mut mu_ierr) = (0.0, 0.0, 0.0);
            for mp in 0..rules.mu.panels() {
                let (mut a, mut b) = (0.0, 0.0);
                for m in mp * 15..(mp + 1) * 15 {
                    let mu = rules.mu.nodes[m];
                    let q = (k * k + kk * kk + 2.0 * k * kk * mu).max(0.0).sqrt();
                    let (v, e) = table.eval_with_error(q, om);
                    let w = kernel.weight(mu);
                    let f = v.norm_sqr() * w;
                    a += rules.mu.weights[m] * f;
                    b += rules.mu.gauss_weights[m] * f;
                    mu_ierr += rules.mu.weights[m] * w * e * (2.0 * v.norm() + e);
                }
                mu_k += a;
                mu_err += (a - b).abs();
            }
            let outer = kk * kk * wkk;
            kp += kr.weights[i] * outer * mu_k;
            gp += kr.gauss_weights[i] * outer * mu_k;
            quad_err += kr.weights[i] * outer * mu_err;
            interp_err += kr.weights[i] * outer * mu_ierr;
        }
        total += kp;
        quad_err += (kp - gp).abs();
    }
    (total, quad_err, interp_err)
}

/// V·N_k. The error combines the embedded-rule and interpolation estimates.
pub fn n_per_mode_with(table: &SpectralTable, rules: &MomentumRules, k: f64, kernel: AngularKernel) -> Result<Estimate> {
    check_mode_coverage(table, k, rules.cutoff, rules.epsilon_inf)?;
    let wk = k / rules.epsilon_inf.sqrt();
    let pref = 2.0 * PI / (2.0 * PI).powi(3) * wk;
    let (v, qe, ie) = inner_mode_integral(table, rules, k, kernel);
    Ok(Estimate::new(pref * v, pref * (qe + ie)))
}

pub fn n_per_mode(table: &SpectralTable, k: f64, kernel: AngularKernel, epsilon_inf: f64) -> Result<Estimate> {
    debug_assert_eq!(epsilon_inf, table.meta.epsilon_inf);
    let rules = MomentumRules::new(table, 12, 2);
    n_per_mode_with(table, &rules, k, kernel)
}

/// e(ω) at each requested frequency (both polarizations).
pub fn spectral_density_with(table: &SpectralTable, rules: &MomentumRules, omega: &[f64]) -> Result<Vec<Estimate>> {
    let sq = rules.epsilon_inf.sqrt();
    for &w in omega {
        check_mode_coverage(table, sq * w, rules.cutoff, rules.epsilon_inf)?;
    }
    omega
        .par_iter()
        .map(|&w| {
            let k = sq * w;
            let n = n_per_mode_with(table, rules, k, AngularKernel::Summed)?;
            let pref = 4.0 * PI * k * k * sq * w / (2.0 * PI).powi(3);
            Ok(Estimate::new(pref * n.value, pref * n.error))
        })
        .collect()
}

pub fn spectral_density(table: &SpectralTable, omega: &[f64], epsilon_inf: f64) -> Result<Vec<Estimate>> {
    debug_assert_eq!(epsilon_inf, table.meta.epsilon_inf);
    spectral_density_with(table, &MomentumRules::new(table, 12, 2), omega)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureEnergy {
    pub value: f64,
    /// Embedded-rule plus interpolation estimate.
    pub error: f64,
    pub quadrature_error: f64,
    pub interpolation_error: f64,
    /// Ω⁸-weighted share of the spectrum beyond K_c/√ε_∞.
    pub cutoff_tail_fraction: f64,
    pub cutoff_dependent: bool,
}

/// Total energy from the tensor (k, k', μ) quadrature:
/// E = 8π²/(2π)⁶ ∫k²dk ∫k'²dk' ∫dμ ω_k² ω_k' |ξ̃|² (1 + μ²).
///
/// With `symmetrize` the weight ω_k²ω_k' is replaced by its k ↔ k' average.
pub fn energy_quadrature_with(table: &SpectralTable, rules: &MomentumRules, symmetrize: bool) -> Result<QuadratureEnergy> {
    let eps = rules.epsilon_inf;
    let cutoff = rules.cutoff;
    check_mode_coverage(table, cutoff, cutoff, eps)?;
    let sq = eps.sqrt();
    let kr = &rules.k;
    // per outer node: (value, inner quadrature error, inner interpolation error)
    let rows: Vec<(f64, f64, f64)> = (0..kr.len())
        .into_par_iter()
        .map(|i| {
            let k = kr.nodes[i];
            let wk = k / sq;
            let (mut total, mut qerr, mut ierr) = (0.0, 0.0, 0.0);
            for p in 0..kr.panels() {
                let (mut kp, mut gp) = (0.0, 0.0);
                for j in p * 15..(p + 1) * 15 {
                    let kk = kr.nodes[j];
                    let wkk = kk / sq;
                    let om = wk + wkk;
                    let weight = if symmetrize { 0.5 * wk * wkk * (wk + wkk) } else { wk * wk * wkk };
                    let (mut a, mut b, mut e_mu) = (0.0, 0.0, 0.0);
                    for mp in 0..rules.mu.panels() {
                        let (mut ka, mut ga) = (0.0, 0.0);
                        for m in mp * 15..(mp + 1) * 15 {
                            let mu = rules.mu.nodes[m];
                            let q = (k * k + kk * kk + 2.0 * k * kk * mu).max(0.0).sqrt();
                            let (v, e) = table.eval_with_error(q, om);
                            let w = 1.0 + mu * mu;
                            ka += rules.mu.weights[m] * v.norm_sqr() * w;
                            ga += rules.mu.gauss_weights[m] * v.norm_sqr() * w;
                            e_mu += rules.mu.weights[m] * w * e * (2.0 * v.norm() + e);
                        }
                        a += ka;
                        b += (ka - ga).abs();
                    }
                    let f = kk * kk * weight;
                    kp += kr.weights[j] * f * a;
                    gp += kr.gauss_weights[j] * f * a;
                    qerr += kr.weights[j] * f * b;
                    ierr += kr.weights[j] * f * e_mu;
                }
                total += kp;
                qerr += (kp - gp).abs();
            }
            (total, qerr, ierr)
        })
        .collect();

    let pref = 8.0 * PI * PI / (2.0 * PI).powi(6);
    let (mut value, mut qerr, mut ierr) = (0.0, 0.0, 0.0);
    for p in 0..kr.panels() {
        let (mut kp, mut gp) = (0.0, 0.0);
        for i in p * 15..(p + 1) * 15 {
            let k2 = kr.nodes[i] * kr.nodes[i];
            kp += kr.weights[i] * k2 * rows[i].0;
            gp += kr.gauss_weights[i] * k2 * rows[i].0;
            qerr += kr.weights[i] * k2 * rows[i].1;
            ierr += kr.weights[i] * k2 * rows[i].2;
        }
        value += kp;
        qerr += (kp - gp).abs();
    }
    let tail = table.tail_fraction(cutoff / sq);
    Ok(QuadratureEnergy {
        value: pref * value,
        error: pref * (qerr + ierr),
        quadrature_error: pref * qerr,
        interpolation_error: pref * ierr,
        cutoff_tail_fraction: tail,
        cutoff_dependent: tail > COVERAGE_TOL,
    })
}

pub fn energy_quadrature(table: &SpectralTable, epsilon_inf: f64, cutoff_k: f64) -> Result<QuadratureEnergy> {
    debug_assert_eq!(epsilon_inf, table.meta.epsilon_inf);
    debug_assert_eq!(cutoff_k, table.meta.cutoff_k);
    energy_quadrature_with(table, &MomentumRules::new(table, 12, 2), false)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesEnergy {
    pub total: f64,
    /// Time-discretization estimate (step h against 2h).
    pub discretization_error: f64,
    /// |Σ over terms with n or m equal to n_max|, a truncation proxy.
    pub last_order_magnitude: f64,
    /// breakdown[n][m] = E^{nm}.
    pub breakdown: Vec<Vec<f64>>,
    /// E⁰⁰ / E.
    pub leading_fraction: f64,
    pub n_max: usize,
}

/// E = Σ_{n,m} (−1)^{n+m} G^{nm} ∫ M_n^{(4+2n)} M_m^{(4+2m)} dt.
///
/// The sign factor accompanies the signed moments M_n used throughout.
pub fn energy_series(moments: &MomentSeries, gnm: &GnmTable) -> Result<SeriesEnergy> {
    let n_max = moments.n_max;
    if gnm.n_max < n_max {
        return Err(Error::DerivativeOrder { requested: 4 + 2 * n_max, available: 4 + 2 * gnm.n_max });
    }
    let h = moments.step;
    let mut breakdown = vec![vec![0.0; n_max + 1]; n_max + 1];
    let mut disc = 0.0;
    for n in 0..=n_max {
        let dn = moments.derivative(n)?;
        for m in 0..=n_max {
            let dm = moments.derivative(m)?;
            let fine: f64 = trapezoid(dn, dm, 1) * h;
            let coarse: f64 = trapezoid(dn, dm, 2) * 2.0 * h;
            let sign = if (n + m) % 2 == 0 { 1.0 } else { -1.0 };
            let g = gnm.value(n, m);
            breakdown[n][m] = sign * g * fine;
            disc += g * (fine - coarse).abs();
        }
    }
    let total: f64 = breakdown.iter().flatten().sum();
    let last: f64 = (0..=n_max)
        .flat_map(|n| (0..=n_max).map(move |m| (n, m)))
        .filter(|&(n, m)| n == n_max || m == n_max)
        .map(|(n, m)| breakdown[n][m])
        .sum();
    let leading_fraction = if total != 0.0 { breakdown[0][0] / total } else { 1.0 };
    Ok(SeriesEnergy {
        total,
        discretization_error: disc,
        last_order_magnitude: if n_max == 0 { 0.0 } else { last.abs() },
        breakdown,
        leading_fraction,
        n_max,
    })
}

/// Σ' f_j g_j over every `stride`-th sample, end points halved. The
/// interval count is a multiple of `stride`.
fn trapezoid(f: &[f64], g: &[f64], stride: usize) -> f64 {
    let last = f.len() - 1;
    debug_assert_eq!(last % stride, 0);
    (0..=last)
        .step_by(stride)
        .map(|j| if j == 0 || j == last { 0.5 } else { 1.0 } * f[j] * g[j])
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub std_error: f64,
    pub omega_window: [f64; 2],
    pub points: usize,
    /// ω_b · max(T, R_max √ε_∞), when a scale was supplied.
    pub asymptotic_parameter: Option<f64>,
    pub warning: Option<String>,
}

/// Slope of log e against log ω.
pub fn low_omega_fit(omega: &[f64], e: &[f64], asymptotic_scale: Option<f64>) -> Result<ExponentFit> {
    if omega.iter().chain(e).any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("low-frequency fit needs strictly positive ω and e(ω)".into()));
    }
    let x: Vec<f64> = omega.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let lo = omega.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = omega.iter().cloned().fold(0.0, f64::max);
    let param = asymptotic_scale.map(|s| hi * s);
    let warning = match param {
        Some(p) if p > 0.1 * (1.0 + 1e-9) => {
            let msg = format!("fit window reaches omega*scale = {p:.3}; outside the asymptotic regime (<= 0.1)");
            log::warn!("{msg}");
            Some(msg)
        }
        _ => None,
    };
    Ok(ExponentFit {
        exponent: fit.slope,
        std_error: fit.slope_std_error,
        omega_window: [lo, hi],
        points: omega.len(),
        asymptotic_parameter: param,
        warning,
    })
}

/// max(T, R_max √ε_∞): the longest time scale of the disturbance.
pub fn asymptotic_scale(config: &ScenarioConfig) -> f64 {
    config.profile.time_scale().max(config.profile.r_max() * config.epsilon_inf.sqrt())
}

/// 12 log-spaced frequencies on [0.01, 0.1] / max(T, R_max √ε_∞).
pub fn default_low_omega_window(config: &ScenarioConfig) -> Vec<f64> {
    let s = asymptotic_scale(config);
    log_space(0.01 / s, 0.1 / s, 12)
}

/// k₀ = 0.01 √ε_∞ / max(T, R_max √ε_∞): the on-shell wavenumber of the
/// lowest frequency in [`default_low_omega_window`].
pub fn default_low_momentum_start(config: &ScenarioConfig) -> f64 {
    0.01 * config.epsilon_inf.sqrt() / asymptotic_scale(config)
}

pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LowMomentumCheck {
    pub k: Vec<f64>,
    /// V·N_k / k.
    pub ratio: Vec<f64>,
    /// |ratio_{i+1}/ratio_i − 1|.
    pub relative_change: Vec<f64>,
    pub monotone: bool,
}

/// V·N_k / k over k₀, k₀/2, …, k₀/2^halvings.
pub fn low_momentum_check(table: &SpectralTable, rules: &MomentumRules, k0: f64, halvings: usize) -> Result<LowMomentumCheck> {
    let k: Vec<f64> = (0..=halvings).map(|i| k0 / 2f64.powi(i as i32)).collect();
    let ratio = k
        .iter()
        .map(|&kk| n_per_mode_with(table, rules, kk, AngularKernel::Summed).map(|n| n.value / kk))
        .collect::<Result<Vec<_>>>()?;
    let relative_change: Vec<f64> = ratio.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).collect();
    let diffs: Vec<f64> = ratio.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|&d| d >= 0.0) || diffs.iter().all(|&d| d <= 0.0);
    Ok(LowMomentumCheck { k, ratio, relative_change, monotone })
}

/// Knobs for [`compute_spectrum`].
#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub kernel: AngularKernel,
    pub n_max: usize,
    pub derivatives: DerivativeMethod,
    /// Output frequencies for e(ω); default spans the active band.
    pub omega: Option<Vec<f64>>,
    /// Output wavenumbers for V·N_k.
    pub k: Option<Vec<f64>>,
    pub symmetrize: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            kernel: AngularKernel::Summed,
            n_max: 2,
            derivatives: DerivativeMethod::ClosedForm,
            omega: None,
            k: None,
            symmetrize: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumDiagnostics {
    pub table_q_nodes: usize,
    pub table_omega_nodes: usize,
    pub table_time_panels: usize,
    pub table_max_error: f64,
    pub k_panels: usize,
    pub mu_panels: usize,
    pub kernel: AngularKernel,
    pub derivative_method: DerivativeMethod,
    pub moment_samples: usize,
    /// ∫ e(ω) dω on an independent frequency rule.
    pub integrated_spectrum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub omega_grid: Vec<f64>,
    pub e_of_omega: Vec<f64>,
    pub e_error: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub n_per_mode_density: Vec<f64>,
    pub n_error: Vec<f64>,
    pub total_energy_series: SeriesEnergy,
    pub total_energy_quadrature: QuadratureEnergy,
    pub series_quadrature_relative_difference: f64,
    pub low_omega: ExponentFit,
    pub low_momentum: LowMomentumCheck,
    pub diagnostics: SpectrumDiagnostics,
    #[serde(skip)]
    pub table: SpectralTable,
}

/// ∫ e(ω) dω on GK panels over [0, min(Ω_dense, K_c/√ε)].
pub fn integrate_spectrum(table: &SpectralTable, rules: &MomentumRules, panels: usize) -> Result<Estimate> {
    let sq = rules.epsilon_inf.sqrt();
    let upper = (rules.cutoff / sq).min(table.meta.omega_dense);
    let mut br = vec![0.0];
    br.extend(log_space(upper * 1e-3, upper, panels));
    let rule = CompositeRule::from_breakpoints(&br);
    let e = spectral_density_with(table, rules, &rule.nodes)?;
    let values: Vec<f64> = e.iter().map(|x| x.value).collect();
    let mut est = rule.apply(&values);
    est.error += rule.weights.iter().zip(&e).map(|(w, x)| w * x.error).sum::<f64>();
    Ok(est)
}

/// Build the transform table and refuse it when more than
/// [`COVERAGE_TOL`] of the spectrum lies beyond the cutoff.
pub fn covered_table(config: &ScenarioConfig) -> Result<SpectralTable> {
    let sq = config.epsilon_inf.sqrt();
    let table = build_spectral_table(config, &TableGrids::for_scenario(config))?;
    let tail = table.tail_fraction(config.cutoff_k / sq);
    if tail > COVERAGE_TOL {
        return Err(Error::Coverage(format!(
            "{:.2e} of the spectrum lies beyond K_c/sqrt(eps) = {:.4e}; raise cutoff_k",
            tail,
            config.cutoff_k / sq
        )));
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyResult {
    pub quadrature: QuadratureEnergy,
    pub series: SeriesEnergy,
    pub relative_difference: f64,
}

fn relative_difference(series: &SeriesEnergy, quad: &QuadratureEnergy) -> f64 {
    if quad.value > 0.0 {
        (series.total - quad.value).abs() / quad.value
    } else {
        0.0
    }
}

/// Total energy by both paths, without the spectra.
pub fn compute_energy(config: &ScenarioConfig, n_max: usize, derivatives: DerivativeMethod) -> Result<EnergyResult> {
    let table = covered_table(config)?;
    let rules = MomentumRules::for_config(&table, config);
    let quadrature = energy_quadrature_with(&table, &rules, false)?;
    let moments = mellin_moments_with(config, n_max, derivatives)?;
    let series = energy_series(&moments, &GnmTable::new(n_max, config.epsilon_inf))?;
    let relative_difference = relative_difference(&series, &quadrature);
    Ok(EnergyResult { quadrature, series, relative_difference })
}

/// Table, moments, both energy paths, e(ω), V·N_k and the low-ω fit.
pub fn compute_spectrum(config: &ScenarioConfig, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let eps = config.epsilon_inf;
    let sq = eps.sqrt();
    let table = covered_table(config)?;
    let rules = MomentumRules::for_config(&table, config);

    let active = table.meta.omega_dense.min(config.cutoff_k / sq);
    let omega_grid = opts.omega.clone().unwrap_or_else(|| linspace(active / 256.0, active, 256));
    let e = spectral_density_with(&table, &rules, &omega_grid)?;
    let k_grid = opts.k.clone().unwrap_or_else(|| linspace(sq * active / 128.0, sq * active, 128));
    let n = k_grid
        .par_iter()
        .map(|&k| n_per_mode_with(&table, &rules, k, opts.kernel))
        .collect::<Result<Vec<_>>>()?;

    let quad = energy_quadrature_with(&table, &rules, opts.symmetrize)?;
    let moments = mellin_moments_with(config, opts.n_max, opts.derivatives)?;
    let gnm = GnmTable::new(opts.n_max, eps);
    let series = energy_series(&moments, &gnm)?;

    let window = default_low_omega_window(config);
    let e_low = spectral_density_with(&table, &rules, &window)?;
    let low = low_omega_fit(&window, &e_low.iter().map(|x| x.value).collect::<Vec<_>>(), Some(asymptotic_scale(config)))?;
    let integrated = integrate_spectrum(&table, &rules, 48)?;
    let low_momentum = low_momentum_check(&table, &rules, default_low_momentum_start(config), 4)?;

    let rel = relative_difference(&series, &quad);
    Ok(SpectrumResult {
        omega_grid,
        e_of_omega: e.iter().map(|x| x.value).collect(),
        e_error: e.iter().map(|x| x.error).collect(),
        k_grid,
        n_per_mode_density: n.iter().map(|x| x.value).collect(),
        n_error: n.iter().map(|x| x.error).collect(),
        total_energy_series: series,
        total_energy_quadrature: quad,
        series_quadrature_relative_difference: rel,
        low_omega: low,
        low_momentum,
        diagnostics: SpectrumDiagnostics {
            table_q_nodes: table.q_grid.len(),
            table_omega_nodes: table.omega_grid.len(),
            table_time_panels: table.meta.time_panels,
            table_max_error: table.max_error(),
            k_panels: rules.k.panels(),
            mu_panels: rules.mu.panels(),
            kernel: opts.kernel,
            derivative_method: opts.derivatives,
            moment_samples: moments.times.len(),
            integrated_spectrum: integrated.value,
        },
        table,
    })
}
