//! Disturbance scenarios: dielectric profiles ε(r, t), the squeezing
//! function ξ(r, t) = ½(1/ε − 1/ε_∞) and velocity fields β(r, t).
//!
//! Scenario files are JSON. [`ScenarioFile`] mirrors the on-disk layout;
//! [`ScenarioConfig`] is the validated, immutable form everything else
//! consumes.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::potential::PotentialProbe;

pub const DEFAULT_BETA_MAX: f64 = 0.1;
const UNITS_NOTE: &str = "natural units: hbar = c = eps0 = mu0 = 1; lengths and times share one unit";

/// Relative amplitude below which a pulse counts as switched off.
const NEGLIGIBLE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// file format

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    SharpBubble,
    SmoothBubble,
    GaussianBlob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    #[default]
    GaussianPulse,
    CompactBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    #[serde(alias = "incompressible")]
    IncompressibleAroundBubble,
    UniformRadial,
    #[serde(alias = "rigid")]
    RigidTranslation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    #[serde(rename = "R0", default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(rename = "dR", default, skip_serializing_if = "Option::is_none")]
    pub dr: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<TrackKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySpec {
    pub kind: VelocityKind,
    #[serde(rename = "R0", default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(rename = "dR", default, skip_serializing_if = "Option::is_none")]
    pub dr: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<TrackKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
}

/// Grid sizes and tolerances for the numerical stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    /// GK15 panels across the spectrally active wavenumber range.
    pub n_k: usize,
    /// GK15 panels in μ = cos(angle between k and k').
    pub n_mu: usize,
    /// Minimum number of GK15 time panels.
    pub n_t: usize,
    pub tol: f64,
    /// Table nodes in q across the active range.
    pub n_q: usize,
    /// Table nodes in Ω across the active range.
    pub n_omega: usize,
    /// GK15 panels across a dielectric wall.
    pub n_r: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { n_k: 12, n_mu: 2, n_t: 64, tol: 1e-8, n_q: 48, n_omega: 160, n_r: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub epsilon_inf: f64,
    pub profile: ProfileSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocitySpec>,
    pub cutoff_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_window: Option<[f64; 2]>,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_probe: Option<PotentialProbe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units_note: Option<String>,
}

// ---------------------------------------------------------------------------
// validated domain types

/// Smooth time-localized radius history R(t) = R₀ + ΔR·shape((t − t₀)/T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusTrack {
    pub kind: TrackKind,
    pub base: f64,
    pub excursion: f64,
    pub time_scale: f64,
    pub center: f64,
}

impl RadiusTrack {
    pub fn gaussian(base: f64, excursion: f64, time_scale: f64, center: f64) -> Self {
        Self { kind: TrackKind::GaussianPulse, base, excursion, time_scale, center }
    }

    pub fn bump(base: f64, excursion: f64, time_scale: f64, center: f64) -> Self {
        Self { kind: TrackKind::CompactBump, base, excursion, time_scale, center }
    }

    /// Unit-height pulse shape.
    pub fn shape(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.time_scale;
        match self.kind {
            TrackKind::GaussianPulse => (-x * x).exp(),
            TrackKind::CompactBump => {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    // normalized so the peak is 1
                    (1.0 - 1.0 / (1.0 - x * x)).exp()
                }
            }
        }
    }

    pub fn shape_jet(&self, t: f64, order: usize) -> Jet {
        let x = Jet::variable(t, order).add_scalar(-self.center).scale(1.0 / self.time_scale);
        match self.kind {
            TrackKind::GaussianPulse => (-(&x * &x)).exp(),
            TrackKind::CompactBump => {
                if x.value().abs() >= 1.0 {
                    return Jet::zero(order);
                }
                let u = (-(&x * &x)).add_scalar(1.0);
                let arg = (-u.recip()).add_scalar(1.0);
                if arg.value() < -700.0 {
                    Jet::zero(order)
                } else {
                    arg.exp()
                }
            }
        }
    }

    pub fn radius(&self, t: f64) -> f64 {
        self.base + self.excursion * self.shape(t)
    }

    pub fn jet(&self, t: f64, order: usize) -> Jet {
        self.shape_jet(t, order).scale(self.excursion).add_scalar(self.base)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.excursion * self.shape_jet(t, 1).derivative(1)
    }

    pub fn r_max(&self) -> f64 {
        self.base + self.excursion.max(0.0)
    }

    pub fn r_min(&self) -> f64 {
        self.base + self.excursion.min(0.0)
    }

    /// Interval outside which the pulse amplitude is below 1e-18.
    pub fn time_support(&self) -> (f64, f64) {
        let half = match self.kind {
            TrackKind::GaussianPulse => 6.5 * self.time_scale,
            TrackKind::CompactBump => self.time_scale,
        };
        (self.center - half, self.center + half)
    }

    /// Frequency beyond which the energy-weighted spectrum of R(t)^3 is
    /// negligible.
    pub fn spectral_support(&self) -> f64 {
        match self.kind {
            TrackKind::GaussianPulse => 16.0 / self.time_scale,
            TrackKind::CompactBump => 320.0 / self.time_scale,
        }
    }

    pub fn default_window(&self) -> [f64; 2] {
        let half = match self.kind {
            TrackKind::GaussianPulse => 8.0 * self.time_scale,
            TrackKind::CompactBump => 1.5 * self.time_scale,
        };
        [self.center - half, self.center + half]
    }

    /// max |dR/dt|, sampled on a fine grid.
    pub fn max_rate(&self) -> f64 {
        let (a, b) = self.time_support();
        (0..=4000)
            .map(|i| self.rate(a + (b - a) * i as f64 / 4000.0).abs())
            .fold(0.0, f64::max)
    }

    fn rescaled(&self, s: f64) -> Self {
        Self {
            base: self.base * s,
            excursion: self.excursion * s,
            time_scale: self.time_scale * s,
            center: self.center * s,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DielectricProfile {
    /// ε = 1 inside R(t), ε_∞ outside.
    SharpBubble { track: RadiusTrack },
    /// tanh wall of width δ between 1 inside and ε_∞ outside.
    SmoothBubble { track: RadiusTrack, wall_width: f64 },
    /// ε = ε_∞ − (ε_∞ − 1)·A·exp(−r²/L²)·exp(−((t − t₀)/T)²).
    GaussianBlob { amplitude: f64, length: f64, time_scale: f64, center: f64 },
}

impl DielectricProfile {
    pub fn kind(&self) -> ProfileKind {
        match self {
            DielectricProfile::SharpBubble { .. } => ProfileKind::SharpBubble,
            DielectricProfile::SmoothBubble { .. } => ProfileKind::SmoothBubble,
            DielectricProfile::GaussianBlob { .. } => ProfileKind::GaussianBlob,
        }
    }

    pub fn track(&self) -> Option<&RadiusTrack> {
        match self {
            DielectricProfile::SharpBubble { track } | DielectricProfile::SmoothBubble { track, .. } => {
                Some(track)
            }
            DielectricProfile::GaussianBlob { .. } => None,
        }
    }

    pub fn epsilon(&self, eps_inf: f64, r: f64, t: f64) -> f64 {
        match self {
            DielectricProfile::SharpBubble { track } => {
                if r < track.radius(t) {
                    1.0
                } else {
                    eps_inf
                }
            }
            DielectricProfile::SmoothBubble { track, wall_width } => {
                smooth_wall_epsilon(eps_inf, (r - track.radius(t)) / wall_width)
            }
            DielectricProfile::GaussianBlob { amplitude, length, time_scale, center } => {
                let s = (t - center) / time_scale;
                eps_inf - (eps_inf - 1.0) * amplitude * (-(r * r) / (length * length) - s * s).exp()
            }
        }
    }

    pub fn xi(&self, eps_inf: f64, r: f64, t: f64) -> f64 {
        0.5 * (1.0 / self.epsilon(eps_inf, r, t) - 1.0 / eps_inf)
    }

    /// Limit of ξ(r, t) for t → ±∞.
    pub fn xi_static(&self, eps_inf: f64, r: f64) -> f64 {
        match self {
            DielectricProfile::SharpBubble { track } => {
                if r < track.base {
                    0.5 * (1.0 - 1.0 / eps_inf)
                } else {
                    0.0
                }
            }
            DielectricProfile::SmoothBubble { track, wall_width } => {
                0.5 * (1.0 / smooth_wall_epsilon(eps_inf, (r - track.base) / wall_width) - 1.0 / eps_inf)
            }
            DielectricProfile::GaussianBlob { .. } => 0.0,
        }
    }

    /// ξ(r, t) − ξ_static(r): the part that actually radiates.
    pub fn xi_dynamic(&self, eps_inf: f64, r: f64, t: f64) -> f64 {
        self.xi(eps_inf, r, t) - self.xi_static(eps_inf, r)
    }

    /// ξ at fixed r as a jet in t. Not defined for the sharp wall, whose
    /// t-derivatives at fixed r are distributions.
    pub fn xi_jet(&self, eps_inf: f64, r: f64, t: f64, order: usize) -> Option<Jet> {
        let eps = match self {
            DielectricProfile::SharpBubble { .. } => return None,
            DielectricProfile::SmoothBubble { track, wall_width } => {
                let y = (-&track.jet(t, order)).add_scalar(r).scale(1.0 / wall_width);
                y.tanh().add_scalar(1.0).scale(0.5 * (eps_inf - 1.0)).add_scalar(1.0)
            }
            DielectricProfile::GaussianBlob { amplitude, length, time_scale, center } => {
                let s = Jet::variable(t, order).add_scalar(-center).scale(1.0 / time_scale);
                let g = (-(&s * &s)).exp();
                let spatial = amplitude * (-(r * r) / (length * length)).exp();
                g.scale(-(eps_inf - 1.0) * spatial).add_scalar(eps_inf)
            }
        };
        Some(eps.recip().add_scalar(-1.0 / eps_inf).scale(0.5))
    }

    /// Radius beyond which ε = ε_∞ to below 1e-12 relative, for all t.
    pub fn support_radius(&self) -> f64 {
        match self {
            DielectricProfile::SharpBubble { track } => track.r_max(),
            DielectricProfile::SmoothBubble { track, wall_width } => track.r_max() + 20.0 * wall_width,
            DielectricProfile::GaussianBlob { length, .. } => 6.0 * length,
        }
    }

    pub fn r_max(&self) -> f64 {
        match self {
            DielectricProfile::GaussianBlob { length, .. } => *length,
            _ => self.track().map(RadiusTrack::r_max).unwrap_or(0.0),
        }
    }

    /// Shortest declared time scale T_min.
    pub fn time_scale(&self) -> f64 {
        match self {
            DielectricProfile::GaussianBlob { time_scale, .. } => *time_scale,
            _ => self.track().map(|t| t.time_scale).unwrap_or(1.0),
        }
    }

    pub fn center_time(&self) -> f64 {
        match self {
            DielectricProfile::GaussianBlob { center, .. } => *center,
            _ => self.track().map(|t| t.center).unwrap_or(0.0),
        }
    }

    /// Time shape of the disturbance (0 when switched off).
    pub fn pulse(&self, t: f64) -> f64 {
        match self {
            DielectricProfile::GaussianBlob { time_scale, center, .. } => {
                let s = (t - center) / time_scale;
                (-s * s).exp()
            }
            _ => self.track().map(|tr| tr.shape(t)).unwrap_or(0.0),
        }
    }

    pub fn time_support(&self) -> (f64, f64) {
        match self {
            DielectricProfile::GaussianBlob { time_scale, center, .. } => {
                (center - 6.5 * time_scale, center + 6.5 * time_scale)
            }
            _ => self.track().map(RadiusTrack::time_support).unwrap_or((0.0, 0.0)),
        }
    }

    /// Frequency above which ξ̃ is negligible in the energy-weighted sense.
    pub fn spectral_support(&self, eps_inf: f64) -> f64 {
        match self {
            DielectricProfile::GaussianBlob { amplitude, time_scale, .. } => {
                // 1/ε expands in powers of the pulse with ratio ρ; the j-th
                // power has temporal width T/√j
                let rho = ((eps_inf - 1.0) * amplitude / eps_inf).max(1e-300);
                let j = if rho < 1.0 { (-18.4 / rho.ln()).ceil().clamp(1.0, 60.0) } else { 60.0 };
                (16.0 / time_scale) * (j / 3.0).sqrt().max(1.0)
            }
            _ => self.track().map(RadiusTrack::spectral_support).unwrap_or(1.0),
        }
    }

    pub fn default_window(&self) -> [f64; 2] {
        match self {
            DielectricProfile::GaussianBlob { time_scale, center, .. } => {
                [center - 8.0 * time_scale, center + 8.0 * time_scale]
            }
            _ => self.track().map(RadiusTrack::default_window).unwrap_or([-1.0, 1.0]),
        }
    }

    /// Panel breakpoints in r covering where ξ_dynamic(·, t) is supported.
    pub fn radial_breakpoints(&self, t: f64, wall_panels: usize) -> Vec<f64> {
        match self {
            DielectricProfile::SharpBubble { track } => {
                let (a, b) = minmax(track.base, track.radius(t));
                vec![a, b]
            }
            DielectricProfile::SmoothBubble { track, wall_width } => {
                let (a, b) = minmax(track.base, track.radius(t));
                let lo = (a - 20.0 * wall_width).max(0.0);
                let hi = b + 20.0 * wall_width;
                let mut br = Vec::new();
                if lo > 0.0 {
                    br.extend(crate::quadrature::linspace(0.0, lo, 3));
                    br.pop();
                }
                let n = wall_panels + ((b - a) / wall_width).ceil() as usize;
                br.extend(crate::quadrature::linspace(lo, hi, n + 1));
                br
            }
            DielectricProfile::GaussianBlob { length, .. } => {
                crate::quadrature::linspace(0.0, 8.0 * length, wall_panels.max(4) + 1)
            }
        }
    }

    fn rescaled(&self, s: f64) -> Self {
        match self {
            DielectricProfile::SharpBubble { track } => {
                DielectricProfile::SharpBubble { track: track.rescaled(s) }
            }
            DielectricProfile::SmoothBubble { track, wall_width } => DielectricProfile::SmoothBubble {
                track: track.rescaled(s),
                wall_width: wall_width * s,
            },
            DielectricProfile::GaussianBlob { amplitude, length, time_scale, center } => {
                DielectricProfile::GaussianBlob {
                    amplitude: *amplitude,
                    length: length * s,
                    time_scale: time_scale * s,
                    center: center * s,
                }
            }
        }
    }
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// ε across a tanh wall; `y` is the signed distance in wall widths.
fn smooth_wall_epsilon(eps_inf: f64, y: f64) -> f64 {
    1.0 + (eps_inf - 1.0) * 0.5 * (1.0 + y.tanh())
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityProfile {
    /// β = Ṙ R²/r² ê_r outside the bubble, zero inside.
    IncompressibleAroundBubble { track: RadiusTrack, beta_max: f64 },
    /// β = Ṙ ê_r everywhere.
    UniformRadial { track: RadiusTrack, beta_max: f64 },
    /// β = β₀·exp(−((t − t₀)/T)²), uniform in space.
    RigidTranslation { beta: [f64; 3], time_scale: f64, center: f64, beta_max: f64 },
}

impl VelocityProfile {
    pub fn kind(&self) -> VelocityKind {
        match self {
            VelocityProfile::IncompressibleAroundBubble { .. } => VelocityKind::IncompressibleAroundBubble,
            VelocityProfile::UniformRadial { .. } => VelocityKind::UniformRadial,
            VelocityProfile::RigidTranslation { .. } => VelocityKind::RigidTranslation,
        }
    }

    pub fn track(&self) -> Option<&RadiusTrack> {
        match self {
            VelocityProfile::IncompressibleAroundBubble { track, .. }
            | VelocityProfile::UniformRadial { track, .. } => Some(track),
            VelocityProfile::RigidTranslation { .. } => None,
        }
    }

    pub fn beta_max(&self) -> f64 {
        match self {
            VelocityProfile::IncompressibleAroundBubble { beta_max, .. }
            | VelocityProfile::UniformRadial { beta_max, .. }
            | VelocityProfile::RigidTranslation { beta_max, .. } => *beta_max,
        }
    }

    pub fn beta(&self, r: [f64; 3], t: f64) -> [f64; 3] {
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        match self {
            VelocityProfile::IncompressibleAroundBubble { track, .. } => {
                let radius = track.radius(t);
                if norm < radius || norm == 0.0 {
                    return [0.0; 3];
                }
                let mag = track.rate(t) * radius * radius / (norm * norm);
                r.map(|x| mag * x / norm)
            }
            VelocityProfile::UniformRadial { track, .. } => {
                if norm == 0.0 {
                    return [0.0; 3];
                }
                let mag = track.rate(t);
                r.map(|x| mag * x / norm)
            }
            VelocityProfile::RigidTranslation { beta, time_scale, center, .. } => {
                let s = (t - center) / time_scale;
                let g = (-s * s).exp();
                beta.map(|b| b * g)
            }
        }
    }

    /// Largest |β| the profile attains (outside the bubble for the
    /// incompressible flow).
    pub fn peak_speed(&self) -> f64 {
        match self {
            VelocityProfile::IncompressibleAroundBubble { track, .. }
            | VelocityProfile::UniformRadial { track, .. } => track.max_rate(),
            VelocityProfile::RigidTranslation { beta, .. } => {
                (beta[0] * beta[0] + beta[1] * beta[1] + beta[2] * beta[2]).sqrt()
            }
        }
    }

    fn rescaled(&self, s: f64) -> Self {
        match self {
            VelocityProfile::IncompressibleAroundBubble { track, beta_max } => {
                VelocityProfile::IncompressibleAroundBubble { track: track.rescaled(s), beta_max: *beta_max }
            }
            VelocityProfile::UniformRadial { track, beta_max } => {
                VelocityProfile::UniformRadial { track: track.rescaled(s), beta_max: *beta_max }
            }
            VelocityProfile::RigidTranslation { beta, time_scale, center, beta_max } => {
                VelocityProfile::RigidTranslation {
                    beta: *beta,
                    time_scale: time_scale * s,
                    center: center * s,
                    beta_max: *beta_max,
                }
            }
        }
    }
}

/// A validated scenario. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub epsilon_inf: f64,
    pub profile: DielectricProfile,
    pub velocity: Option<VelocityProfile>,
    pub cutoff_k: f64,
    pub time_window: [f64; 2],
    pub quadrature: QuadratureSettings,
    pub potential_probe: Option<PotentialProbe>,
    pub units_note: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Ignore unknown keys instead of rejecting them.
    pub lax: bool,
}

/// Read and validate a scenario file, rejecting unknown keys.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    load_scenario_with(path, LoadOptions::default())
}

pub fn load_scenario_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    ScenarioConfig::from_json_str(&text, opts)
}

fn require(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Validation(format!("missing {what}")))
}

fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg.into()))
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    check(v.is_finite(), format!("{name} must be finite"))?;
    Ok(v)
}

fn build_track(
    kind: Option<TrackKind>,
    r0: Option<f64>,
    dr: Option<f64>,
    tau: Option<f64>,
    t0: Option<f64>,
    ctx: &str,
) -> Result<RadiusTrack> {
    let base = finite("R0", require(r0, &format!("{ctx}.R0"))?)?;
    let excursion = finite("dR", require(dr, &format!("{ctx}.dR"))?)?;
    let time_scale = finite("T", require(tau, &format!("{ctx}.T"))?)?;
    let center = finite("t0", t0.unwrap_or(0.0))?;
    check(base >= 0.0, format!("{ctx}.R0 must be >= 0"))?;
    check(time_scale > 0.0, format!("{ctx}.T must be > 0"))?;
    check(base + excursion.min(0.0) > 0.0 || (base == 0.0 && excursion > 0.0),
        format!("{ctx}: R(t) = R0 + dR*pulse must stay positive"))?;
    Ok(RadiusTrack { kind: kind.unwrap_or_default(), base, excursion, time_scale, center })
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str, opts: LoadOptions) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::Parse(e.to_string()))?;
        if !unknown.is_empty() {
            if opts.lax {
                log::warn!("ignoring unknown scenario keys: {}", unknown.join(", "));
            } else {
                return Err(Error::Parse(format!("unknown keys: {}", unknown.join(", "))));
            }
        }
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let eps = finite("epsilon_inf", file.epsilon_inf)?;
        check(eps >= 1.0, "epsilon_inf must be ≥ 1")?;
        let cutoff_k = finite("cutoff_k", file.cutoff_k)?;
        check(cutoff_k > 0.0, "cutoff_k must be > 0")?;

        let p = &file.profile;
        let profile = match p.kind {
            ProfileKind::SharpBubble => DielectricProfile::SharpBubble {
                track: build_track(p.track, p.r0, p.dr, p.time_scale, p.t0, "profile")?,
            },
            ProfileKind::SmoothBubble => {
                let track = build_track(p.track, p.r0, p.dr, p.time_scale, p.t0, "profile")?;
                let wall_width = p.wall_width.unwrap_or(0.05 * track.base.max(track.r_max()));
                check(wall_width > 0.0 && wall_width.is_finite(), "profile.wall_width must be > 0 for smooth_bubble")?;
                DielectricProfile::SmoothBubble { track, wall_width }
            }
            ProfileKind::GaussianBlob => {
                let amplitude = finite("amplitude", require(p.amplitude, "profile.amplitude")?)?;
                let length = finite("length", require(p.length, "profile.length")?)?;
                let time_scale = finite("T", require(p.time_scale, "profile.T")?)?;
                check((0.0..=1.0).contains(&amplitude), "profile.amplitude must lie in [0, 1] so that 1 ≤ ε ≤ ε_∞")?;
                check(length > 0.0, "profile.length must be > 0")?;
                check(time_scale > 0.0, "profile.T must be > 0")?;
                DielectricProfile::GaussianBlob { amplitude, length, time_scale, center: p.t0.unwrap_or(0.0) }
            }
        };

        let velocity = match &file.velocity {
            None => None,
            Some(v) => Some(build_velocity(v, profile.track())?),
        };

        let time_window = file.time_window.unwrap_or_else(|| profile.default_window());
        check(time_window[0].is_finite() && time_window[1].is_finite(), "time_window must be finite")?;
        check(time_window[0] < time_window[1], "time_window must satisfy t_min < t_max")?;
        // the 5% taper zones at each end must see a switched-off pulse
        let taper = 0.05 * (time_window[1] - time_window[0]);
        let edge = profile.pulse(time_window[0] + taper).max(profile.pulse(time_window[1] - taper));
        check(
            edge <= NEGLIGIBLE,
            format!(
                "time_window [{}, {}] does not contain the disturbance (pulse amplitude {edge:.2e} inside the edge taper)",
                time_window[0], time_window[1]
            ),
        )?;

        let q = &file.quadrature;
        check(q.n_k >= 1 && q.n_mu >= 1 && q.n_t >= 1, "quadrature panel counts must be >= 1")?;
        check(q.n_q >= 8 && q.n_omega >= 8, "quadrature.n_q and n_omega must be >= 8")?;
        check(q.n_r >= 1, "quadrature.n_r must be >= 1")?;
        check(q.tol > 0.0 && q.tol < 1.0, "quadrature.tol must lie in (0, 1)")?;

        if let Some(probe) = &file.potential_probe {
            probe.validate()?;
        }

        Ok(Self {
            epsilon_inf: eps,
            profile,
            velocity,
            cutoff_k,
            time_window,
            quadrature: file.quadrature.clone(),
            potential_probe: file.potential_probe.clone(),
            units_note: file.units_note.clone().unwrap_or_else(|| UNITS_NOTE.to_string()),
        })
    }

    /// Canonical file form, with every default filled in.
    pub fn to_file(&self) -> ScenarioFile {
        let profile = match &self.profile {
            DielectricProfile::SharpBubble { track } => track_spec(ProfileKind::SharpBubble, track, None),
            DielectricProfile::SmoothBubble { track, wall_width } => {
                track_spec(ProfileKind::SmoothBubble, track, Some(*wall_width))
            }
            DielectricProfile::GaussianBlob { amplitude, length, time_scale, center } => ProfileSpec {
                kind: ProfileKind::GaussianBlob,
                r0: None,
                dr: None,
                time_scale: Some(*time_scale),
                t0: Some(*center),
                wall_width: None,
                track: None,
                amplitude: Some(*amplitude),
                length: Some(*length),
            },
        };
        let velocity = self.velocity.as_ref().map(|v| {
            let mut spec = VelocitySpec {
                kind: v.kind(),
                r0: None,
                dr: None,
                time_scale: None,
                t0: None,
                track: None,
                beta: None,
                beta_max: Some(v.beta_max()),
            };
            match v {
                VelocityProfile::IncompressibleAroundBubble { track, .. }
                | VelocityProfile::UniformRadial { track, .. } => {
                    spec.r0 = Some(track.base);
                    spec.dr = Some(track.excursion);
                    spec.time_scale = Some(track.time_scale);
                    spec.t0 = Some(track.center);
                    spec.track = Some(track.kind);
                }
                VelocityProfile::RigidTranslation { beta, time_scale, center, .. } => {
                    spec.beta = Some(*beta);
                    spec.time_scale = Some(*time_scale);
                    spec.t0 = Some(*center);
                }
            }
            spec
        });
        ScenarioFile {
            epsilon_inf: self.epsilon_inf,
            profile,
            velocity,
            cutoff_k: self.cutoff_k,
            time_window: Some(self.time_window),
            quadrature: self.quadrature.clone(),
            potential_probe: self.potential_probe.clone(),
            units_note: Some(self.units_note.clone()),
        }
    }

    /// Short content hash of the canonical form.
    pub fn hash(&self) -> ScenarioHash {
        let text = serde_json::to_string(&self.to_file()).expect("scenario serializes");
        ScenarioHash::of_text(&text)
    }

    pub fn eval_xi(&self, r: f64, t: f64) -> f64 {
        self.profile.xi(self.epsilon_inf, r, t)
    }

    pub fn eval_epsilon(&self, r: f64, t: f64) -> f64 {
        self.profile.epsilon(self.epsilon_inf, r, t)
    }

    pub fn eval_beta(&self, r: [f64; 3], t: f64) -> Result<[f64; 3]> {
        self.velocity.as_ref().map(|v| v.beta(r, t)).ok_or(Error::NoVelocityProfile)
    }

    /// Same physics with every length and time multiplied by `s`.
    pub fn rescaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.profile = self.profile.rescaled(s);
        out.velocity = self.velocity.as_ref().map(|v| v.rescaled(s));
        out.cutoff_k = self.cutoff_k / s;
        out.time_window = [self.time_window[0] * s, self.time_window[1] * s];
        out.potential_probe = self.potential_probe.as_ref().map(|p| p.rescaled(s));
        out
    }

    /// The smooth reference bubble used throughout the tests:
    /// ε_∞ = 1.78, R₀ = 1, ΔR = 0.02, T = 50, δ = 0.05, K_c = 4.
    pub fn reference() -> Self {
        let file = ScenarioFile {
            epsilon_inf: 1.78,
            profile: ProfileSpec {
                kind: ProfileKind::SmoothBubble,
                r0: Some(1.0),
                dr: Some(0.02),
                time_scale: Some(50.0),
                t0: Some(0.0),
                wall_width: Some(0.05),
                track: Some(TrackKind::GaussianPulse),
                amplitude: None,
                length: None,
            },
            velocity: None,
            cutoff_k: 4.0,
            time_window: Some([-400.0, 400.0]),
            quadrature: QuadratureSettings::default(),
            potential_probe: None,
            units_note: None,
        };
        Self::from_file(file).expect("reference scenario is valid")
    }
}

fn track_spec(kind: ProfileKind, track: &RadiusTrack, wall_width: Option<f64>) -> ProfileSpec {
    ProfileSpec {
        kind,
        r0: Some(track.base),
        dr: Some(track.excursion),
        time_scale: Some(track.time_scale),
        t0: Some(track.center),
        wall_width,
        track: Some(track.kind),
        amplitude: None,
        length: None,
    }
}

fn build_velocity(v: &VelocitySpec, profile_track: Option<&RadiusTrack>) -> Result<VelocityProfile> {
    let beta_max = v.beta_max.unwrap_or(DEFAULT_BETA_MAX);
    check(beta_max > 0.0 && beta_max < 1.0, "velocity.beta_max must lie in (0, 1)")?;
    let track = || -> Result<RadiusTrack> {
        if v.r0.is_some() || v.dr.is_some() {
            build_track(v.track, v.r0, v.dr, v.time_scale, v.t0, "velocity")
        } else {
            profile_track.copied().ok_or_else(|| {
                Error::Validation("velocity needs R0/dR/T or a bubble profile to borrow them from".into())
            })
        }
    };
    let profile = match v.kind {
        VelocityKind::IncompressibleAroundBubble => {
            VelocityProfile::IncompressibleAroundBubble { track: track()?, beta_max }
        }
        VelocityKind::UniformRadial => VelocityProfile::UniformRadial { track: track()?, beta_max },
        VelocityKind::RigidTranslation => {
            let beta = v.beta.ok_or_else(|| Error::Validation("missing velocity.beta".into()))?;
            let time_scale = require(v.time_scale, "velocity.T")?;
            check(time_scale > 0.0, "velocity.T must be > 0")?;
            check(beta.iter().all(|b| b.is_finite()), "velocity.beta must be finite")?;
            VelocityProfile::RigidTranslation { beta, time_scale, center: v.t0.unwrap_or(0.0), beta_max }
        }
    };
    let peak = profile.peak_speed();
    check(
        peak <= beta_max,
        format!("peak medium speed {peak:.3e} exceeds beta_max = {beta_max} (first-order velocity expansion)"),
    )?;
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioHash(pub String);

impl ScenarioHash {
    /// First 16 hex digits of the SHA-256 of `text`.
    pub fn of_text(text: &str) -> Self {
        let digest = Sha256::digest(text.as_bytes());
        ScenarioHash(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}

impl fmt::Display for ScenarioHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;
    use std::f64::consts::PI;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::from_json_str(text, LoadOptions::default())
    }

    const MINIMAL: &str = r#"{
        "epsilon_inf": 1.78,
        "profile": {"kind": "sharp_bubble", "R0": 1.0, "dR": 0.2, "T": 10.0},
        "cutoff_k": 4.0
    }"#;

    #[test]
    fn minimal_bubble_is_valid() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.epsilon_inf, 1.78);
        assert!(cfg.velocity.is_none());
        assert_eq!(cfg.time_window, [-80.0, 80.0]);
    }

    #[test]
    fn rejects_subunit_permittivity() {
        let text = MINIMAL.replace("1.78", "0.5");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("epsilon_inf must be ≥ 1"), "{err}");
    }

    #[test]
    fn unknown_keys_strict_and_lax() {
        let text = MINIMAL.replace("\"cutoff_k\"", "\"colour\": 3, \"cutoff_k\"");
        assert!(matches!(parse(&text), Err(Error::Parse(_))));
        assert!(ScenarioConfig::from_json_str(&text, LoadOptions { lax: true }).is_ok());
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(parse("{ not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn window_must_contain_pulse() {
        let text = MINIMAL.replace("\"cutoff_k\": 4.0", "\"cutoff_k\": 4.0, \"time_window\": [-20, 20]");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("does not contain"), "{err}");
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = ScenarioConfig::reference();
        let again = ScenarioConfig::from_file(cfg.to_file()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), cfg.rescaled(2.0).hash());
    }

    #[test]
    fn sharp_bubble_xi_inside() {
        let text = MINIMAL.replace("1.78", "2.0");
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.eval_xi(0.5, 0.0), 0.25);
        assert_eq!(cfg.eval_xi(50.0, 0.0), 0.0);
    }

    #[test]
    fn smooth_bubble_converges_to_sharp() {
        let track = RadiusTrack::gaussian(1.0, 0.2, 10.0, 0.0);
        let sharp = DielectricProfile::SharpBubble { track };
        let smooth = DielectricProfile::SmoothBubble { track, wall_width: 1e-3 };
        let eps = 1.78;
        let t = 3.0;
        let wall = track.radius(t);
        for i in 0..400 {
            let r = 3.0 * i as f64 / 400.0;
            if (r - wall).abs() < 0.05 {
                continue;
            }
            let d = (smooth.xi(eps, r, t) - sharp.xi(eps, r, t)).abs();
            assert!(d < 1e-12, "r={r}: {d}");
        }
    }

    #[test]
    fn epsilon_stays_between_one_and_background() {
        let eps = 2.5;
        let profiles = [
            DielectricProfile::SharpBubble { track: RadiusTrack::gaussian(1.0, 0.3, 2.0, 0.0) },
            DielectricProfile::SmoothBubble { track: RadiusTrack::bump(1.0, -0.3, 2.0, 0.0), wall_width: 0.1 },
            DielectricProfile::GaussianBlob { amplitude: 1.0, length: 0.7, time_scale: 2.0, center: 0.0 },
        ];
        for p in &profiles {
            for i in 0..60 {
                for j in 0..30 {
                    let e = p.epsilon(eps, 0.05 * i as f64, -3.0 + 0.2 * j as f64);
                    assert!((1.0..=eps).contains(&e));
                    assert!(p.xi(eps, 0.05 * i as f64, 0.1) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn localization_far_field() {
        let eps = 1.78;
        let profiles = [
            DielectricProfile::SharpBubble { track: RadiusTrack::gaussian(1.0, 0.3, 2.0, 0.0) },
            DielectricProfile::SmoothBubble { track: RadiusTrack::gaussian(1.0, 0.3, 2.0, 0.0), wall_width: 0.05 },
            DielectricProfile::SmoothBubble { track: RadiusTrack::bump(1.0, 0.3, 2.0, 0.0), wall_width: 0.05 },
            DielectricProfile::GaussianBlob { amplitude: 0.8, length: 0.7, time_scale: 2.0, center: 0.0 },
        ];
        for p in &profiles {
            let far = 10.0 * p.support_radius();
            let compact = matches!(p, DielectricProfile::SharpBubble { .. });
            for i in 0..50 {
                let r = far * (1.0 + i as f64);
                let v = p.xi(eps, r, 0.3).abs();
                if compact {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v < 1e-12, "{p:?} r={r} xi={v}");
                }
            }
            // in time, the radiating part switches off
            for &dt in &[-10.0, 10.0, 40.0] {
                for i in 0..40 {
                    let r = 0.05 * i as f64;
                    let t = p.center_time() + dt * p.time_scale();
                    assert!(p.xi_dynamic(eps, r, t).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sharp_bubble_volume_identity() {
        let track = RadiusTrack::gaussian(1.0, 0.2, 5.0, 0.0);
        let p = DielectricProfile::SharpBubble { track };
        let eps = 1.78;
        for &t in &[-4.0, 0.0, 2.5] {
            let rad = track.radius(t);
            let est = integrate_adaptive(|r| 4.0 * PI * r * r * p.xi(eps, r, t), 0.0, 3.0, &[rad], 1e-14, 1e-13)
                .unwrap();
            let exact = 0.5 * (1.0 - 1.0 / eps) * 4.0 / 3.0 * PI * rad.powi(3);
            assert!((est.value - exact).abs() < 1e-11 * exact);
        }
    }

    #[test]
    fn gaussian_track_derivatives_converge() {
        // ratio test on centered differences of R(t): halving h cuts the error by ~4
        let track = RadiusTrack::gaussian(1.0, 0.3, 2.0, 0.0);
        let t = 0.7;
        for order in 1..=8usize {
            let exact = track.jet(t, order).derivative(order);
            let fd = |h: f64| -> f64 {
                // order-th central difference, binomial weights
                let mut s = 0.0;
                let mut binom = 1.0;
                for k in 0..=order {
                    let x = t + (order as f64 / 2.0 - k as f64) * h;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    s += sign * binom * track.radius(x);
                    binom = binom * (order - k) as f64 / (k + 1) as f64;
                }
                s / h.powi(order as i32)
            };
            let (h1, h2) = (0.2, 0.1);
            let e1 = (fd(h1) - exact).abs();
            let e2 = (fd(h2) - exact).abs();
            let ratio = e1 / e2;
            assert!(ratio > 3.0 && ratio < 5.0, "order {order}: ratio {ratio}");
        }
    }

    #[test]
    fn incompressible_flow_values() {
        let track = RadiusTrack::gaussian(1.0, 0.2, 10.0, 0.0);
        let v = VelocityProfile::IncompressibleAroundBubble { track, beta_max: 0.1 };
        let t = -4.0;
        let (rad, rate) = (track.radius(t), track.rate(t));
        let at_wall = v.beta([0.0, 0.0, rad], t);
        assert!((at_wall[2] - rate).abs() < 1e-15);
        let at_two = v.beta([2.0 * rad, 0.0, 0.0], t);
        assert!((at_two[0] - rate / 4.0).abs() < 1e-15);
        assert_eq!(v.beta([0.0, 0.5 * rad, 0.0], t), [0.0; 3]);
        assert!(rate.abs() <= v.peak_speed());
    }

    #[test]
    fn rigid_velocity_is_uniform() {
        let v = VelocityProfile::RigidTranslation { beta: [0.01, 0.0, -0.02], time_scale: 3.0, center: 0.0, beta_max: 0.1 };
        assert_eq!(v.beta([1.0, 2.0, 3.0], 0.4), v.beta([-7.0, 0.0, 0.1], 0.4));
    }

    #[test]
    fn velocity_requires_profile() {
        let cfg = parse(MINIMAL).unwrap();
        assert!(matches!(cfg.eval_beta([1.0, 0.0, 0.0], 0.0), Err(Error::NoVelocityProfile)));
    }

    #[test]
    fn fast_wall_violates_beta_bound() {
        let text = MINIMAL.replace(
            "\"cutoff_k\"",
            "\"velocity\": {\"kind\": \"uniform_radial\", \"R0\": 1.0, \"dR\": 0.5, \"T\": 1.0}, \"cutoff_k\"",
        );
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("beta_max"), "{err}");
    }
}
