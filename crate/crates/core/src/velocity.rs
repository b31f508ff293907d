//! On-shell Fourier transforms of medium velocity fields and their small-k
//! behaviour.
//!
//! For a radial field f(r) ê_r the spatial transform is
//! ∫d³r e^{ik·r} f(r) ê_r = 4πi k̂ ∫₀^∞ r² f(r) j₁(kr) dr,
//! so only the longitudinal component along k̂ is nonzero. The temporal
//! transform is taken on shell, Ω = ω_k = k/√ε_∞.
//!
//! The uniform radial flow does not decay in r; it is damped by e^{−r/L}
//! (a smooth radial truncation) and reported for several L.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, CompositeRule, Estimate};
use crate::response::{linear_fit, log_space};
use crate::scenario::{RadiusTrack, TrackKind, VelocityProfile};
use crate::transforms::sinc;
use crate::units::Dimension;

/// Exponent tolerance: α ≥ −EPS_FIT counts as a bounded k → 0 limit.
pub const EPS_FIT: f64 = 0.25;

/// Truncation length in units of 1/k_min for the uniform radial flow.
pub const TRUNCATION_FACTOR: f64 = 10.0;

/// Spherical Bessel j₁(x) = sin x/x² − cos x/x, series near 0.
pub fn bessel_j1(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0))
    } else {
        (x.sin() / x - x.cos()) / x
    }
}

/// c(k) with ∫d³r e^{ik·r} f(r) ê_r = i c(k) k̂, by adaptive quadrature
/// on [0, upper].
pub fn radial_vector_ft(f: impl Fn(f64) -> f64, k: f64, upper: f64, breaks: &[f64]) -> Result<Estimate> {
    let mut br = breaks.to_vec();
    let n = (k * upper / PI).ceil() as usize;
    if n > 1 {
        br.extend(crate::quadrature::linspace(0.0, upper, n + 1));
    }
    let est = integrate_adaptive(|r| r * r * f(r) * bessel_j1(k * r), 0.0, upper, &br, 1e-300, 1e-12)?;
    Ok(Estimate::new(4.0 * PI * est.value, 4.0 * PI * est.error))
}

/// ∫₀^∞ r² j₁(kr) e^{−ηr} dr = 2k/(k² + η²)².
pub fn damped_uniform_integral(k: f64, eta: f64) -> f64 {
    2.0 * k / (k * k + eta * eta).powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub enum VelocityFt {
    /// Longitudinal component k̂·β̃ and the full vector.
    Value { longitudinal: Complex64, vector: [Complex64; 3], error: f64 },
    /// Spatially uniform β: its transform is δ-concentrated at k = 0 and
    /// no photon is created at first order.
    RigidFirstOrderNull,
}

impl VelocityFt {
    pub fn magnitude(&self) -> Option<f64> {
        match self {
            VelocityFt::Value { longitudinal, .. } => Some(longitudinal.norm()),
            VelocityFt::RigidFirstOrderNull => None,
        }
    }
}

fn time_rule(track: &RadiusTrack) -> CompositeRule {
    let [a, b] = track.default_window();
    let panels = match track.kind {
        TrackKind::GaussianPulse => 64,
        TrackKind::CompactBump => 256,
    };
    CompositeRule::uniform(a, b, panels)
}

/// ∫ dt e^{iω(t − t₀)} g(t), GK with embedded error.
fn time_transform(rule: &CompositeRule, t_ref: f64, omega: f64, g: impl Fn(f64) -> f64) -> (Complex64, f64) {
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for p in 0..rule.panels() {
        let mut k = Complex64::new(0.0, 0.0);
        let mut gs = Complex64::new(0.0, 0.0);
        for i in p * 15..(p + 1) * 15 {
            let t = rule.nodes[i];
            let v = Complex64::from_polar(g(t), omega * (t - t_ref));
            k += v * rule.weights[i];
            gs += v * rule.gauss_weights[i];
        }
        total += k;
        err += (k - gs).norm();
    }
    (total, err)
}

/// β̃(k k̂, ω_k). `truncation` is the damping length L for the uniform
/// radial flow (ignored otherwise).
pub fn velocity_ft(
    profile: &VelocityProfile,
    k: f64,
    direction: [f64; 3],
    epsilon_inf: f64,
    truncation: Option<f64>,
) -> Result<VelocityFt> {
    if !(k > 0.0) {
        return Err(Error::Validation("velocity transform needs k > 0".into()));
    }
    let norm = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Validation("direction must be a nonzero vector".into()));
    }
    let khat = direction.map(|d| d / norm);
    let omega = k / epsilon_inf.sqrt();
    let i = Complex64::new(0.0, 1.0);
    let (coef, err) = match profile {
        VelocityProfile::RigidTranslation { .. } => return Ok(VelocityFt::RigidFirstOrderNull),
        VelocityProfile::IncompressibleAroundBubble { track, .. } => {
            // spatial: 4πi Ṙ R² ∫_R^∞ j₁(kr) dr = 4πi Ṙ R² j₀(kR)/k
            let rule = time_rule(track);
            time_transform(&rule, track.center, omega, |t| {
                let r = track.radius(t);
                4.0 * PI * track.rate(t) * r * r * sinc(k * r) / k
            })
        }
        VelocityProfile::UniformRadial { track, .. } => {
            // ∫ r² j₁(kr) dr does not converge for a non-decaying field
            let length = truncation.ok_or_else(|| Error::NonConvergence {
                what: "radial transform of the uniform radial flow diverges; supply a truncation length".into(),
                achieved: f64::INFINITY,
                requested: 0.0,
            })?;
            let spatial = 4.0 * PI * damped_uniform_integral(k, 1.0 / length);
            let rule = time_rule(track);
            let (v, e) = time_transform(&rule, track.center, omega, |t| track.rate(t));
            (v * spatial, e * spatial)
        }
    };
    let longitudinal = i * coef;
    Ok(VelocityFt::Value { longitudinal, vector: khat.map(|c| longitudinal * c), error: err })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Localized,
    Divergent,
    RigidFirstOrderNull,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationPoint {
    pub length: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VelocityDiagnostics {
    pub kind: crate::scenario::VelocityKind,
    pub k_samples: Vec<f64>,
    pub ft_magnitudes: Vec<f64>,
    pub ft_errors: Vec<f64>,
    /// α in |β̃| ~ k^α over the sample window.
    pub low_k_exponent: Option<f64>,
    pub exponent_std_error: Option<f64>,
    /// |β̃(k_min)| / |β̃(2 k_min)| − 1.
    pub growth_per_halving: Option<f64>,
    pub classification: Classification,
    /// |β̃| at the smallest sample, with its length dimension.
    pub magnitude_scale: Option<f64>,
    pub magnitude_dimension: Dimension,
    /// R_max³ for comparison with `magnitude_scale` of a bubble flow.
    pub r_max_cubed: Option<f64>,
    /// Exponent a bounded k → 0 limit would show.
    pub expected_low_k_exponent: Option<f64>,
    /// Photon spectrum expected to follow ω⁴ at low frequency.
    pub omega4_prediction: bool,
    pub photon_number_order: Option<String>,
    pub truncation_sweep: Vec<TruncationPoint>,
}

/// Small-k samples k_max, k_max/2, … (`halvings` + 1 values).
#[derive(Debug, Clone, Copy)]
pub struct FitWindow {
    pub k_max: f64,
    pub halvings: usize,
}

impl FitWindow {
    /// k_max = 0.1/max(T, R_max √ε_∞), six halvings.
    pub fn for_profile(profile: &VelocityProfile, epsilon_inf: f64) -> Self {
        let scale = match profile {
            VelocityProfile::RigidTranslation { time_scale, .. } => *time_scale,
            p => {
                let tr = p.track().expect("radial flows carry a track");
                tr.time_scale.max(tr.r_max() * epsilon_inf.sqrt())
            }
        };
        Self { k_max: 0.1 / scale, halvings: 6 }
    }

    pub fn samples(&self) -> Vec<f64> {
        let k_min = self.k_max / 2f64.powi(self.halvings as i32);
        log_space(k_min, self.k_max, self.halvings + 1)
    }
}

pub fn classify_profile(profile: &VelocityProfile, epsilon_inf: f64, window: Option<FitWindow>) -> Result<VelocityDiagnostics> {
    let window = window.unwrap_or_else(|| FitWindow::for_profile(profile, epsilon_inf));
    let ks = window.samples();
    let kind = profile.kind();
    if let VelocityProfile::RigidTranslation { .. } = profile {
        return Ok(VelocityDiagnostics {
            kind,
            k_samples: ks,
            ft_magnitudes: vec![],
            ft_errors: vec![],
            low_k_exponent: None,
            exponent_std_error: None,
            growth_per_halving: None,
            classification: Classification::RigidFirstOrderNull,
            magnitude_scale: None,
            magnitude_dimension: Dimension(4),
            r_max_cubed: None,
            expected_low_k_exponent: None,
            omega4_prediction: false,
            photon_number_order: Some("O(beta^4)".into()),
            truncation_sweep: vec![],
        });
    }
    let k_min = ks[0];
    let length = TRUNCATION_FACTOR / k_min;
    let values = ks
        .par_iter()
        .map(|&k| velocity_ft(profile, k, [0.0, 0.0, 1.0], epsilon_inf, Some(length)))
        .collect::<Result<Vec<_>>>()?;
    let (mags, errs): (Vec<f64>, Vec<f64>) = values
        .iter()
        .map(|v| match v {
            VelocityFt::Value { longitudinal, error, .. } => (longitudinal.norm(), *error),
            VelocityFt::RigidFirstOrderNull => (0.0, 0.0),
        })
        .unzip();
    if mags.iter().all(|&m| m == 0.0) {
        // β ≡ 0: nothing radiates, trivially bounded
        return Ok(VelocityDiagnostics {
            kind,
            k_samples: ks,
            ft_magnitudes: mags,
            ft_errors: errs,
            low_k_exponent: None,
            exponent_std_error: None,
            growth_per_halving: Some(0.0),
            classification: Classification::Localized,
            magnitude_scale: Some(0.0),
            magnitude_dimension: Dimension(4),
            r_max_cubed: profile.track().map(|t| t.r_max().powi(3)),
            expected_low_k_exponent: Some(0.0),
            omega4_prediction: true,
            photon_number_order: None,
            truncation_sweep: vec![],
        });
    }
    if mags.iter().zip(&errs).any(|(m, e)| !(*m > 0.0) || *e > 0.1 * m) {
        return Err(Error::Fit("velocity transform samples are zero or dominated by quadrature error".into()));
    }
    let x: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let y: Vec<f64> = mags.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let growth = mags[0] / mags[1] - 1.0;
    let bounded = fit.slope >= -EPS_FIT;
    let classification = if bounded { Classification::Localized } else { Classification::Divergent };

    let truncation_sweep = match profile {
        VelocityProfile::UniformRadial { .. } => [1.0, 2.0, 4.0]
            .iter()
            .map(|&f| {
                let l = f * length;
                velocity_ft(profile, k_min, [0.0, 0.0, 1.0], epsilon_inf, Some(l)).map(|v| TruncationPoint {
                    length: l,
                    magnitude: v.magnitude().unwrap_or(0.0),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        _ => vec![],
    };
    let is_bubble_flow = matches!(profile, VelocityProfile::IncompressibleAroundBubble { .. });
    Ok(VelocityDiagnostics {
        kind,
        k_samples: ks,
        ft_magnitudes: mags.clone(),
        ft_errors: errs,
        low_k_exponent: Some(fit.slope),
        exponent_std_error: Some(fit.slope_std_error),
        growth_per_halving: Some(growth),
        classification,
        magnitude_scale: Some(mags[0]),
        magnitude_dimension: Dimension(4),
        r_max_cubed: profile.track().map(|t| t.r_max().powi(3)),
        expected_low_k_exponent: if is_bubble_flow { Some(0.0) } else { None },
        omega4_prediction: classification == Classification::Localized,
        photon_number_order: None,
        truncation_sweep,
    })
}
