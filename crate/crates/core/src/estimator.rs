//! Order-of-magnitude bounds for the quantum radiation of a collapsing
//! bubble of size R_max, duration T_max and frequency cutoff K_c.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Dimension, Quantity};

pub const BOUND_LABEL: &str = "order-of-magnitude bound";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub r_max: f64,
    pub t_max: f64,
    pub k_c: f64,
    /// Quantization volume; only the per-mode bound needs it.
    pub v_quant: Option<f64>,
    /// O(1) prefactor, never claimed accurate.
    pub c_order: f64,
}

impl BoundInputs {
    pub fn new(r_max: f64, t_max: f64, k_c: f64) -> Self {
        Self { r_max, t_max, k_c, v_quant: None, c_order: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [("rmax", self.r_max), ("tmax", self.t_max), ("kc", self.k_c), ("c", self.c_order)];
        for (name, v) in fields.into_iter().chain(self.v_quant.map(|v| ("volume", v))) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("{name} must be finite and ≥ 0")));
            }
        }
        if self.v_quant == Some(0.0) {
            return Err(Error::Validation("volume must be > 0".into()));
        }
        Ok(())
    }
}

/// c · R⁶ T² K⁹, tagged with its length dimension.
pub fn energy_bound_quantity(inputs: &BoundInputs) -> Quantity {
    Quantity::length(inputs.r_max).powi(6)
        * Quantity::time(inputs.t_max).powi(2)
        * Quantity::wavenumber(inputs.k_c).powi(9)
        * Quantity::dimensionless(inputs.c_order)
}

pub fn energy_bound(inputs: &BoundInputs) -> f64 {
    let q = energy_bound_quantity(inputs);
    debug_assert_eq!(q.dim, Dimension::ENERGY);
    q.value
}

/// c · T² R⁶ K⁵ / V, a pure number.
pub fn per_mode_bound(inputs: &BoundInputs) -> Result<f64> {
    let v = inputs.v_quant.ok_or_else(|| Error::MissingInput("per-mode bound needs a quantization volume".into()))?;
    let q = Quantity::time(inputs.t_max).powi(2)
        * Quantity::length(inputs.r_max).powi(6)
        * Quantity::wavenumber(inputs.k_c).powi(5)
        / Quantity::new(v, Dimension::VOLUME)
        * Quantity::dimensionless(inputs.c_order);
    debug_assert_eq!(q.dim, Dimension::DIMENSIONLESS);
    Ok(q.value)
}
