//! Dimension bookkeeping in natural units.
//!
//! With ħ = c = ε₀ = μ₀ = 1 every quantity is a power of one base length:
//! times are lengths, wavenumbers, frequencies and energies are inverse
//! lengths. [`Quantity`] carries that power alongside the value so that
//! composite formulas can be checked for the dimension they claim.

use std::fmt;
use std::ops::{Div, Mul};

use serde::Serialize;

/// Power of the base length unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimension(pub i32);

impl Dimension {
    pub const DIMENSIONLESS: Dimension = Dimension(0);
    pub const LENGTH: Dimension = Dimension(1);
    pub const TIME: Dimension = Dimension(1);
    pub const WAVENUMBER: Dimension = Dimension(-1);
    pub const ENERGY: Dimension = Dimension(-1);
    pub const VOLUME: Dimension = Dimension(3);

    pub fn powi(self, n: i32) -> Dimension {
        Dimension(self.0 * n)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "1"),
            1 => write!(f, "length"),
            p => write!(f, "length^{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub dim: Dimension,
}

impl Quantity {
    pub fn new(value: f64, dim: Dimension) -> Self {
        Self { value, dim }
    }

    pub fn length(value: f64) -> Self {
        Self::new(value, Dimension::LENGTH)
    }

    pub fn time(value: f64) -> Self {
        Self::new(value, Dimension::TIME)
    }

    pub fn wavenumber(value: f64) -> Self {
        Self::new(value, Dimension::WAVENUMBER)
    }

    pub fn dimensionless(value: f64) -> Self {
        Self::new(value, Dimension::DIMENSIONLESS)
    }

    pub fn powi(self, n: i32) -> Self {
        Self::new(self.value.powi(n), self.dim.powi(n))
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.value * factor, self.dim)
    }
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        Quantity::new(self.value * rhs.value, Dimension(self.dim.0 + rhs.dim.0))
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Quantity) -> Quantity {
        Quantity::new(self.value / rhs.value, Dimension(self.dim.0 - rhs.dim.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_from_lengths() {
        let r = Quantity::length(2.0);
        let k = Quantity::wavenumber(3.0);
        let e = r.powi(6) * Quantity::time(1.0).powi(2) * k.powi(9);
        assert_eq!(e.dim, Dimension::ENERGY);
        assert_eq!(e.dim.to_string(), "length^-1");
    }
}
