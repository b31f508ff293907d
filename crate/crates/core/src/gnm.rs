//! The geometry-independent matrix G^nm contracting moment derivatives into
//! radiated energy.
//!
//! Only the ε- and 2π-free kernel is stored, as an exact rational:
//! G^nm = kernel(n + m) · ε_∞^{3+n+m} / (2π)³.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

fn factorial(n: usize) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: usize, k: usize) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Exact kernel for order sum N = n + m. Odd ℓ terms vanish identically
/// and are skipped.
fn kernel_of_sum(total: usize) -> BigRational {
    kernel_of_sum_impl(total, true)
}

fn kernel_of_sum_impl(total: usize, skip_odd: bool) -> BigRational {
    let mut sum = BigRational::zero();
    for l in 0..=total {
        if skip_odd && l % 2 == 1 {
            continue;
        }
        let parity = if l % 2 == 0 { 2 } else { 0 };
        let angular = BigRational::new(BigInt::one(), BigInt::from(l + 1))
            + BigRational::new(BigInt::one(), BigInt::from(l + 3));
        let mut inner = BigInt::zero();
        for s in 0..=(total - l) {
            inner += binomial(total - l, s) * factorial(4 + l + 2 * s) * factorial(3 + 2 * total - l - 2 * s);
        }
        let coeff = binomial(total, l) * (BigInt::one() << l) * BigInt::from(parity);
        sum += angular * BigRational::from_integer(coeff * inner);
    }
    sum / BigRational::from_integer(factorial(8 + 2 * total))
}

/// ε- and 2π-free kernel of G^nm.
pub fn gnm_exact(n: usize, m: usize) -> BigRational {
    kernel_of_sum(n + m)
}

fn realize(kernel: &BigRational, total: usize, epsilon_inf: f64) -> f64 {
    let k = kernel.to_f64().expect("kernel is a finite positive rational");
    k * epsilon_inf.powi(3 + total as i32) / (2.0 * PI).powi(3)
}

/// kernel · ε_∞^{3+n+m} / (2π)³ in double precision.
pub fn gnm_numeric(n: usize, m: usize, epsilon_inf: f64) -> f64 {
    realize(&gnm_exact(n, m), n + m, epsilon_inf)
}

/// G^nm for 0 ≤ n, m ≤ n_max at one permittivity.
#[derive(Debug, Clone)]
pub struct GnmTable {
    pub n_max: usize,
    pub epsilon_inf: f64,
    /// Kernel indexed by n + m.
    by_sum: Vec<BigRational>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GnmRow {
    pub n: usize,
    pub m: usize,
    pub kernel_num: String,
    pub kernel_den: String,
    pub kernel: f64,
    pub value_at_epsilon: f64,
}

impl GnmTable {
    pub fn new(n_max: usize, epsilon_inf: f64) -> Self {
        let by_sum = (0..=2 * n_max).map(kernel_of_sum).collect();
        Self { n_max, epsilon_inf, by_sum }
    }

    pub fn kernel(&self, n: usize, m: usize) -> &BigRational {
        &self.by_sum[n + m]
    }

    pub fn value(&self, n: usize, m: usize) -> f64 {
        realize(self.kernel(n, m), n + m, self.epsilon_inf)
    }

    pub fn rows(&self) -> Vec<GnmRow> {
        let mut rows = Vec::new();
        for n in 0..=self.n_max {
            for m in 0..=self.n_max {
                let k = self.kernel(n, m);
                rows.push(GnmRow {
                    n,
                    m,
                    kernel_num: k.numer().to_string(),
                    kernel_den: k.denom().to_string(),
                    kernel: k.to_f64().unwrap_or(f64::NAN),
                    value_at_epsilon: self.value(n, m),
                });
            }
        }
        rows
    }
}
