//! Truncated Taylor series ("jets") in one variable.
//!
//! A jet of order K stores `c[j] = f^(j)(t) / j!` for `j = 0..=K`. Arithmetic
//! on jets propagates exact derivatives through compositions, which is how
//! the closed-form derivative tracks of radius pulses and moment integrals
//! are produced without finite differencing.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Self { c }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    /// The independent variable evaluated at `t`.
    pub fn variable(t: f64, order: usize) -> Self {
        let mut j = Self::constant(t, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn from_coefficients(c: Vec<f64>) -> Self {
        assert!(!c.is_empty());
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// `j`-th derivative.
    pub fn derivative(&self, j: usize) -> f64 {
        if j > self.order() {
            return 0.0;
        }
        let mut fact = 1.0;
        for i in 2..=j {
            fact *= i as f64;
        }
        self.c[j] * fact
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn recip(&self) -> Self {
        let k = self.order();
        let mut b = vec![0.0; k + 1];
        let a0 = self.c[0];
        b[0] = 1.0 / a0;
        for j in 1..=k {
            let mut s = 0.0;
            for i in 1..=j {
                s += self.c[i] * b[j - i];
            }
            b[j] = -s / a0;
        }
        Self { c: b }
    }

    pub fn exp(&self) -> Self {
        let k = self.order();
        let e0 = self.c[0].exp();
        if e0 == 0.0 {
            return Self::zero(k);
        }
        let mut e = vec![0.0; k + 1];
        e[0] = e0;
        for j in 1..=k {
            let mut s = 0.0;
            for i in 1..=j {
                s += i as f64 * self.c[i] * e[j - i];
            }
            e[j] = s / j as f64;
        }
        Self { c: e }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut result = Self::constant(1.0, self.order());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Stable for large |value|: expands in `exp(-2|a|)`.
    pub fn tanh(&self) -> Self {
        if self.c[0] < 0.0 {
            return -(&(-self).tanh());
        }
        let u = self.scale(-2.0).exp();
        let ratio = &u * &u.add_scalar(1.0).recip();
        ratio.scale(-2.0).add_scalar(1.0)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let k = self.order().min(rhs.order());
        let mut c = vec![0.0; k + 1];
        for (j, cj) in c.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..=j {
                s += self.c[i] * rhs.c[j - i];
            }
            *cj = s;
        }
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// k-th derivative of exp(-((t - t0)/T)^2) via physicists' Hermite
/// polynomials: `(-1)^k H_k(s) exp(-s^2) / T^k`.
pub fn gaussian_derivative(t: f64, t0: f64, time_scale: f64, k: usize) -> f64 {
    let s = (t - t0) / time_scale;
    let mut h_prev = 1.0;
    let mut h = 2.0 * s;
    let hk = match k {
        0 => 1.0,
        1 => h,
        _ => {
            for n in 1..k {
                let next = 2.0 * s * h - 2.0 * n as f64 * h_prev;
                h_prev = h;
                h = next;
            }
            h
        }
    };
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * hk * (-s * s).exp() / time_scale.powi(k as i32)
}
