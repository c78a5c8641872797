//! Concave surrogates used by the concave-convex procedure.
//!
//! With the auxiliary variable `z >= |p - u|^2`, the uplink rate
//! `log2(1 + c P / (z + h^2))` is a difference of concave functions of
//! `(z, P)` and the harvested energy `coeff / (z + h^2)` is convex in `z`.
//! Linearizing the convex parts at `z_hat` gives global lower bounds that
//! touch the exact functions at `z = z_hat`.

use std::f64::consts::LN_2;

/// Which side of the link a linearization point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkSide {
    Info,
    Energy,
}

/// Linearization points `z_hat[n][k]` (m^2) for one link side.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationPoint {
    pub side: LinkSide,
    slots: usize,
    gts: usize,
    z_hat: Vec<f64>,
}

impl LinearizationPoint {
    /// Panics if any entry is negative or non-finite.
    pub fn new(side: LinkSide, slots: usize, gts: usize, z_hat: Vec<f64>) -> Self {
        assert_eq!(
            z_hat.len(),
            slots * gts,
            "linearization point has the wrong size"
        );
        assert!(
            z_hat.iter().all(|z| z.is_finite() && *z >= 0.0),
            "linearization point must be finite and >= 0"
        );
        Self {
            side,
            slots,
            gts,
            z_hat,
        }
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.z_hat[n * self.gts + k]
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn gts(&self) -> usize {
        self.gts
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z_hat
    }
}

/// Exact rate `log2(1 + c P / (z + h^2))` written in terms of `z`.
pub fn exact_rate(z: f64, p_ul: f64, h: f64, c: f64) -> f64 {
    (c * p_ul / (z + h * h)).ln_1p() / LN_2
}

/// Exact harvested energy `coeff / (z + h^2)`.
pub fn exact_energy(z: f64, h: f64, coeff: f64) -> f64 {
    coeff / (z + h * h)
}

/// Concave lower bound of [`exact_rate`], tight at `z = z_hat`.
///
/// `log2((z + h^2 + c P) / (z_hat + h^2)) - ((z + h^2) / (z_hat + h^2) - 1) / ln 2`
pub fn rate_lower(z: f64, p_ul: f64, z_hat: f64, h: f64, c: f64) -> f64 {
    let h2 = h * h;
    let b = z_hat + h2;
    let a = z + h2 + c * p_ul;
    ((a / b).ln() - (z + h2) / b + 1.0) / LN_2
}

/// Affine lower bound of [`exact_energy`], tight at `z = z_hat`. May be negative.
pub fn energy_lower(z: f64, z_hat: f64, h: f64, coeff: f64) -> f64 {
    let h2 = h * h;
    let b = z_hat + h2;
    coeff / b * (2.0 - (z + h2) / b)
}

/// Value, gradient and Hessian with respect to `(z, p_ul)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Derivatives of [`rate_lower`]. The Hessian is `-(1 / (a^2 ln 2)) v v^T`
/// with `v = (1, c)`, hence negative semidefinite.
pub fn rate_lower_derivatives(z: f64, p_ul: f64, z_hat: f64, h: f64, c: f64) -> SecondOrder {
    let h2 = h * h;
    let b = z_hat + h2;
    let a = z + h2 + c * p_ul;
    let value = ((a / b).ln() - (z + h2) / b + 1.0) / LN_2;
    let inv_a = 1.0 / a;
    let grad = [(inv_a - 1.0 / b) / LN_2, c * inv_a / LN_2];
    let k = -inv_a * inv_a / LN_2;
    let hess = [[k, k * c], [k * c, k * c * c]];
    SecondOrder { value, grad, hess }
}

/// Derivatives of [`energy_lower`] with respect to `(z, p_ul)`; the bound does
/// not depend on the power, and its slope in `z` is `-coeff / (z_hat + h^2)^2`.
pub fn energy_lower_derivatives(z: f64, z_hat: f64, h: f64, coeff: f64) -> SecondOrder {
    let b = z_hat + h * h;
    SecondOrder {
        value: energy_lower(z, z_hat, h, coeff),
        grad: [-coeff / (b * b), 0.0],
        hess: [[0.0; 2]; 2],
    }
}
