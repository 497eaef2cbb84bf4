//! Time-integrated energy flux through the plane and the flux inner product.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::angular_spectrum::{AngularField, Orientation};
use crate::error::Result;

/// `(2 pi)^3`, doubled for the implicit negative-`k` half of the spectrum.
pub const FLUX_PREFACTOR: f64 = 2.0 * 8.0 * PI * PI * PI;

/// Time-integrated energy flux. Stored as a magnitude; [`FluxValue::signed`]
/// restores the sign convention (downgoing positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxValue {
    pub value: f64,
    pub orientation: Orientation,
}

impl FluxValue {
    pub fn signed(&self) -> f64 {
        match self.orientation {
            Orientation::Down => self.value,
            Orientation::Up => -self.value,
        }
    }
}

/// Quadrature weight `tau_m w_q c0^2 k^4 eta3` of mode `(q, m)` in the flux
/// pairing, without the global prefactor. Zero on evanescent nodes.
pub fn mode_weight(field: &AngularField, q: usize, m: usize) -> f64 {
    let grid = field.grid();
    if !grid.is_propagating(q) {
        return 0.0;
    }
    let band = field.band();
    let k = band.k(m);
    let c0 = band.c0();
    band.weight(m) * grid.weight(q) * c0 * c0 * k.powi(4) * grid.eta3_abs(q)
}

/// Energy flux carried by the propagating part of `field`.
pub fn flux(field: &AngularField) -> FluxValue {
    let value = column_flux(field).iter().sum();
    FluxValue {
        value,
        orientation: field.orientation(),
    }
}

/// Flux contribution of each wavenumber column (trapezoid weight included).
pub fn column_flux(field: &AngularField) -> Vec<f64> {
    let a = field.amplitudes();
    (0..field.band().len())
        .map(|m| {
            let s: f64 = (0..field.grid().n_propagating())
                .map(|q| mode_weight(field, q, m) * a[(q, m)].norm_sqr())
                .sum();
            FLUX_PREFACTOR * s
        })
        .collect()
}

/// Real flux pairing `Re sum u conj(v) c0^2 k^4 eta3` over propagating nodes.
pub fn flux_inner(u: &AngularField, v: &AngularField) -> Result<f64> {
    Ok(flux_inner_complex(u, v)?.re)
}

/// The complex-valued flux pairing; its real part is [`flux_inner`].
pub fn flux_inner_complex(u: &AngularField, v: &AngularField) -> Result<Complex64> {
    u.check_compatible(v)?;
    let (a, b) = (u.amplitudes(), v.amplitudes());
    let mut s = Complex64::new(0.0, 0.0);
    for m in 0..u.band().len() {
        for q in 0..u.grid().n_propagating() {
            s += a[(q, m)] * b[(q, m)].conj() * mode_weight(u, q, m);
        }
    }
    Ok(s * FLUX_PREFACTOR)
}

/// Squared norm of the W space: weight `|eta3|` on every node, evanescent
/// ones included.
pub fn w_norm_sq(field: &AngularField) -> f64 {
    node_range_norm_sq(field, 0..field.grid().len())
}

fn node_range_norm_sq(field: &AngularField, nodes: std::ops::Range<usize>) -> f64 {
    let band = field.band();
    let grid = field.grid();
    let c0 = band.c0();
    let a = field.amplitudes();
    let mut s = 0.0;
    for m in 0..band.len() {
        let km = band.weight(m) * c0 * c0 * band.k(m).powi(4);
        for q in nodes.clone() {
            s += km * grid.weight(q) * grid.eta3_abs(q) * a[(q, m)].norm_sqr();
        }
    }
    FLUX_PREFACTOR * s
}

/// Share of the W-space norm carried by evanescent nodes.
pub fn evanescent_share(field: &AngularField) -> f64 {
    let total = w_norm_sq(field);
    if total == 0.0 {
        return 0.0;
    }
    node_range_norm_sq(field, field.grid().n_propagating()..field.grid().len()) / total
}
