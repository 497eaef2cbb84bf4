//! Exact scattering for depth-only media: plane-wave reflection coefficients
//! and the resulting diagonal scattering operator.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular_spectrum::{AngularField, DirectionGrid, FrequencyBand, Orientation};
use crate::error::{Error, Result};
use crate::media::LayeredProfile;
use crate::time_reversal::ScatteringBackend;

/// Default exclusion radius near grazing for [`distinguishability_report`].
pub const DEFAULT_GRAZING_EXCLUSION: f64 = 0.98;

/// Vertical wavenumber in a medium of speed `c`, on the branch with
/// nonnegative imaginary part (decaying with depth).
fn vertical_wavenumber(k: f64, rho2: f64, c0: f64, c: f64) -> Complex64 {
    let s = (c0 * c0) / (c * c) - rho2;
    if s >= 0.0 {
        Complex64::new(k * s.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, k * (-s).sqrt())
    }
}

/// Reflection coefficient of a downgoing plane wave with wavenumber `k` and
/// transverse direction `eta_prime`.
///
/// With depth `z = -x3`, the pair `(u, du/dz)` is carried from the bottom
/// half-space (outgoing or decaying: `du/dz = i kappa u`) up through each
/// layer, then matched to `B exp(i kappa0 z) + A exp(-i kappa0 z)` at the
/// plane. Returns `A / B`.
pub fn reflection_coefficient(profile: &LayeredProfile, k: f64, eta_prime: [f64; 2]) -> Result<Complex64> {
    if !(k > 0.0) {
        return Err(Error::invalid("wavenumber", format!("k = {k} must be positive")));
    }
    let rho2 = eta_prime[0] * eta_prime[0] + eta_prime[1] * eta_prime[1];
    if rho2 >= 1.0 {
        return Err(Error::invalid(
            "direction",
            format!("|eta'| = {} is not propagating", rho2.sqrt()),
        ));
    }
    let c0 = profile.c0;
    let kappa_b = vertical_wavenumber(k, rho2, c0, profile.bottom_speed);
    let mut u = Complex64::new(1.0, 0.0);
    let mut uz = Complex64::i() * kappa_b;
    for layer in profile.layers.iter().rev() {
        let kappa = vertical_wavenumber(k, rho2, c0, layer.speed);
        let d = layer.thickness;
        let (nu, nuz) = if kappa.im > 0.0 {
            // cosh/sinh form divided through by cosh to stay bounded
            let alpha = kappa.im;
            let t = (alpha * d).tanh();
            (u - uz * (t / alpha), uz - u * (alpha * t))
        } else if kappa.re == 0.0 {
            (u - uz * d, uz)
        } else {
            let kr = kappa.re;
            let (s, c) = (kr * d).sin_cos();
            (u * c - uz * (s / kr), u * (kr * s) + uz * c)
        };
        let scale = nu.norm().max(nuz.norm());
        u = nu / scale;
        uz = nuz / scale;
    }
    let ik0 = Complex64::i() * (k * (1.0 - rho2).sqrt());
    Ok((ik0 * u - uz) / (ik0 * u + uz))
}

/// Reflection coefficients on every propagating node of a band x grid.
/// Evanescent rows are zero.
#[derive(Debug, Clone)]
pub struct ReflectionTable {
    band: Arc<FrequencyBand>,
    grid: Arc<DirectionGrid>,
    r: DMatrix<Complex64>,
}

impl ReflectionTable {
    pub fn build(profile: &LayeredProfile, band: Arc<FrequencyBand>, grid: Arc<DirectionGrid>) -> Result<Self> {
        let profile = profile.clone().validate()?;
        if (profile.c0 - band.c0()).abs() > 1e-12 * band.c0() {
            return Err(Error::mismatch("profile and band use different background speeds"));
        }
        let np = grid.n_propagating();
        let columns: Vec<Vec<Complex64>> = (0..band.len())
            .into_par_iter()
            .map(|m| {
                (0..grid.len())
                    .map(|q| {
                        if q < np {
                            reflection_coefficient(&profile, band.k(m), grid.node(q))
                        } else {
                            Ok(Complex64::new(0.0, 0.0))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let r = DMatrix::from_fn(grid.len(), band.len(), |q, m| columns[m][q]);
        Ok(Self { band, grid, r })
    }

    pub fn band(&self) -> &Arc<FrequencyBand> {
        &self.band
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    /// `R` at `(node, k_index)`.
    pub fn get(&self, node: usize, k_index: usize) -> Complex64 {
        self.r[(node, k_index)]
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.r
    }

    /// Writes `k, eta1, eta2, re, im` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let field = AngularField::from_amplitudes(
            self.band.clone(),
            self.grid.clone(),
            Orientation::Up,
            self.r.clone(),
        )?;
        field.write_csv(writer)
    }
}

/// Upgoing field `A = R B`: no coupling between modes.
pub fn scatter_1d(table: &ReflectionTable, down: &AngularField) -> Result<AngularField> {
    let ok_band = Arc::ptr_eq(&table.band, down.band()) || *table.band == **down.band();
    let ok_grid = Arc::ptr_eq(&table.grid, down.grid()) || *table.grid == **down.grid();
    if !(ok_band && ok_grid) {
        return Err(Error::mismatch("reflection table and field live on different grids"));
    }
    let amplitudes = down.amplitudes().component_mul(&table.r);
    AngularField::from_amplitudes(down.band().clone(), down.grid().clone(), Orientation::Up, amplitudes)
}

impl ScatteringBackend for ReflectionTable {
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        scatter_1d(self, down)
    }
}

/// Largest `|R|^2` over the table and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Distinguishability {
    pub delta: f64,
    pub k: f64,
    pub eta: [f64; 2],
    pub node: usize,
    pub k_index: usize,
    /// Set when every entry vanishes, so the maximizer is arbitrary.
    pub degenerate: bool,
}

/// `max |R(k, eta')|^2` over propagating nodes with `|eta'| <= exclude_above`
/// (all propagating nodes when `None`).
pub fn distinguishability_1d(table: &ReflectionTable, exclude_above: Option<f64>) -> Result<Distinguishability> {
    let grid = &table.grid;
    let mut best: Option<(f64, usize, usize)> = None;
    for m in 0..table.band.len() {
        for q in 0..grid.n_propagating() {
            if let Some(limit) = exclude_above {
                if grid.radius(q) > limit {
                    continue;
                }
            }
            let v = table.r[(q, m)].norm_sqr();
            if best.is_none_or(|(b, _, _)| v > b) {
                best = Some((v, q, m));
            }
        }
    }
    let (delta, node, k_index) = best.ok_or_else(|| Error::invalid("exclusion", "no grid node survives the exclusion"))?;
    Ok(Distinguishability {
        delta,
        k: table.band.k(k_index),
        eta: grid.node(node),
        node,
        k_index,
        degenerate: delta == 0.0,
    })
}

/// Distinguishability with grazing included and with the default exclusion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DistinguishabilityReport {
    pub with_grazing: Distinguishability,
    pub grazing_excluded: Option<Distinguishability>,
    pub exclusion_radius: f64,
}

pub fn distinguishability_report(table: &ReflectionTable, exclusion_radius: f64) -> Result<DistinguishabilityReport> {
    Ok(DistinguishabilityReport {
        with_grazing: distinguishability_1d(table, None)?,
        grazing_excluded: distinguishability_1d(table, Some(exclusion_radius)).ok(),
        exclusion_radius,
    })
}
