//! Volume-integral scattering from a penetrable voxel scatterer in free space.
//!
//! The total field solves `psi = e - k^2 G (V psi)`. The default solve works
//! with `zeta = |V|^{1/2} psi`, for which the system reads
//! `(I + k^2 K) zeta = |V|^{1/2} e` with `K = |V|^{1/2} G V_{1/2}`.

mod band;
mod convolution;
mod green;
mod krylov;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::angular_spectrum::eta3;
use crate::error::{Error, Result};
use crate::media::VoxelScatterer;

pub use band::{ScatteringBand, ARCHIVE_VERSION};
pub use convolution::GreenConvolution;
pub use green::{ball_integral, equivalent_radius, green};
pub use krylov::{gmres, GmresOutcome};

/// Linear-solver settings for one Lippmann–Schwinger solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LsOptions {
    /// Relative residual demanded of every accepted solve.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Solve for `|V|^{1/2} psi` instead of `psi`.
    pub factored: bool,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            restart: 60,
            factored: true,
        }
    }
}

/// Total field for one incident plane wave `exp(i k d . x)`.
#[derive(Debug, Clone)]
pub struct TotalFieldSolution {
    pub k: f64,
    pub direction: [f64; 3],
    /// `psi` at every voxel center.
    pub psi: Vec<Complex64>,
    /// `V psi` at every voxel center.
    pub source: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Everything about one scatterer at one wavenumber that does not depend on
/// the incident wave. Shared read-only between solves.
pub struct LsSystem<'a> {
    scatterer: &'a VoxelScatterer,
    k: f64,
    conv: GreenConvolution,
    centers: Vec<[f64; 3]>,
    sqrt_abs: Vec<f64>,
    v_half: Vec<f64>,
    options: LsOptions,
}

impl<'a> LsSystem<'a> {
    pub fn new(scatterer: &'a VoxelScatterer, k: f64, options: LsOptions) -> Result<Self> {
        if !(k.is_finite() && k != 0.0) {
            return Err(Error::invalid("wavenumber", format!("k = {k} must be finite and nonzero")));
        }
        if !(options.tol > 0.0) || options.max_iter == 0 || options.restart == 0 {
            return Err(Error::invalid("solver", "tolerance, iteration budget and restart must be positive"));
        }
        let conv = GreenConvolution::new(scatterer.dims, scatterer.spacing, k);
        let centers = (0..scatterer.len()).map(|i| scatterer.center(i)).collect();
        let sqrt_abs: Vec<f64> = scatterer.contrast.iter().map(|v| v.abs().sqrt()).collect();
        let v_half = scatterer
            .contrast
            .iter()
            .zip(&sqrt_abs)
            .map(|(&v, &s)| if s == 0.0 { 0.0 } else { v / s })
            .collect();
        Ok(Self {
            scatterer,
            k,
            conv,
            centers,
            sqrt_abs,
            v_half,
            options,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn scatterer(&self) -> &VoxelScatterer {
        self.scatterer
    }

    /// `exp(i k d . y)` at every voxel center.
    pub fn plane_wave(&self, direction: [Complex64; 3]) -> Vec<Complex64> {
        let ik = Complex64::new(0.0, self.k);
        self.centers
            .iter()
            .map(|y| (ik * (direction[0] * y[0] + direction[1] * y[1] + direction[2] * y[2])).exp())
            .collect()
    }

    pub fn solve(&self, direction: [f64; 3]) -> Result<TotalFieldSolution> {
        let incident = self.plane_wave(direction.map(|d| Complex64::new(d, 0.0)));
        let k2 = self.k * self.k;
        let outcome = if self.options.factored {
            let rhs: Vec<Complex64> = incident.iter().zip(&self.sqrt_abs).map(|(e, s)| e * s).collect();
            let matvec = |z: &[Complex64]| {
                let w: Vec<Complex64> = z.iter().zip(&self.v_half).map(|(z, v)| z * v).collect();
                let gw = self.conv.apply(&w);
                z.iter()
                    .zip(&gw)
                    .zip(&self.sqrt_abs)
                    .map(|((z, g), s)| z + k2 * s * g)
                    .collect::<Vec<_>>()
            };
            krylov::gmres(matvec, &rhs, self.options.tol, self.options.max_iter, self.options.restart)
        } else {
            let v = &self.scatterer.contrast;
            let matvec = |p: &[Complex64]| {
                let w: Vec<Complex64> = p.iter().zip(v).map(|(p, v)| p * v).collect();
                let gw = self.conv.apply(&w);
                p.iter().zip(&gw).map(|(p, g)| p + k2 * g).collect::<Vec<_>>()
            };
            krylov::gmres(matvec, &incident, self.options.tol, self.options.max_iter, self.options.restart)
        };
        if !outcome.converged {
            return Err(Error::SolverDivergence {
                iterations: outcome.iterations,
                residual: outcome.residual,
            });
        }
        let source: Vec<Complex64> = if self.options.factored {
            outcome.x.iter().zip(&self.v_half).map(|(z, v)| z * v).collect()
        } else {
            outcome.x.iter().zip(&self.scatterer.contrast).map(|(p, v)| p * v).collect()
        };
        let psi = if self.options.factored {
            let g = self.conv.apply(&source);
            incident.iter().zip(&g).map(|(e, g)| e - k2 * g).collect()
        } else {
            outcome.x
        };
        Ok(TotalFieldSolution {
            k: self.k,
            direction,
            psi,
            source,
            residual: outcome.residual,
            iterations: outcome.iterations,
        })
    }

    /// `A(k, eta, d) = sum_y exp(-i k eta . y) V(y) psi(y) h^3`; `eta` may
    /// carry a complex vertical component.
    pub fn amplitude(&self, solution: &TotalFieldSolution, eta: [Complex64; 3]) -> Complex64 {
        amplitude_sum(self.k, &self.centers, &solution.source, eta) * self.scatterer.voxel_volume()
    }
}

fn amplitude_sum(k: f64, centers: &[[f64; 3]], source: &[Complex64], eta: [Complex64; 3]) -> Complex64 {
    let mik = Complex64::new(0.0, -k);
    centers
        .iter()
        .zip(source)
        .filter(|(_, s)| s.re != 0.0 || s.im != 0.0)
        .map(|(y, s)| s * (mik * (eta[0] * y[0] + eta[1] * y[1] + eta[2] * y[2])).exp())
        .sum()
}

/// Solves for the total field of the plane wave travelling along `direction`.
pub fn ls_solve(scatterer: &VoxelScatterer, k: f64, direction: [f64; 3], options: LsOptions) -> Result<TotalFieldSolution> {
    check_direction(direction)?;
    LsSystem::new(scatterer, k, options)?.solve(direction)
}

/// Scattering amplitude `A(k, eta, eta_tilde)` for outgoing `eta` and
/// incident `eta_tilde`.
pub fn scattering_amplitude(
    scatterer: &VoxelScatterer,
    k: f64,
    eta: [Complex64; 3],
    eta_tilde: [f64; 3],
    options: LsOptions,
) -> Result<Complex64> {
    check_direction(eta_tilde)?;
    let system = LsSystem::new(scatterer, k, options)?;
    let solution = system.solve(eta_tilde)?;
    Ok(system.amplitude(&solution, eta))
}

/// Born approximation of `A`: the total field replaced by the incident wave.
pub fn born_amplitude(scatterer: &VoxelScatterer, k: f64, eta: [Complex64; 3], eta_tilde: [Complex64; 3]) -> Complex64 {
    let ik = Complex64::new(0.0, k);
    let h3 = scatterer.voxel_volume();
    (0..scatterer.len())
        .filter(|&i| scatterer.contrast[i] != 0.0)
        .map(|i| {
            let y = scatterer.center(i);
            let phase = (eta_tilde[0] - eta[0]) * y[0] + (eta_tilde[1] - eta[1]) * y[1] + (eta_tilde[2] - eta[2]) * y[2];
            (ik * phase).exp() * scatterer.contrast[i]
        })
        .sum::<Complex64>()
        * h3
}

/// Upgoing direction `(eta', eta3)` for a transverse slowness; evanescent
/// slownesses get `eta3 = i sqrt(|eta'|^2 - 1)`.
pub fn upgoing(k: f64, eta_prime: [f64; 2]) -> Result<[Complex64; 3]> {
    let e3 = eta3(k, eta_prime)?;
    Ok([Complex64::new(eta_prime[0], 0.0), Complex64::new(eta_prime[1], 0.0), e3])
}

/// Downgoing direction `(eta', -eta3)`.
pub fn downgoing(k: f64, eta_prime: [f64; 2]) -> Result<[Complex64; 3]> {
    let e3 = eta3(k, eta_prime)?;
    Ok([Complex64::new(eta_prime[0], 0.0), Complex64::new(eta_prime[1], 0.0), -e3])
}

/// Kernel `-(i k / (2 eta3)) A(k, eta^+, eta_tilde^-)` between propagating
/// transverse slownesses.
pub fn s_kernel(
    scatterer: &VoxelScatterer,
    k: f64,
    eta_prime: [f64; 2],
    eta_tilde_prime: [f64; 2],
    options: LsOptions,
) -> Result<Complex64> {
    for e in [eta_prime, eta_tilde_prime] {
        if e[0].hypot(e[1]) >= 1.0 {
            return Err(Error::GrazingSingularity);
        }
    }
    let up = upgoing(k, eta_prime)?;
    let down = downgoing(k, eta_tilde_prime)?;
    let a = scattering_amplitude(scatterer, k, up, down.map(|z| z.re), options)?;
    Ok(kernel_prefactor(k, up[2]) * a)
}

/// Born kernel `-(i k / (2 eta3)) int exp(i k (eta_tilde^- - eta^+) . y) V dy`;
/// either slowness may be evanescent.
pub fn born_kernel(scatterer: &VoxelScatterer, k: f64, eta_prime: [f64; 2], eta_tilde_prime: [f64; 2]) -> Result<Complex64> {
    let up = upgoing(k, eta_prime)?;
    let down = downgoing(k, eta_tilde_prime)?;
    Ok(kernel_prefactor(k, up[2]) * born_amplitude(scatterer, k, up, down))
}

fn kernel_prefactor(k: f64, eta3: Complex64) -> Complex64 {
    Complex64::new(0.0, -k) / (2.0 * eta3)
}

/// Factor turning kernel values into amplitude-to-amplitude matrix entries:
/// the plane-wave expansion of the Green's function carries `(2 pi)^{-2}`.
pub(crate) const KERNEL_TO_AMPLITUDE: f64 = 1.0 / (4.0 * PI * PI);

fn check_direction(d: [f64; 3]) -> Result<()> {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !d.iter().all(|x| x.is_finite()) || (n - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("direction", format!("incident direction {d:?} is not a unit vector")));
    }
    Ok(())
}
