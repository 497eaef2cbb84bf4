//! Iterative time reversal: the power method on
//! `A = T P (S - S0) P T (S - S0)` with test-function normalization.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angular_spectrum::{
    project_propagating, time_reverse, AngularField, DirectionGrid, FrequencyBand, Orientation, TestFunction,
};
use crate::error::{Error, Result};
use crate::flux::{column_flux, flux, flux_inner};

/// Anything that maps a downgoing field on the plane to the upgoing field it
/// produces.
pub trait ScatteringBackend: Send + Sync {
    fn scatter(&self, down: &AngularField) -> Result<AngularField>;
}

impl<B: ScatteringBackend + ?Sized> ScatteringBackend for &B {
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        (**self).scatter(down)
    }
}

impl<B: ScatteringBackend + ?Sized> ScatteringBackend for Arc<B> {
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        (**self).scatter(down)
    }
}

impl<B: ScatteringBackend + ?Sized> ScatteringBackend for Box<B> {
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        (**self).scatter(down)
    }
}

/// Free space: nothing comes back.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroBackend;

impl ScatteringBackend for ZeroBackend {
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        Ok(AngularField::zeros(down.band().clone(), down.grid().clone(), Orientation::Up))
    }
}

/// Backend with a prescribed spectrum.
///
/// In flux-weighted coordinates `x~ = (w eta3)^{1/2} x` the propagating block
/// at wavenumber `k` is `M(k) = sum_l sigma_l(k) a_l (R a_l)^T`, where the
/// `a_l` are orthonormal and `R` mirrors `eta' -> -eta'`. Then `M^T = R M R`,
/// so time reversal realizes the adjoint exactly, and `M^H M` has eigenvalues
/// `sigma_l(k)^2`.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    band: Arc<FrequencyBand>,
    grid: Arc<DirectionGrid>,
    sigmas: Vec<Vec<f64>>,
    shapes: Vec<DVector<Complex64>>,
    leak_depth: Option<f64>,
}

impl SyntheticBackend {
    /// One mode per entry of `eigenvalues`, each listing `lambda_l(k_m)` over
    /// the band. Shapes are drawn at random from `seed`.
    pub fn new(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        eigenvalues: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        let np = grid.n_propagating();
        if eigenvalues.len() > np {
            return Err(Error::invalid("synthetic backend", "more modes than propagating nodes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<DVector<Complex64>> = eigenvalues
            .iter()
            .map(|_| {
                DVector::from_fn(np, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
            })
            .collect();
        Self::with_shapes(band, grid, eigenvalues, raw)
    }

    /// Explicit mode shapes (orthonormalized here, in the given order).
    pub fn with_shapes(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        eigenvalues: Vec<Vec<f64>>,
        shapes: Vec<DVector<Complex64>>,
    ) -> Result<Self> {
        let np = grid.n_propagating();
        if shapes.len() != eigenvalues.len() {
            return Err(Error::mismatch("one shape per planted mode"));
        }
        let mut ortho: Vec<DVector<Complex64>> = Vec::new();
        for s in shapes {
            if s.len() != np {
                return Err(Error::mismatch(format!("shape has {} entries, grid has {np} propagating nodes", s.len())));
            }
            let mut v = s;
            for _ in 0..2 {
                for a in &ortho {
                    let c = a.dotc(&v);
                    v -= a * c;
                }
            }
            let n = v.norm();
            if n < 1e-12 {
                return Err(Error::invalid("synthetic backend", "mode shapes are linearly dependent"));
            }
            ortho.push(v / Complex64::new(n, 0.0));
        }
        let mut sigmas = Vec::with_capacity(eigenvalues.len());
        for lam in &eigenvalues {
            if lam.len() != band.len() {
                return Err(Error::mismatch("eigenvalue curve length differs from band"));
            }
            if lam.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                return Err(Error::invalid("synthetic backend", "eigenvalues must be finite and nonnegative"));
            }
            sigmas.push(lam.iter().map(|l| l.sqrt()).collect());
        }
        Ok(Self {
            band,
            grid,
            sigmas,
            shapes: ortho,
            leak_depth: None,
        })
    }

    /// Single mode with `lambda(k)` given by `curve`.
    pub fn from_curve<F: Fn(f64) -> f64>(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        curve: F,
        seed: u64,
    ) -> Result<Self> {
        let lam = band.k_values().iter().map(|&k| curve(k)).collect();
        Self::new(band, grid, vec![lam], seed)
    }

    /// Lets evanescent amplitudes through with gain `exp(-2 h k sqrt(|eta'|^2 - 1))`,
    /// the decay of a round trip to depth `h`.
    pub fn with_evanescent_leak(mut self, depth: f64) -> Self {
        self.leak_depth = Some(depth);
        self
    }

    pub fn band(&self) -> &Arc<FrequencyBand> {
        &self.band
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.shapes.len()
    }

    /// Planted `lambda_l(k_m)`.
    pub fn eigenvalue(&self, l: usize, m: usize) -> f64 {
        self.sigmas[l][m].powi(2)
    }

    /// Eigenvector of `a(k)` for mode `l` in flux-weighted coordinates:
    /// `conj(R a_l)`.
    pub fn weighted_eigenvector(&self, l: usize) -> DVector<Complex64> {
        let a = &self.shapes[l];
        DVector::from_fn(a.len(), |q, _| a[self.grid.reflected(q)].conj())
    }

    /// The same eigenvector as plain amplitudes on the propagating nodes.
    pub fn eigenvector_amplitudes(&self, l: usize) -> DVector<Complex64> {
        let v = self.weighted_eigenvector(l);
        DVector::from_fn(v.len(), |q, _| v[q] / self.sqrt_weight(q))
    }

    fn sqrt_weight(&self, q: usize) -> f64 {
        (self.grid.weight(q) * self.grid.eta3_abs(q)).sqrt()
    }

    /// `M(k_m)` on the propagating block, flux-weighted.
    pub fn weighted_matrix(&self, m: usize) -> DMatrix<Complex64> {
        let np = self.grid.n_propagating();
        let mut out = DMatrix::zeros(np, np);
        for (a, sig) in self.shapes.iter().zip(&self.sigmas) {
            let s = Complex64::new(sig[m], 0.0);
            for j in 0..np {
                let rj = a[self.grid.reflected(j)] * s;
                for i in 0..np {
                    out[(i, j)] += a[i] * rj;
                }
            }
        }
        out
    }

    fn check(&self, down: &AngularField) -> Result<()> {
        let ok_band = Arc::ptr_eq(&self.band, down.band()) || *self.band == **down.band();
        let ok_grid = Arc::ptr_eq(&self.grid, down.grid()) || *self.grid == **down.grid();
        if ok_band && ok_grid {
            Ok(())
        } else {
            Err(Error::mismatch("synthetic backend and field live on different grids"))
        }
    }
}

impl ScatteringBackend for SyntheticBackend {
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        self.check(down)?;
        let grid = &self.grid;
        let np = grid.n_propagating();
        let mut up = AngularField::zeros(self.band.clone(), grid.clone(), Orientation::Up);
        let x = down.amplitudes();
        for m in 0..self.band.len() {
            let mut y = vec![Complex64::new(0.0, 0.0); np];
            for (a, sig) in self.shapes.iter().zip(&self.sigmas) {
                let mut c = Complex64::new(0.0, 0.0);
                for q in 0..np {
                    c += a[grid.reflected(q)] * x[(q, m)] * self.sqrt_weight(q);
                }
                c *= sig[m];
                for q in 0..np {
                    y[q] += a[q] * c;
                }
            }
            let out = up.amplitudes_mut();
            for q in 0..np {
                out[(q, m)] = y[q] / self.sqrt_weight(q);
            }
            if let Some(h) = self.leak_depth {
                let k = self.band.k(m);
                for q in np..grid.len() {
                    out[(q, m)] = x[(q, m)] * (-2.0 * h * k * grid.eta3_abs(q)).exp();
                }
            }
        }
        Ok(up)
    }
}

/// `S - S0` applied to a downgoing field.
pub fn scatter_difference(
    backend: &dyn ScatteringBackend,
    reference: &dyn ScatteringBackend,
    down: &AngularField,
    pass: usize,
) -> Result<AngularField> {
    let wrap = |e: Error| Error::Backend {
        pass,
        source: Box::new(e),
    };
    let s = backend.scatter(down).map_err(wrap)?;
    let s0 = reference.scatter(down).map_err(wrap)?;
    s.sub(&s0).map_err(wrap)
}

/// One time-reversed difference pass `T P (S - S0) P`. Without the filter
/// both projections are skipped.
pub fn reverse_pass(
    backend: &dyn ScatteringBackend,
    reference: &dyn ScatteringBackend,
    down: &AngularField,
    filter_evanescent: bool,
    pass: usize,
) -> Result<AngularField> {
    let input = if filter_evanescent { project_propagating(down) } else { down.clone() };
    let up = scatter_difference(backend, reference, &input, pass)?;
    let up = if filter_evanescent { project_propagating(&up) } else { up };
    Ok(time_reverse(&up))
}

/// `A = T P (S - S0) P T (S - S0)` with the projections applied when
/// `filter_evanescent` is set.
pub fn apply_a(
    backend: &dyn ScatteringBackend,
    reference: &dyn ScatteringBackend,
    field: &AngularField,
    filter_evanescent: bool,
) -> Result<AngularField> {
    let first = reverse_pass(backend, reference, field, filter_evanescent, 1)?;
    reverse_pass(backend, reference, &first, filter_evanescent, 2)
}

/// When the test-function normalization is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Raw field after even steps, normalized after odd steps.
    #[default]
    Alternating,
    /// Normalized after every time-reversed pass.
    EveryStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub n_max: usize,
    pub tol: f64,
    pub schedule: Schedule,
    pub filter_evanescent: bool,
    /// Half-width of the concentration window in band steps.
    pub window_steps: f64,
    pub keep_iterates: bool,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            n_max: 200,
            tol: 1e-6,
            schedule: Schedule::Alternating,
            filter_evanescent: true,
            window_steps: 3.0,
            keep_iterates: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub k_star: f64,
    pub fraction: f64,
}

/// Record of a power-method run. Entry `n` of each list describes `U_n`,
/// the field after `n` applications of `A` (`U_0` is the initial field).
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterates: Vec<AngularField>,
    pub rayleigh: Vec<f64>,
    pub concentration: Vec<Concentration>,
    /// `(A U_{n-1} (raw), Psi)` for `n >= 1`.
    pub pairings: Vec<f64>,
    /// Evanescent share of the W-space norm of each `U_n`.
    pub evanescent_share: Vec<f64>,
    pub converged: bool,
    /// The scattered difference vanished: nothing distinguishes `S` from `S0`.
    pub vanished: bool,
    pub final_field: AngularField,
}

impl IterationTrace {
    pub fn steps(&self) -> usize {
        self.rayleigh.len() - 1
    }
}

/// `|W(P (S - S0) P u)| / W(P u)`.
pub fn rayleigh_quotient(
    backend: &dyn ScatteringBackend,
    reference: &dyn ScatteringBackend,
    u: &AngularField,
) -> Result<f64> {
    let pu = project_propagating(u);
    let w = flux(&pu).value;
    if w == 0.0 {
        return Ok(0.0);
    }
    let up = project_propagating(&scatter_difference(backend, reference, &pu, 0)?);
    Ok(flux(&up).value / w)
}

/// Wavenumber of maximal flux density and the share of flux within
/// `window` of it.
pub fn spectral_concentration(field: &AngularField, window: f64) -> Concentration {
    let band = field.band();
    let cols = column_flux(field);
    let total: f64 = cols.iter().sum();
    if total == 0.0 {
        return Concentration { k_star: band.k(0), fraction: 0.0 };
    }
    let mut best = 0;
    for m in 1..cols.len() {
        if cols[m] / band.weight(m) > cols[best] / band.weight(best) {
            best = m;
        }
    }
    let k_star = band.k(best);
    let tol = 1e-9 * band.step();
    let inside: f64 = (0..cols.len())
        .filter(|&m| (band.k(m) - k_star).abs() <= window + tol)
        .map(|m| cols[m])
        .sum();
    Concentration {
        k_star,
        fraction: inside / total,
    }
}

/// Broadband random propagating field with unit flux.
pub fn default_initial_field(band: Arc<FrequencyBand>, grid: Arc<DirectionGrid>, seed: u64) -> AngularField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = AngularField::random(band, grid, Orientation::Down, true, &mut rng);
    let w = flux(&f).value;
    f.scaled(1.0 / w.sqrt())
}

/// Runs the power method from `v0`, normalizing by the pairing with `psi`.
pub fn iterate(
    backend: &dyn ScatteringBackend,
    reference: &dyn ScatteringBackend,
    v0: &AngularField,
    psi: &TestFunction,
    options: &IterationOptions,
) -> Result<IterationTrace> {
    if !v0.is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    if project_propagating(v0).is_zero() {
        return Err(Error::invalid("initial field", "no propagating content"));
    }
    v0.check_compatible(psi.field())?;
    let window = options.window_steps * v0.band().step();
    let v0 = v0.clone().with_orientation(Orientation::Down);
    let mut trace = IterationTrace {
        iterates: Vec::new(),
        rayleigh: Vec::new(),
        concentration: Vec::new(),
        pairings: Vec::new(),
        evanescent_share: Vec::new(),
        converged: false,
        vanished: false,
        final_field: v0.clone(),
    };
    record(&mut trace, backend, reference, &v0, window, options)?;
    let mut u = v0;
    let psi_norm = flux(psi.field()).value.sqrt();
    for n in 1..=options.n_max {
        let mut v = u.clone();
        let mut pairing = 0.0;
        for half in 0..2 {
            let step = 2 * (n - 1) + half;
            v = reverse_pass(backend, reference, &v, options.filter_evanescent, half + 1)?;
            if !v.is_finite() {
                return Err(Error::Divergence { step: step + 1 });
            }
            if v.is_zero() {
                trace.vanished = true;
                trace.converged = true;
                trace.rayleigh.push(0.0);
                trace.concentration.push(Concentration { k_star: v.band().k(0), fraction: 0.0 });
                trace.evanescent_share.push(0.0);
                trace.pairings.push(0.0);
                if options.keep_iterates {
                    trace.iterates.push(v.clone());
                }
                trace.final_field = v;
                return Ok(trace);
            }
            let normalize = half == 1 || options.schedule == Schedule::EveryStep;
            if normalize {
                pairing = flux_inner(&v, psi.field())?;
                let scale = flux(&v).value.sqrt() * psi_norm;
                if !(pairing.abs() > 1e-14 * scale) {
                    return Err(Error::DegenerateInitialization { step: step + 1, pairing });
                }
                v = v.scaled(1.0 / pairing);
            }
        }
        u = v;
        trace.pairings.push(pairing);
        record(&mut trace, backend, reference, &u, window, options)?;
        let r = &trace.rayleigh;
        let (prev, cur) = (r[r.len() - 2], r[r.len() - 1]);
        if (cur - prev).abs() <= options.tol * cur.abs() {
            trace.converged = true;
            break;
        }
    }
    trace.final_field = u;
    Ok(trace)
}

fn record(
    trace: &mut IterationTrace,
    backend: &dyn ScatteringBackend,
    reference: &dyn ScatteringBackend,
    u: &AngularField,
    window: f64,
    options: &IterationOptions,
) -> Result<()> {
    trace.rayleigh.push(rayleigh_quotient(backend, reference, u)?);
    trace.concentration.push(spectral_concentration(u, window));
    trace.evanescent_share.push(crate::flux::evanescent_share(u));
    if options.keep_iterates {
        trace.iterates.push(u.clone());
    }
    Ok(())
}

/// Final Rayleigh quotient: the estimate of the distinguishability.
pub fn distinguishability_estimate(trace: &IterationTrace) -> f64 {
    trace.rayleigh.last().copied().unwrap_or(0.0)
}
