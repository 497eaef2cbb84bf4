//! Angular-spectrum representation of fields on the measurement plane
//! `x3 = 0`.
//!
//! A field is stored as complex plane-wave amplitudes `B(k, eta')` over a
//! band of positive wavenumbers and a quadrature grid of transverse
//! directions. Negative wavenumbers are never stored: a real time-domain field
//! satisfies `B(-k, eta') = conj(B(k, eta'))`, so the negative half of the
//! spectrum is implied.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_on, trapezoid_weights};

/// Positive wavenumber samples with their trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandRecord", into = "BandRecord")]
pub struct FrequencyBand {
    k_values: Vec<f64>,
    weights: Vec<f64>,
    band_limit: f64,
    c0: f64,
}

#[derive(Serialize, Deserialize)]
struct BandRecord {
    k_values: Vec<f64>,
    band_limit: f64,
    c0: f64,
}

impl TryFrom<BandRecord> for FrequencyBand {
    type Error = Error;
    fn try_from(r: BandRecord) -> Result<Self> {
        FrequencyBand::new(r.k_values, r.band_limit, r.c0)
    }
}

impl From<FrequencyBand> for BandRecord {
    fn from(b: FrequencyBand) -> Self {
        BandRecord {
            k_values: b.k_values,
            band_limit: b.band_limit,
            c0: b.c0,
        }
    }
}

impl FrequencyBand {
    pub fn new(k_values: Vec<f64>, band_limit: f64, c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::invalid("band", format!("background speed {c0} must be positive")));
        }
        if !(band_limit > 0.0 && band_limit.is_finite()) {
            return Err(Error::invalid("band", format!("band limit {band_limit} must be positive")));
        }
        if k_values.is_empty() {
            return Err(Error::invalid("band", "no wavenumbers"));
        }
        for (i, &k) in k_values.iter().enumerate() {
            if !(k > 0.0) || k > band_limit {
                return Err(Error::invalid(
                    "band",
                    format!("k = {k} outside (0, {band_limit}]"),
                ));
            }
            if i > 0 && k <= k_values[i - 1] {
                return Err(Error::invalid("band", "wavenumbers must be strictly increasing"));
            }
        }
        let weights = trapezoid_weights(&k_values);
        Ok(Self {
            k_values,
            weights,
            band_limit,
            c0,
        })
    }

    /// `n` equally spaced wavenumbers from `k_min` to `k_max`; the band limit
    /// is `k_max`.
    pub fn uniform(k_min: f64, k_max: f64, n: usize, c0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("band", "need at least one wavenumber"));
        }
        let k = if n == 1 {
            vec![k_max]
        } else {
            let dk = (k_max - k_min) / (n - 1) as f64;
            (0..n).map(|i| k_min + dk * i as f64).collect()
        };
        Self::new(k, k_max, c0)
    }

    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k_values
    }

    pub fn k(&self, i: usize) -> f64 {
        self.k_values[i]
    }

    /// Trapezoid weight of the `i`-th sample.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn band_limit(&self) -> f64 {
        self.band_limit
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Mean sample spacing (the band limit for single-sample bands).
    pub fn step(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            self.band_limit
        } else {
            (self.k_values[n - 1] - self.k_values[0]) / (n - 1) as f64
        }
    }
}

/// Vertical direction component for wavenumber `k` and transverse direction
/// `eta_prime`.
///
/// Propagating directions (`|eta'| < 1`) give `sqrt(1 - |eta'|^2)`;
/// evanescent ones give `i sgn(k) sqrt(|eta'|^2 - 1)`.
pub fn eta3(k: f64, eta_prime: [f64; 2]) -> Result<Complex64> {
    if k == 0.0 {
        return Err(Error::invalid("wavenumber", "k = 0 has no direction"));
    }
    let rho2 = eta_prime[0] * eta_prime[0] + eta_prime[1] * eta_prime[1];
    if rho2 == 1.0 {
        return Err(Error::GrazingSingularity);
    }
    Ok(eta3_from_rho2(k.signum(), rho2))
}

pub(crate) fn eta3_from_rho2(sign: f64, rho2: f64) -> Complex64 {
    if rho2 < 1.0 {
        Complex64::new((1.0 - rho2).sqrt(), 0.0)
    } else {
        Complex64::new(0.0, sign * (rho2 - 1.0).sqrt())
    }
}

/// Evanescent annulus `1 < |eta'| <= eta_max` appended to a direction grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub n_radial: usize,
    pub eta_max: f64,
}

/// Quadrature nodes on the direction disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    n_propagating: usize,
    margin: f64,
    eta3_abs: Vec<f64>,
    reflection: Vec<usize>,
}

impl DirectionGrid {
    /// Tensor polar rule on `|eta'| <= 1 - margin`: Gauss–Legendre in
    /// `s = |eta'|^2`, uniform in angle. `n_angular` must be even so the grid
    /// is closed under `eta' -> -eta'`.
    pub fn polar(n_radial: usize, n_angular: usize, margin: f64) -> Result<Self> {
        Self::polar_with_annulus(n_radial, n_angular, margin, None)
    }

    pub fn polar_with_annulus(
        n_radial: usize,
        n_angular: usize,
        margin: f64,
        annulus: Option<AnnulusSpec>,
    ) -> Result<Self> {
        if n_radial == 0 {
            return Err(Error::invalid("grid", "need at least one radial node"));
        }
        if n_angular == 0 || n_angular % 2 != 0 {
            return Err(Error::invalid("grid", "angular count must be positive and even"));
        }
        if !(margin > 0.0 && margin < 1.0) {
            return Err(Error::invalid("grid", format!("margin {margin} must lie in (0, 1)")));
        }
        let rho_max = 1.0 - margin;
        let dtheta = 2.0 * std::f64::consts::PI / n_angular as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let push_ring = |s_rule: Vec<(f64, f64)>, nodes: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>| {
            for (s, ws) in s_rule {
                let rho = s.sqrt();
                for j in 0..n_angular {
                    let theta = dtheta * (j as f64 + 0.5);
                    nodes.push([rho * theta.cos(), rho * theta.sin()]);
                    // d^2 eta = rho d rho d theta = ds d theta / 2
                    weights.push(0.5 * ws * dtheta);
                }
            }
        };
        push_ring(gauss_legendre_on(n_radial, 0.0, rho_max * rho_max), &mut nodes, &mut weights);
        let n_propagating = nodes.len();
        if let Some(a) = annulus {
            let inner = 1.0 + margin;
            if a.n_radial == 0 || !(a.eta_max > inner) {
                return Err(Error::invalid(
                    "grid",
                    format!("annulus needs eta_max > {inner} and at least one radial node"),
                ));
            }
            push_ring(
                gauss_legendre_on(a.n_radial, inner * inner, a.eta_max * a.eta_max),
                &mut nodes,
                &mut weights,
            );
        }
        let half = n_angular / 2;
        let reflection = (0..nodes.len())
            .map(|i| {
                let ring = i / n_angular;
                let j = i % n_angular;
                ring * n_angular + (j + half) % n_angular
            })
            .collect();
        Self::assemble(nodes, weights, n_propagating, margin, reflection)
    }

    /// Grid from explicit nodes. Propagating nodes come first; the rest must
    /// lie strictly outside the unit circle. The node set must be symmetric
    /// under `eta' -> -eta'` with matching weights.
    pub fn from_nodes(
        nodes: Vec<[f64; 2]>,
        weights: Vec<f64>,
        n_propagating: usize,
        margin: f64,
    ) -> Result<Self> {
        if nodes.len() != weights.len() || n_propagating > nodes.len() {
            return Err(Error::mismatch("node and weight counts differ"));
        }
        let mut reflection = Vec::with_capacity(nodes.len());
        for (i, p) in nodes.iter().enumerate() {
            let mirror = nodes.iter().position(|q| {
                (q[0] + p[0]).abs() < 1e-12 && (q[1] + p[1]).abs() < 1e-12
            });
            match mirror {
                Some(j) if (weights[j] - weights[i]).abs() <= 1e-14 * weights[i].abs() => {
                    reflection.push(j)
                }
                _ => {
                    return Err(Error::invalid(
                        "grid",
                        format!("node {i} has no mirror image with equal weight"),
                    ))
                }
            }
        }
        Self::assemble(nodes, weights, n_propagating, margin, reflection)
    }

    fn assemble(
        nodes: Vec<[f64; 2]>,
        weights: Vec<f64>,
        n_propagating: usize,
        margin: f64,
        reflection: Vec<usize>,
    ) -> Result<Self> {
        let mut eta3_abs = Vec::with_capacity(nodes.len());
        for (i, (p, &w)) in nodes.iter().zip(&weights).enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid("grid", format!("weight {w} at node {i} must be positive")));
            }
            let rho = p[0].hypot(p[1]);
            if i < n_propagating {
                if rho > 1.0 - margin + 1e-12 {
                    return Err(Error::invalid(
                        "grid",
                        format!("propagating node {i} at |eta'| = {rho} violates margin {margin}"),
                    ));
                }
            } else if rho <= 1.0 {
                return Err(Error::invalid(
                    "grid",
                    format!("evanescent node {i} at |eta'| = {rho} is not outside the unit circle"),
                ));
            }
            eta3_abs.push((1.0 - rho * rho).abs().sqrt());
        }
        Ok(Self {
            nodes,
            weights,
            n_propagating,
            margin,
            eta3_abs,
            reflection,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_propagating(&self) -> usize {
        self.n_propagating
    }

    pub fn has_annulus(&self) -> bool {
        self.n_propagating < self.nodes.len()
    }

    pub fn is_propagating(&self, i: usize) -> bool {
        i < self.n_propagating
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.nodes[i][0].hypot(self.nodes[i][1])
    }

    /// `|eta3|` at node `i`.
    pub fn eta3_abs(&self, i: usize) -> f64 {
        self.eta3_abs[i]
    }

    /// `eta3` at node `i` for a wavenumber of sign `sign`.
    pub fn eta3(&self, i: usize, sign: f64) -> Complex64 {
        if self.is_propagating(i) {
            Complex64::new(self.eta3_abs[i], 0.0)
        } else {
            Complex64::new(0.0, sign.signum() * self.eta3_abs[i])
        }
    }

    /// Index of the node at `-eta'`.
    pub fn reflected(&self, i: usize) -> usize {
        self.reflection[i]
    }

    /// Weight `|1 - |eta'|^2|^{1/4}` of the compactness space.
    pub fn l2g_weight(&self, i: usize) -> f64 {
        self.eta3_abs[i].sqrt()
    }

    /// Node closest to `eta`.
    pub fn nearest(&self, eta: [f64; 2]) -> usize {
        let d = |p: &[f64; 2]| (p[0] - eta[0]).powi(2) + (p[1] - eta[1]).powi(2);
        (0..self.len())
            .min_by(|&a, &b| d(&self.nodes[a]).total_cmp(&d(&self.nodes[b])))
            .unwrap_or(0)
    }
}

/// Propagation sense of a field on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Up,
    Down,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Up => Orientation::Down,
            Orientation::Down => Orientation::Up,
        }
    }
}

/// Plane-wave amplitudes over a band and a direction grid. Rows index
/// directions, columns index wavenumbers.
#[derive(Debug, Clone)]
pub struct AngularField {
    band: Arc<FrequencyBand>,
    grid: Arc<DirectionGrid>,
    amplitudes: DMatrix<Complex64>,
    orientation: Orientation,
}

impl AngularField {
    pub fn zeros(band: Arc<FrequencyBand>, grid: Arc<DirectionGrid>, orientation: Orientation) -> Self {
        let amplitudes = DMatrix::zeros(grid.len(), band.len());
        Self {
            band,
            grid,
            amplitudes,
            orientation,
        }
    }

    pub fn from_amplitudes(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        orientation: Orientation,
        amplitudes: DMatrix<Complex64>,
    ) -> Result<Self> {
        if amplitudes.nrows() != grid.len() || amplitudes.ncols() != band.len() {
            return Err(Error::mismatch(format!(
                "amplitudes are {}x{}, grid x band is {}x{}",
                amplitudes.nrows(),
                amplitudes.ncols(),
                grid.len(),
                band.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("field", "non-finite amplitude"));
        }
        Ok(Self {
            band,
            grid,
            amplitudes,
            orientation,
        })
    }

    /// Field with amplitude `f(node, k_index)`.
    pub fn from_fn<F>(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        orientation: Orientation,
        mut f: F,
    ) -> Self
    where
        F: FnMut(usize, usize) -> Complex64,
    {
        let amplitudes = DMatrix::from_fn(grid.len(), band.len(), |q, m| f(q, m));
        Self {
            band,
            grid,
            amplitudes,
            orientation,
        }
    }

    /// Independent complex Gaussian amplitudes on every node (or on
    /// propagating nodes only).
    pub fn random<R: Rng + ?Sized>(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        orientation: Orientation,
        propagating_only: bool,
        rng: &mut R,
    ) -> Self {
        let np = grid.n_propagating();
        let amplitudes = DMatrix::from_fn(grid.len(), band.len(), |q, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if propagating_only && q >= np {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(re, im)
            }
        });
        Self {
            band,
            grid,
            amplitudes,
            orientation,
        }
    }

    pub fn band(&self) -> &Arc<FrequencyBand> {
        &self.band
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, node: usize, k_index: usize) -> Complex64 {
        self.amplitudes[(node, k_index)]
    }

    pub fn set_amplitude(&mut self, node: usize, k_index: usize, value: Complex64) {
        self.amplitudes[(node, k_index)] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re == 0.0 && a.im == 0.0)
    }

    /// Ok when `other` lives on the same band and grid.
    pub fn check_compatible(&self, other: &AngularField) -> Result<()> {
        let same_band = Arc::ptr_eq(&self.band, &other.band) || self.band == other.band;
        let same_grid = Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid;
        if same_band && same_grid {
            Ok(())
        } else {
            Err(Error::mismatch("fields live on different bands or grids"))
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.amplitudes *= Complex64::new(c, 0.0);
        out
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &AngularField, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.amplitudes = &self.amplitudes * Complex64::new(a, 0.0) + &other.amplitudes * Complex64::new(b, 0.0);
        Ok(out)
    }

    pub fn sub(&self, other: &AngularField) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    /// Writes `k, eta1, eta2, re, im` rows, wavenumber-major.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "eta1", "eta2", "re", "im"])?;
        for m in 0..self.band.len() {
            for q in 0..self.grid.len() {
                let p = self.grid.node(q);
                let a = self.amplitudes[(q, m)];
                w.write_record(&[
                    self.band.k(m).to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                    a.re.to_string(),
                    a.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`AngularField::write_csv`] onto the given band
    /// and grid. Lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        orientation: Orientation,
        reader: R,
    ) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let mut field = Self::zeros(band, grid, orientation);
        let (nq, nk) = (field.grid.len(), field.band.len());
        let mut count = 0usize;
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("row {count}: {e}")))?;
            if vals.len() != 5 {
                return Err(Error::Format(format!("row {count}: expected 5 columns")));
            }
            if count >= nq * nk {
                return Err(Error::Format("more rows than grid x band".into()));
            }
            let (m, q) = (count / nq, count % nq);
            let p = field.grid.node(q);
            let k = field.band.k(m);
            let tol = 1e-12;
            if (vals[0] - k).abs() > tol * k.abs().max(1.0)
                || (vals[1] - p[0]).abs() > tol
                || (vals[2] - p[1]).abs() > tol
            {
                return Err(Error::Format(format!("row {count}: coordinates do not match the grid")));
            }
            field.amplitudes[(q, m)] = Complex64::new(vals[3], vals[4]);
            count += 1;
        }
        if count != nq * nk {
            return Err(Error::Format(format!("expected {} rows, found {count}", nq * nk)));
        }
        Ok(field)
    }
}

/// An angular field used as a distributional test function: finite, nonzero
/// and supported inside the band.
#[derive(Debug, Clone)]
pub struct TestFunction(AngularField);

impl TestFunction {
    pub fn new(field: AngularField) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::invalid("test function", "non-finite amplitude"));
        }
        if field.is_zero() {
            return Err(Error::invalid("test function", "identically zero"));
        }
        Ok(Self(field.with_orientation(Orientation::Down)))
    }

    /// Constant in `k`, constant over the propagating disc, zero on the
    /// annulus.
    pub fn lowest_mode(band: Arc<FrequencyBand>, grid: Arc<DirectionGrid>) -> Self {
        let np = grid.n_propagating();
        let field = AngularField::from_fn(band, grid, Orientation::Down, |q, _| {
            if q < np {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self(field)
    }

    pub fn field(&self) -> &AngularField {
        &self.0
    }

    pub fn into_field(self) -> AngularField {
        self.0
    }
}

/// Orthogonal projection onto the propagating directions.
pub fn project_propagating(field: &AngularField) -> AngularField {
    let mut out = field.clone();
    let np = field.grid.n_propagating();
    for q in np..field.grid.len() {
        for m in 0..field.band.len() {
            out.amplitudes[(q, m)] = Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// Time reversal `U(t, x') -> U(-t, x')`.
///
/// On the stored positive-`k` amplitudes this is `B(k, eta') ->
/// conj(B(k, -eta'))`: conjugation from `t -> -t` on a real field, together
/// with the mirror image in direction that keeps the spatial phase
/// `exp(i k eta'.x')` fixed. An upgoing field becomes downgoing and vice
/// versa.
pub fn time_reverse(field: &AngularField) -> AngularField {
    let grid = &field.grid;
    let amplitudes = DMatrix::from_fn(grid.len(), field.band.len(), |q, m| {
        field.amplitudes[(grid.reflected(q), m)].conj()
    });
    AngularField {
        band: field.band.clone(),
        grid: field.grid.clone(),
        amplitudes,
        orientation: field.orientation.flipped(),
    }
}

/// Quantity synthesized in the time domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldComponent {
    /// `U(t, x', 0)`
    Value,
    /// `dU/dt`
    TimeDerivative,
    /// `dU/dx3` at `x3 = 0`
    VerticalDerivative,
}

/// Time-domain samples, `t`-major: `values[i * n_x + j]` is sample
/// `(t_i, x'_j)`.
#[derive(Debug, Clone)]
pub struct TimeField {
    pub n_t: usize,
    pub n_x: usize,
    pub values: Vec<f64>,
    /// `max |Im U| / max |Re U|` before the imaginary part was dropped.
    pub imag_residual: f64,
}

impl TimeField {
    pub fn at(&self, i_t: usize, i_x: usize) -> f64 {
        self.values[i_t * self.n_x + i_x]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Synthesizes `U(t, x')` on the plane from its angular spectrum.
pub fn synthesize_time_field(field: &AngularField, t: &[f64], x: &[[f64; 2]]) -> TimeField {
    synthesize_component(field, FieldComponent::Value, t, x)
}

/// Time-domain synthesis of `U` or one of its derivatives at arbitrary
/// transverse points.
///
/// Both halves of the spectrum are summed explicitly: positive `k` from the
/// stored amplitudes and negative `k` from their conjugates with
/// `eta3(-k) = conj(eta3(k))`.
pub fn synthesize_component(
    field: &AngularField,
    component: FieldComponent,
    t: &[f64],
    x: &[[f64; 2]],
) -> TimeField {
    let spatial = |ks: f64, coefs: &[(usize, Complex64)]| -> Vec<Complex64> {
        x.par_iter()
            .map(|p| {
                coefs
                    .iter()
                    .map(|&(q, c)| {
                        let e = field.grid.node(q);
                        c * Complex64::from_polar(1.0, ks * (e[0] * p[0] + e[1] * p[1]))
                    })
                    .sum()
            })
            .collect()
    };
    accumulate(field, component, t, x.len(), spatial)
}

/// Synthesis on the tensor grid `x1 x x2`; sample `j = i1 * x2.len() + i2`.
/// Separable phases make this much cheaper than the pointwise form.
pub fn synthesize_on_tensor_grid(
    field: &AngularField,
    component: FieldComponent,
    t: &[f64],
    x1: &[f64],
    x2: &[f64],
) -> TimeField {
    let (n1, n2) = (x1.len(), x2.len());
    let spatial = |ks: f64, coefs: &[(usize, Complex64)]| -> Vec<Complex64> {
        let nq = coefs.len();
        let e1 = DMatrix::from_fn(n1, nq, |i, c| {
            let (q, coef) = coefs[c];
            coef * Complex64::from_polar(1.0, ks * field.grid.node(q)[0] * x1[i])
        });
        let e2 = DMatrix::from_fn(nq, n2, |c, j| {
            let q = coefs[c].0;
            Complex64::from_polar(1.0, ks * field.grid.node(q)[1] * x2[j])
        });
        let s = e1 * e2;
        let mut out = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                out.push(s[(i, j)]);
            }
        }
        out
    };
    accumulate(field, component, t, n1 * n2, spatial)
}

fn accumulate<S>(field: &AngularField, component: FieldComponent, t: &[f64], n_x: usize, spatial: S) -> TimeField
where
    S: Fn(f64, &[(usize, Complex64)]) -> Vec<Complex64>,
{
    let band = &field.band;
    let grid = &field.grid;
    let c0 = band.c0();
    let i = Complex64::i();
    let mut acc = vec![Complex64::new(0.0, 0.0); t.len() * n_x];
    for m in 0..band.len() {
        for sign in [1.0, -1.0] {
            let ks = sign * band.k(m);
            let measure = c0 * ks * ks * band.weight(m);
            let coefs: Vec<(usize, Complex64)> = (0..grid.len())
                .filter_map(|q| {
                    let b = field.amplitudes[(q, m)];
                    if b.re == 0.0 && b.im == 0.0 {
                        return None;
                    }
                    let b = if sign > 0.0 { b } else { b.conj() };
                    let mult = match component {
                        FieldComponent::Value => Complex64::new(1.0, 0.0),
                        FieldComponent::TimeDerivative => -i * ks * c0,
                        FieldComponent::VerticalDerivative => {
                            let e3 = grid.eta3(q, sign);
                            match field.orientation {
                                Orientation::Down => -i * ks * e3,
                                Orientation::Up => i * ks * e3,
                            }
                        }
                    };
                    Some((q, b * mult * (measure * grid.weight(q))))
                })
                .collect();
            if coefs.is_empty() {
                continue;
            }
            let s = spatial(ks, &coefs);
            for (it, &tt) in t.iter().enumerate() {
                let phase = Complex64::from_polar(1.0, -ks * c0 * tt);
                let row = &mut acc[it * n_x..(it + 1) * n_x];
                for (a, sv) in row.iter_mut().zip(&s) {
                    *a += phase * sv;
                }
            }
        }
    }
    let max_re = acc.iter().fold(0.0f64, |m, a| m.max(a.re.abs()));
    let max_im = acc.iter().fold(0.0f64, |m, a| m.max(a.im.abs()));
    let imag_residual = if max_re > 0.0 { max_im / max_re } else { max_im };
    TimeField {
        n_t: t.len(),
        n_x,
        values: acc.into_iter().map(|a| a.re).collect(),
        imag_residual,
    }
}
