//! Turns a configured medium into a scattering backend.

use std::sync::Arc;

use fluxprobe::angular_spectrum::{DirectionGrid, FrequencyBand};
use fluxprobe::media::{LayeredProfile, VoxelScatterer};
use fluxprobe::solver_1d::ReflectionTable;
use fluxprobe::solver_3d::ScatteringBand;
use fluxprobe::spectral::OperatorMatrices;
use fluxprobe::time_reversal::{ScatteringBackend, SyntheticBackend};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, MediumSpec};
use crate::output::Output;
use crate::CliError;

pub enum Backend {
    Layered(ReflectionTable),
    Voxel(ScatteringBand),
    Synthetic(SyntheticBackend),
}

impl Backend {
    pub fn scatterer(&self) -> &dyn ScatteringBackend {
        match self {
            Backend::Layered(t) => t,
            Backend::Voxel(b) => b,
            Backend::Synthetic(s) => s,
        }
    }

    pub fn operators(&self) -> &dyn OperatorMatrices {
        match self {
            Backend::Layered(t) => t,
            Backend::Voxel(b) => b,
            Backend::Synthetic(s) => s,
        }
    }
}

pub fn spaces(cfg: &ExperimentConfig) -> Result<(Arc<FrequencyBand>, Arc<DirectionGrid>), CliError> {
    let b = &cfg.band;
    let band = FrequencyBand::uniform(b.k_min, b.k_max, b.n, b.c0)?;
    let g = &cfg.grid;
    let grid = DirectionGrid::polar_with_annulus(g.n_radial, g.n_angular, g.margin, g.annulus)?;
    Ok((Arc::new(band), Arc::new(grid)))
}

pub fn layered_profile(cfg: &ExperimentConfig) -> Option<LayeredProfile> {
    match &cfg.medium {
        MediumSpec::Free => Some(LayeredProfile::free_space(cfg.band.c0)),
        MediumSpec::Layered { layers, bottom_speed } => Some(LayeredProfile {
            c0: cfg.band.c0,
            layers: layers.clone(),
            bottom_speed: *bottom_speed,
        }),
        _ => None,
    }
}

pub fn voxel_scatterer(cfg: &ExperimentConfig) -> Result<Option<VoxelScatterer>, CliError> {
    let MediumSpec::Voxel { spacing, depth, sphere, file } = &cfg.medium else {
        return Ok(None);
    };
    let c0 = cfg.band.c0;
    let s = match (sphere, file) {
        (Some(s), None) => VoxelScatterer::sphere(c0, s.n, *spacing, *depth, s.radius, s.contrast)?,
        (None, Some(f)) => VoxelScatterer::from_binary_file(c0, *spacing, f.dims, *depth, &f.path)?,
        _ => return Err(CliError::Config("voxel medium needs exactly one of `sphere` or `file`".into())),
    };
    Ok(Some(s))
}

/// The planted curve: the upper envelope of the peaks, clamped below.
pub fn synthetic_curve(cfg: &ExperimentConfig, k: f64) -> f64 {
    let MediumSpec::Synthetic { peaks, floor, .. } = &cfg.medium else {
        return 0.0;
    };
    peaks
        .iter()
        .map(|p| p.height - p.b * (k - p.k0).abs().powf(p.p))
        .fold(*floor, f64::max)
}

/// Loads a cached band for this config from the output directory or
/// assembles and caches it. The second value describes the cache.
pub fn voxel_band(
    cfg: &ExperimentConfig,
    band: Arc<FrequencyBand>,
    grid: Arc<DirectionGrid>,
    out: &Output,
) -> Result<(ScatteringBand, Value), CliError> {
    let scatterer = voxel_scatterer(cfg)?.ok_or_else(|| CliError::Unsupported("medium is not a voxel scatterer".into()))?;
    let name = format!("band_{}.bin", cfg.band_hash()?);
    let path = out.path(&name);
    if path.is_file() {
        if let Ok(b) = ScatteringBand::load(&path) {
            if **b.band() == *band && **b.grid() == *grid {
                return Ok((b, json!({ "file": name, "hit": true })));
            }
        }
    }
    let b = ScatteringBand::assemble(&scatterer, band, grid, cfg.solver)?;
    b.save(&path)?;
    Ok((b, json!({ "file": name, "hit": false })))
}

pub fn build(cfg: &ExperimentConfig, out: &Output) -> Result<(Backend, Option<Value>), CliError> {
    let (band, grid) = spaces(cfg)?;
    if let Some(p) = layered_profile(cfg) {
        return Ok((Backend::Layered(ReflectionTable::build(&p, band, grid)?), None));
    }
    match &cfg.medium {
        MediumSpec::Voxel { .. } => {
            let (b, cache) = voxel_band(cfg, band, grid, out)?;
            Ok((Backend::Voxel(b), Some(cache)))
        }
        MediumSpec::Synthetic { background, leak_depth, .. } => {
            let mut curves = vec![band.k_values().iter().map(|&k| synthetic_curve(cfg, k)).collect::<Vec<_>>()];
            curves.extend(background.iter().map(|&l| vec![l; band.len()]));
            let mut s = SyntheticBackend::new(band, grid, curves, cfg.seed)?;
            if let Some(h) = leak_depth {
                s = s.with_evanescent_leak(*h);
            }
            Ok((Backend::Synthetic(s), None))
        }
        MediumSpec::Free | MediumSpec::Layered { .. } => unreachable!("handled above"),
    }
}
