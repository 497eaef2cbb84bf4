//! Experiment configuration (TOML) and its content hash.

use std::path::{Path, PathBuf};

use fluxprobe::angular_spectrum::AnnulusSpec;
use fluxprobe::media::Layer;
use fluxprobe::solver_3d::LsOptions;
use fluxprobe::time_reversal::Schedule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; absent means all available cores.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub band: BandSpec,
    pub grid: GridSpec,
    pub medium: MediumSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub solver: LsOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub n: usize,
    #[serde(default = "one")]
    pub c0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_radial: usize,
    pub n_angular: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub annulus: Option<AnnulusSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MediumSpec {
    Free,
    Layered {
        #[serde(default)]
        layers: Vec<Layer>,
        bottom_speed: f64,
    },
    Voxel {
        spacing: f64,
        depth: f64,
        #[serde(default)]
        sphere: Option<SphereSpec>,
        #[serde(default)]
        file: Option<VoxelFile>,
    },
    Synthetic {
        peaks: Vec<PeakSpec>,
        /// Lower clamp of the planted curve.
        #[serde(default)]
        floor: f64,
        /// Extra modes with constant eigenvalues.
        #[serde(default)]
        background: Vec<f64>,
        #[serde(default)]
        leak_depth: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub n: usize,
    pub radius: f64,
    pub contrast: f64,
}

/// Raw little-endian `f64` contrast values, `x1` fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelFile {
    pub path: PathBuf,
    pub dims: [usize; 3],
}

/// `lambda(k) = height - b |k - k0|^p` near `k0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakSpec {
    pub height: f64,
    pub k0: f64,
    pub b: f64,
    #[serde(default = "two")]
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunctionSpec {
    #[default]
    LowestMode,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub n_max: usize,
    pub tol: f64,
    pub schedule: Schedule,
    pub filter_evanescent: bool,
    pub window_steps: f64,
    pub test_function: TestFunctionSpec,
    /// Seed of the initial field; defaults to the run seed.
    pub v0_seed: Option<u64>,
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        Self {
            n_max: 200,
            tol: 1e-6,
            schedule: Schedule::Alternating,
            filter_evanescent: true,
            window_steps: 3.0,
            test_function: TestFunctionSpec::LowestMode,
            v0_seed: None,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_margin() -> f64 {
    0.02
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `path`; a voxel file is resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let MediumSpec::Voxel { file: Some(f), .. } = &mut cfg.medium {
            if f.path.is_relative() {
                f.path = path.parent().unwrap_or(Path::new(".")).join(&f.path);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if let MediumSpec::Voxel { sphere, file, .. } = &self.medium {
            match (sphere, file) {
                (Some(_), None) => {}
                (None, Some(f)) => {
                    if !f.path.is_file() {
                        return Err(CliError::Config(format!("voxel file {} does not exist", f.path.display())));
                    }
                }
                _ => return Err(CliError::Config("voxel medium needs exactly one of `sphere` or `file`".into())),
            }
        }
        if let MediumSpec::Synthetic { peaks, .. } = &self.medium {
            if peaks.is_empty() {
                return Err(CliError::Config("synthetic medium needs at least one peak".into()));
            }
        }
        Ok(())
    }

    pub fn v0_seed(&self) -> u64 {
        self.algorithm.v0_seed.unwrap_or(self.seed)
    }

    /// SHA-256 of everything that determines the numbers: the serialized
    /// config (output location and worker count excluded) and the bytes of a
    /// referenced voxel file.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        if let MediumSpec::Voxel { file: Some(f), .. } = &self.medium {
            h.update(std::fs::read(&f.path)?);
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Hash of the inputs of a 3D assembly only, used to name cached bands.
    pub fn band_hash(&self) -> Result<String, CliError> {
        let mut h = Sha256::new();
        let key = (&self.band, &self.grid, &self.medium, &self.solver);
        h.update(serde_json::to_vec(&key).expect("config serializes"));
        if let MediumSpec::Voxel { file: Some(f), .. } = &self.medium {
            h.update(std::fs::read(&f.path)?);
        }
        Ok(hex::encode(&h.finalize()[..8]))
    }
}
