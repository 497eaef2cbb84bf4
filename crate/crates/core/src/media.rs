//! Medium models below the measurement plane.
//!
//! The background speed is `c0` in the upper half-space. Layered media vary
//! only with depth; voxel scatterers carry the contrast `V = 1 - c0^2/c^2` on
//! a uniform grid whose top face sits at depth `h > 0`.

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contrast of a medium with speed `c` against background `c0`.
pub fn contrast_from_speed(c0: f64, c: f64) -> f64 {
    1.0 - (c0 * c0) / (c * c)
}

/// Speed recovered from a contrast `v < 1`.
pub fn speed_from_contrast(c0: f64, v: f64) -> Result<f64> {
    if !(v < 1.0) {
        return Err(Error::invalid("contrast", format!("V = {v} has no real speed (needs V < 1)")));
    }
    Ok(c0 / (1.0 - v).sqrt())
}

fn check_speed(what: &'static str, c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("speed {c} must be positive and finite")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness: f64,
    pub speed: f64,
}

/// Piecewise-constant speed profile: layers listed from the plane downward,
/// then a homogeneous bottom half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredProfile {
    pub c0: f64,
    pub layers: Vec<Layer>,
    pub bottom_speed: f64,
}

impl LayeredProfile {
    pub fn free_space(c0: f64) -> Self {
        Self {
            c0,
            layers: Vec::new(),
            bottom_speed: c0,
        }
    }

    /// Single interface at the plane to a half-space of speed `c1`.
    pub fn half_space(c0: f64, c1: f64) -> Self {
        Self {
            c0,
            layers: Vec::new(),
            bottom_speed: c1,
        }
    }

    pub fn validate(self) -> Result<Self> {
        check_speed("layered profile", self.c0)?;
        check_speed("layered profile", self.bottom_speed)?;
        for (i, l) in self.layers.iter().enumerate() {
            check_speed("layered profile", l.speed)?;
            if !(l.thickness > 0.0 && l.thickness.is_finite()) {
                return Err(Error::invalid(
                    "layered profile",
                    format!("layer {i} thickness {} must be positive", l.thickness),
                ));
            }
        }
        Ok(self)
    }

    pub fn is_free_space(&self) -> bool {
        self.bottom_speed == self.c0 && self.layers.iter().all(|l| l.speed == self.c0)
    }
}

/// Contrast on a uniform voxel grid. Voxel `(i1, i2, i3)` is stored at
/// `i1 + n1 * (i2 + n2 * i3)`; its center is at
/// `((i1 - (n1-1)/2) s, (i2 - (n2-1)/2) s, -h - (i3 + 1/2) s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelScatterer {
    pub c0: f64,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub depth: f64,
    pub contrast: Vec<f64>,
}

impl VoxelScatterer {
    pub fn new(c0: f64, spacing: f64, dims: [usize; 3], depth: f64, contrast: Vec<f64>) -> Result<Self> {
        Self {
            c0,
            spacing,
            dims,
            depth,
            contrast,
        }
        .validate()
    }

    /// Homogeneous ball of contrast `v` and radius `radius` centered in the
    /// cube of `n^3` voxels.
    pub fn sphere(c0: f64, n: usize, spacing: f64, depth: f64, radius: f64, v: f64) -> Result<Self> {
        let mut s = Self {
            c0,
            spacing,
            dims: [n; 3],
            depth,
            contrast: vec![0.0; n * n * n],
        };
        let mid = (n as f64 - 1.0) / 2.0;
        for i3 in 0..n {
            for i2 in 0..n {
                for i1 in 0..n {
                    let r2 = [i1, i2, i3]
                        .iter()
                        .map(|&i| ((i as f64 - mid) * spacing).powi(2))
                        .sum::<f64>();
                    if r2 <= radius * radius {
                        let idx = s.index(i1, i2, i3);
                        s.contrast[idx] = v;
                    }
                }
            }
        }
        s.validate()
    }

    /// Reads `n1 n2 n3` little-endian `f64` contrasts in storage order.
    pub fn from_binary_file(c0: f64, spacing: f64, dims: [usize; 3], depth: f64, path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let n = dims[0] * dims[1] * dims[2];
        let mut contrast = vec![0.0; n];
        file.read_f64_into::<LittleEndian>(&mut contrast)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let mut rest = Vec::new();
        file.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after {n} values",
                path.display(),
                rest.len()
            )));
        }
        Self::new(c0, spacing, dims, depth, contrast)
    }

    pub fn validate(self) -> Result<Self> {
        check_speed("voxel scatterer", self.c0)?;
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return Err(Error::invalid(
                "voxel scatterer",
                format!("depth h = {} must be strictly positive", self.depth),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("voxel scatterer", format!("spacing {} must be positive", self.spacing)));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("voxel scatterer", "empty dimension"));
        }
        if self.contrast.len() != self.len() {
            return Err(Error::invalid(
                "voxel scatterer",
                format!("{} contrast values for {} voxels", self.contrast.len(), self.len()),
            ));
        }
        if let Some(i) = self.contrast.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("voxel scatterer", format!("contrast at voxel {i} is not finite")));
        }
        if let Some(i) = self.contrast.iter().position(|&v| v >= 1.0) {
            return Err(Error::invalid(
                "voxel scatterer",
                format!("contrast {} at voxel {i} implies a non-positive speed", self.contrast[i]),
            ));
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.dims[0] * (i2 + self.dims[1] * i3)
    }

    pub fn center(&self, idx: usize) -> [f64; 3] {
        let [n1, n2, _] = self.dims;
        let (i1, i2, i3) = (idx % n1, (idx / n1) % n2, idx / (n1 * n2));
        let s = self.spacing;
        [
            (i1 as f64 - (n1 as f64 - 1.0) / 2.0) * s,
            (i2 as f64 - (n2 as f64 - 1.0) / 2.0) * s,
            -self.depth - (i3 as f64 + 0.5) * s,
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn is_free_space(&self) -> bool {
        self.contrast.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs_contrast(&self) -> f64 {
        self.contrast.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same geometry with every contrast multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut s = self.clone();
        s.contrast.iter_mut().for_each(|v| *v *= factor);
        s.validate()
    }

    /// Local speed in voxel `idx`.
    pub fn speed(&self, idx: usize) -> f64 {
        self.c0 / (1.0 - self.contrast[idx]).sqrt()
    }
}

/// Any medium below the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Medium {
    Free { c0: f64 },
    Layered(LayeredProfile),
    Voxel(VoxelScatterer),
}

impl Medium {
    pub fn validate(self) -> Result<Self> {
        Ok(match self {
            Medium::Free { c0 } => {
                check_speed("free space", c0)?;
                Medium::Free { c0 }
            }
            Medium::Layered(p) => Medium::Layered(p.validate()?),
            Medium::Voxel(v) => Medium::Voxel(v.validate()?),
        })
    }
}
