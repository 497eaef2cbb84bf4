use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{born_amplitude, downgoing, kernel_prefactor, upgoing, LsOptions, LsSystem, KERNEL_TO_AMPLITUDE};
use crate::angular_spectrum::{AngularField, DirectionGrid, FrequencyBand, Orientation};
use crate::error::{Error, Result};
use crate::media::VoxelScatterer;
use crate::spectral::{flux_similarity, OperatorMatrices};
use crate::time_reversal::ScatteringBackend;

const MAGIC: &[u8; 4] = b"FXSB";
pub const ARCHIVE_VERSION: u32 = 1;

/// Per-frequency matrices taking downgoing to upgoing amplitudes on the
/// propagating nodes: `S_pq = (2 pi)^{-2} S^(k, eta'_p, eta'_q) k^2 w_q`.
#[derive(Debug, Clone)]
pub struct ScatteringBand {
    band: Arc<FrequencyBand>,
    grid: Arc<DirectionGrid>,
    matrices: Vec<DMatrix<Complex64>>,
    max_residual: f64,
    total_iterations: usize,
}

impl ScatteringBand {
    /// One total-field solve per (frequency, incident node), run on the
    /// rayon pool.
    pub fn assemble(
        scatterer: &VoxelScatterer,
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        options: LsOptions,
    ) -> Result<Self> {
        check_grid(&grid)?;
        let systems: Vec<LsSystem> = band
            .k_values()
            .par_iter()
            .map(|&k| LsSystem::new(scatterer, k, options))
            .collect::<Result<_>>()?;
        let np = grid.n_propagating();
        let jobs: Vec<(usize, usize)> = (0..band.len()).flat_map(|m| (0..np).map(move |q| (m, q))).collect();
        let columns: Vec<(Vec<Complex64>, f64, usize)> = jobs
            .par_iter()
            .map(|&(m, q)| {
                let system = &systems[m];
                let k = system.k();
                let d = downgoing(k, grid.node(q))?.map(|z| z.re);
                let sol = system.solve(d)?;
                let col = (0..np)
                    .map(|p| {
                        let up = upgoing(k, grid.node(p))?;
                        Ok(system.amplitude(&sol, up))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((col, sol.residual, sol.iterations))
            })
            .collect::<Result<_>>()?;
        let mut out = Self::from_amplitudes(band, grid, &jobs, columns.iter().map(|c| c.0.as_slice()));
        out.max_residual = columns.iter().fold(0.0, |a, c| a.max(c.1));
        out.total_iterations = columns.iter().map(|c| c.2).sum();
        Ok(out)
    }

    /// Same layout with the Born amplitude in place of the full one.
    pub fn assemble_born(scatterer: &VoxelScatterer, band: Arc<FrequencyBand>, grid: Arc<DirectionGrid>) -> Result<Self> {
        check_grid(&grid)?;
        let np = grid.n_propagating();
        let jobs: Vec<(usize, usize)> = (0..band.len()).flat_map(|m| (0..np).map(move |q| (m, q))).collect();
        let columns: Vec<Vec<Complex64>> = jobs
            .par_iter()
            .map(|&(m, q)| {
                let k = band.k(m);
                let d = downgoing(k, grid.node(q))?;
                (0..np)
                    .map(|p| Ok(born_amplitude(scatterer, k, upgoing(k, grid.node(p))?, d)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self::from_amplitudes(band, grid, &jobs, columns.iter().map(|c| c.as_slice())))
    }

    fn from_amplitudes<'c>(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        jobs: &[(usize, usize)],
        columns: impl Iterator<Item = &'c [Complex64]>,
    ) -> Self {
        let np = grid.n_propagating();
        let mut matrices = vec![DMatrix::zeros(np, np); band.len()];
        for (&(m, q), col) in jobs.iter().zip(columns) {
            let k = band.k(m);
            for (p, a) in col.iter().enumerate() {
                matrices[m][(p, q)] = entry_scale(&grid, k, p, q) * a;
            }
        }
        Self {
            band,
            grid,
            matrices,
            max_residual: 0.0,
            total_iterations: 0,
        }
    }

    /// Band with explicit matrices (propagating block, one per frequency).
    pub fn from_matrices(
        band: Arc<FrequencyBand>,
        grid: Arc<DirectionGrid>,
        matrices: Vec<DMatrix<Complex64>>,
    ) -> Result<Self> {
        let np = grid.n_propagating();
        if matrices.len() != band.len() || matrices.iter().any(|m| m.shape() != (np, np)) {
            return Err(Error::mismatch(format!(
                "expected {} matrices of size {np}x{np}",
                band.len()
            )));
        }
        Ok(Self {
            band,
            grid,
            matrices,
            max_residual: 0.0,
            total_iterations: 0,
        })
    }

    pub fn band(&self) -> &Arc<FrequencyBand> {
        &self.band
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn matrix(&self, m: usize) -> &DMatrix<Complex64> {
        &self.matrices[m]
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    /// Largest relative residual among the solves behind this band (0 when
    /// not assembled by solves).
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    /// `|1 - |eta'|^2|^{1/4}` on the propagating nodes.
    pub fn weighting(&self) -> Vec<f64> {
        (0..self.grid.n_propagating()).map(|q| self.grid.l2g_weight(q)).collect()
    }

    /// Recovers `A(k_m, eta_p^+, eta_q^-)` from the stored entries.
    pub fn amplitude_matrix(&self, m: usize) -> DMatrix<Complex64> {
        let k = self.band.k(m);
        let s = &self.matrices[m];
        DMatrix::from_fn(s.nrows(), s.ncols(), |p, q| s[(p, q)] / entry_scale(&self.grid, k, p, q))
    }

    /// Largest `|A_pq - A_{-q,-p}|` relative to the largest `|A|` at `k_m`.
    pub fn reciprocity_error(&self, m: usize) -> f64 {
        let a = self.amplitude_matrix(m);
        let scale = a.iter().fold(0.0, |x: f64, z| x.max(z.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for p in 0..a.nrows() {
            for q in 0..a.ncols() {
                let d = a[(p, q)] - a[(self.grid.reflected(q), self.grid.reflected(p))];
                worst = worst.max(d.norm());
            }
        }
        worst / scale
    }

    /// Hilbert–Schmidt norm of the flux-weighted matrix at `k_m`; it bounds
    /// the operator norm from above.
    pub fn hs_norm(&self, m: usize) -> f64 {
        self.weighted(m).norm()
    }

    pub fn hs_norms(&self) -> Vec<f64> {
        (0..self.band.len()).map(|m| self.hs_norm(m)).collect()
    }

    fn weighted(&self, m: usize) -> DMatrix<Complex64> {
        flux_similarity(&self.grid, &self.matrices[m])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(ARCHIVE_VERSION)?;
        w.write_f64::<LittleEndian>(self.band.c0())?;
        w.write_f64::<LittleEndian>(self.band.band_limit())?;
        w.write_u64::<LittleEndian>(self.band.len() as u64)?;
        for &k in self.band.k_values() {
            w.write_f64::<LittleEndian>(k)?;
        }
        let g = &self.grid;
        w.write_f64::<LittleEndian>(g.margin())?;
        w.write_u64::<LittleEndian>(g.len() as u64)?;
        w.write_u64::<LittleEndian>(g.n_propagating() as u64)?;
        for (node, &wt) in g.nodes().iter().zip(g.weights()) {
            w.write_f64::<LittleEndian>(node[0])?;
            w.write_f64::<LittleEndian>(node[1])?;
            w.write_f64::<LittleEndian>(wt)?;
        }
        for x in self.weighting() {
            w.write_f64::<LittleEndian>(x)?;
        }
        w.write_f64::<LittleEndian>(self.max_residual)?;
        w.write_u64::<LittleEndian>(self.total_iterations as u64)?;
        for mat in &self.matrices {
            for z in mat.iter() {
                w.write_f64::<LittleEndian>(z.re)?;
                w.write_f64::<LittleEndian>(z.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("truncated archive: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a scattering band archive".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(fmt)?;
        if version != ARCHIVE_VERSION {
            return Err(Error::Format(format!(
                "archive version {version}, this build reads version {ARCHIVE_VERSION}"
            )));
        }
        let c0 = r.read_f64::<LittleEndian>().map_err(fmt)?;
        let band_limit = r.read_f64::<LittleEndian>().map_err(fmt)?;
        let n_k = read_len(&mut r)?;
        let mut k_values = vec![0.0; n_k];
        r.read_f64_into::<LittleEndian>(&mut k_values).map_err(fmt)?;
        let band = FrequencyBand::new(k_values, band_limit, c0)?;
        let margin = r.read_f64::<LittleEndian>().map_err(fmt)?;
        let n_nodes = read_len(&mut r)?;
        let np = read_len(&mut r)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut weights = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let mut buf = [0.0; 3];
            r.read_f64_into::<LittleEndian>(&mut buf).map_err(fmt)?;
            nodes.push([buf[0], buf[1]]);
            weights.push(buf[2]);
        }
        let grid = DirectionGrid::from_nodes(nodes, weights, np, margin)?;
        let mut weighting = vec![0.0; np];
        r.read_f64_into::<LittleEndian>(&mut weighting).map_err(fmt)?;
        for (q, &x) in weighting.iter().enumerate() {
            if (x - grid.l2g_weight(q)).abs() > 1e-12 {
                return Err(Error::Format(format!("weighting at node {q} disagrees with the grid")));
            }
        }
        let max_residual = r.read_f64::<LittleEndian>().map_err(fmt)?;
        let total_iterations = r.read_u64::<LittleEndian>().map_err(fmt)? as usize;
        let mut matrices = Vec::with_capacity(n_k);
        let mut buf = vec![0.0; 2 * np * np];
        for _ in 0..n_k {
            r.read_f64_into::<LittleEndian>(&mut buf).map_err(fmt)?;
            let vals: Vec<Complex64> = buf.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            matrices.push(DMatrix::from_vec(np, np, vals));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after the last matrix".into()));
        }
        let mut out = Self::from_matrices(Arc::new(band), Arc::new(grid), matrices)?;
        out.max_residual = max_residual;
        out.total_iterations = total_iterations;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    fn check(&self, field: &AngularField) -> Result<()> {
        let ok_band = Arc::ptr_eq(&self.band, field.band()) || *self.band == **field.band();
        let ok_grid = Arc::ptr_eq(&self.grid, field.grid()) || *self.grid == **field.grid();
        if ok_band && ok_grid {
            Ok(())
        } else {
            Err(Error::mismatch("scattering band and field live on different grids"))
        }
    }
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let n = r
        .read_u64::<LittleEndian>()
        .map_err(|e| Error::Format(format!("truncated archive: {e}")))?;
    if n > 1 << 24 {
        return Err(Error::Format(format!("implausible length {n}")));
    }
    Ok(n as usize)
}

fn check_grid(grid: &DirectionGrid) -> Result<()> {
    if (0..grid.n_propagating()).any(|q| !(grid.eta3_abs(q) > 0.0)) {
        return Err(Error::GrazingSingularity);
    }
    Ok(())
}

fn entry_scale(grid: &DirectionGrid, k: f64, p: usize, q: usize) -> Complex64 {
    kernel_prefactor(k, grid.eta3(p, k)) * (KERNEL_TO_AMPLITUDE * k * k * grid.weight(q))
}

impl ScatteringBackend for ScatteringBand {
    /// Propagating block only; evanescent amplitudes neither enter nor leave.
    fn scatter(&self, down: &AngularField) -> Result<AngularField> {
        self.check(down)?;
        let np = self.grid.n_propagating();
        let mut up = AngularField::zeros(self.band.clone(), self.grid.clone(), Orientation::Up);
        let x = down.amplitudes();
        for (m, s) in self.matrices.iter().enumerate() {
            let col = x.view((0, m), (np, 1));
            let y = s * col;
            up.amplitudes_mut().view_mut((0, m), (np, 1)).copy_from(&y);
        }
        Ok(up)
    }
}

impl OperatorMatrices for ScatteringBand {
    fn band(&self) -> &Arc<FrequencyBand> {
        &self.band
    }
    fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }
    fn weighted_matrix(&self, m: usize) -> DMatrix<Complex64> {
        self.weighted(m)
    }
}
