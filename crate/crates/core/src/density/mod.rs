//! Calculated electron density: structure factors of a molecule in a P1
//! orthorhombic cell, a resolution-truncated inverse transform onto a real
//! grid, and pharmacophore-labeled point sampling.

mod grid_io;
mod sampling;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::Molecule;
use crate::geom::Vec3;

pub use grid_io::{read_grid, write_grid};
pub use sampling::{sample_point_cloud, CloudPoint, LabeledPointCloud};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("d_min must be positive and finite, got {0}")]
    InvalidDMin(f64),
    #[error("padding must be positive and finite, got {0}")]
    InvalidPadding(f64),
    #[error("molecule has no atoms")]
    EmptyMolecule,
    #[error("atom {0} lies outside the cell")]
    OutsideCell(usize),
    #[error("structure factors not closed under Friedel pairing: ({0}, {1}, {2}) lacks its mate")]
    FriedelViolation(i32, i32, i32),
    #[error("grid {dims:?} too coarse: spacing must be at most d_min/3")]
    GridTooCoarse { dims: [usize; 3] },
    #[error("imaginary residual {0:e} exceeds tolerance")]
    ImaginaryResidual(f64),
    #[error("density has no positive values to sample")]
    EmptyDensity,
    #[error("point count must be at least 1")]
    NoPoints,
    #[error("grid file: {0}")]
    Format(String),
}

/// Orthorhombic P1 cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub origin: Vec3,
    /// Edge lengths a, b, c in Å.
    pub edges: [f64; 3],
}

impl Cell {
    pub fn volume(&self) -> f64 {
        self.edges.iter().product()
    }

    pub fn fractional(&self, v: Vec3) -> Vec3 {
        std::array::from_fn(|k| (v[k] - self.origin[k]) / self.edges[k])
    }

    /// Reciprocal vector (h/a, k/b, l/c) in Å⁻¹.
    pub fn reciprocal(&self, h: [i32; 3]) -> Vec3 {
        std::array::from_fn(|k| h[k] as f64 / self.edges[k])
    }
}

/// Axis-aligned bounding box of the atoms padded by `padding` on every face.
/// A single atom yields a cube of edge `2 * padding`.
pub fn build_cell(mol: &Molecule, padding: f64) -> Result<Cell, DensityError> {
    if !(padding.is_finite() && padding > 0.0) {
        return Err(DensityError::InvalidPadding(padding));
    }
    if mol.is_empty() {
        return Err(DensityError::EmptyMolecule);
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for a in mol.atoms() {
        for k in 0..3 {
            lo[k] = lo[k].min(a.position[k]);
            hi[k] = hi[k].max(a.position[k]);
        }
    }
    Ok(Cell {
        origin: std::array::from_fn(|k| lo[k] - padding),
        edges: std::array::from_fn(|k| hi[k] - lo[k] + 2.0 * padding),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormFactorMode {
    /// f(h) = Z.
    #[default]
    ConstantZ,
    /// f(h) = Z exp(-B |h|² / 4).
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormFactorModel {
    pub mode: FormFactorMode,
    /// Smearing parameter in Å² for the Gaussian mode.
    pub b: f64,
}

impl Default for FormFactorModel {
    fn default() -> Self {
        FormFactorModel {
            mode: FormFactorMode::ConstantZ,
            b: 20.0,
        }
    }
}

impl FormFactorModel {
    /// Scattering factor of an atom with `z` electrons at |h|² = `s2`.
    pub fn value(&self, z: f64, s2: f64) -> f64 {
        match self.mode {
            FormFactorMode::ConstantZ => z,
            FormFactorMode::Gaussian => z * (-self.b * s2 / 4.0).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFactorSet {
    pub cell: Cell,
    pub d_min: f64,
    /// Miller triples in ascending (h, k, l) order with their factors.
    pub entries: Vec<([i32; 3], Complex64)>,
}

impl StructureFactorSet {
    pub fn get(&self, h: [i32; 3]) -> Option<Complex64> {
        self.entries
            .binary_search_by(|(m, _)| m.cmp(&h))
            .ok()
            .map(|i| self.entries[i].1)
    }
}

/// All Miller triples with |(h/a, k/b, l/c)| <= 1/d_min, ascending.
pub fn miller_indices(cell: &Cell, d_min: f64) -> Vec<[i32; 3]> {
    let smax2 = 1.0 / (d_min * d_min);
    let bound: [i32; 3] = std::array::from_fn(|k| (cell.edges[k] / d_min).floor() as i32);
    let mut out = Vec::new();
    for h in -bound[0]..=bound[0] {
        for k in -bound[1]..=bound[1] {
            for l in -bound[2]..=bound[2] {
                let s = cell.reciprocal([h, k, l]);
                if s[0] * s[0] + s[1] * s[1] + s[2] * s[2] <= smax2 * (1.0 + 1e-12) {
                    out.push([h, k, l]);
                }
            }
        }
    }
    out
}

/// F(h) = Σ_i f_i(h) exp(2πi h·x_i) over every Miller triple within the
/// resolution sphere, with x_i in fractional coordinates.
pub fn structure_factors(
    mol: &Molecule,
    cell: &Cell,
    d_min: f64,
    ff: &FormFactorModel,
) -> Result<StructureFactorSet, DensityError> {
    if !(d_min.is_finite() && d_min > 0.0) {
        return Err(DensityError::InvalidDMin(d_min));
    }
    let frac: Vec<Vec3> = mol.atoms().iter().map(|a| cell.fractional(a.position)).collect();
    if let Some(i) = frac.iter().position(|f| f.iter().any(|&x| !(0.0..1.0).contains(&x))) {
        return Err(DensityError::OutsideCell(i));
    }
    let z: Vec<f64> = mol.atoms().iter().map(|a| a.element.atomic_number() as f64).collect();
    let entries = miller_indices(cell, d_min)
        .into_iter()
        .map(|h| {
            let s = cell.reciprocal(h);
            let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
            let mut f = Complex64::new(0.0, 0.0);
            for (x, &zi) in frac.iter().zip(&z) {
                let phase = 2.0 * PI * (h[0] as f64 * x[0] + h[1] as f64 * x[1] + h[2] as f64 * x[2]);
                f += Complex64::from_polar(ff.value(zi, s2), phase);
            }
            (h, f)
        })
        .collect();
    Ok(StructureFactorSet {
        cell: *cell,
        d_min,
        entries,
    })
}

/// Real-space density sampled at grid nodes `frac = (i/nx, j/ny, k/nz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub cell: Cell,
    pub dims: [usize; 3],
    /// x-fastest.
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Grid indices of a flat index.
    pub fn node(&self, flat: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    pub fn node_position(&self, flat: usize) -> Vec3 {
        let n = self.node(flat);
        std::array::from_fn(|k| self.cell.origin[k] + self.cell.edges[k] * n[k] as f64 / self.dims[k] as f64)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.cell.volume() / self.values.len() as f64
    }

    /// Σρ times the voxel volume: the integrated electron count.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.voxel_volume()
    }
}

/// Smallest grid with spacing at most d_min/3 on every axis.
pub fn default_dims(cell: &Cell, d_min: f64) -> [usize; 3] {
    std::array::from_fn(|k| ((3.0 * cell.edges[k] / d_min) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

/// ρ(x) = (1/V) Σ_h F(h) exp(-2πi h·x) at every grid node, evaluated with
/// separable per-axis phase tables.
pub fn density_from_factors(sf: &StructureFactorSet, dims: [usize; 3]) -> Result<DensityGrid, DensityError> {
    for k in 0..3 {
        if dims[k] == 0 || sf.cell.edges[k] / dims[k] as f64 > sf.d_min / 3.0 * (1.0 + 1e-9) {
            return Err(DensityError::GridTooCoarse { dims });
        }
    }
    for (h, _) in &sf.entries {
        let mate = [-h[0], -h[1], -h[2]];
        if sf.get(mate).is_none() {
            return Err(DensityError::FriedelViolation(h[0], h[1], h[2]));
        }
    }
    let [nx, ny, nz] = dims;
    // tables[axis][(h + hmax) * n + i] = exp(-2πi h i / n)
    let hmax: [i32; 3] = std::array::from_fn(|a| sf.entries.iter().map(|(h, _)| h[a].abs()).max().unwrap_or(0));
    let table = |axis: usize, n: usize| -> Vec<Complex64> {
        let mut t = Vec::with_capacity((2 * hmax[axis] as usize + 1) * n);
        for h in -hmax[axis]..=hmax[axis] {
            for i in 0..n {
                let frac = ((h as i64 * i as i64).rem_euclid(n as i64)) as f64 / n as f64;
                t.push(Complex64::from_polar(1.0, -2.0 * PI * frac));
            }
        }
        t
    };
    let (tx, ty, tz) = (table(0, nx), table(1, ny), table(2, nz));
    let inv_v = 1.0 / sf.cell.volume();
    let mut values = vec![0.0; nx * ny * nz];
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    let mut row = vec![Complex64::new(0.0, 0.0); nx];
    for k in 0..nz {
        for j in 0..ny {
            row.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (h, f) in &sf.entries {
                let yz = *f
                    * ty[(h[1] + hmax[1]) as usize * ny + j]
                    * tz[(h[2] + hmax[2]) as usize * nz + k];
                let base = (h[0] + hmax[0]) as usize * nx;
                for (i, c) in row.iter_mut().enumerate() {
                    *c += yz * tx[base + i];
                }
            }
            for (i, c) in row.iter().enumerate() {
                let v = c * inv_v;
                max_re = max_re.max(v.re.abs());
                max_im = max_im.max(v.im.abs());
                values[i + nx * (j + ny * k)] = v.re;
            }
        }
    }
    if max_im > 1e-9 * max_re.max(f64::MIN_POSITIVE) {
        return Err(DensityError::ImaginaryResidual(max_im / max_re));
    }
    Ok(DensityGrid {
        cell: sf.cell,
        dims,
        values,
    })
}

/// Density-stage settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    /// Resolution cutoff in Å.
    pub d_min: f64,
    /// Points per cloud.
    pub n_points: usize,
    /// Cell padding in Å.
    pub padding: f64,
    pub form_factor: FormFactorModel,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            d_min: 3.5,
            n_points: 199,
            padding: 4.0,
            form_factor: FormFactorModel::default(),
        }
    }
}

/// Cell, structure factors and density grid for one molecule.
pub fn compute_density(mol: &Molecule, cfg: &DensityConfig) -> Result<(StructureFactorSet, DensityGrid), DensityError> {
    let cell = build_cell(mol, cfg.padding)?;
    let sf = structure_factors(mol, &cell, cfg.d_min, &cfg.form_factor)?;
    let grid = density_from_factors(&sf, default_dims(&cell, cfg.d_min))?;
    Ok((sf, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{Atom, Element};

    fn mol(atoms: &[(Element, Vec3)]) -> Molecule {
        let mut m = Molecule::new();
        for &(e, p) in atoms {
            m.add_atom(Atom::new(e).at(p));
        }
        m
    }

    #[test]
    fn cells() {
        let one = build_cell(&mol(&[(Element::C, [0.0; 3])]), 4.0).unwrap();
        assert_eq!(one.edges, [8.0; 3]);
        assert_eq!(one.origin, [-4.0; 3]);
        let two = build_cell(&mol(&[(Element::C, [0.0; 3]), (Element::C, [10.0, 0.0, 0.0])]), 4.0).unwrap();
        assert_eq!(two.edges[0], 18.0);
        assert!(build_cell(&mol(&[(Element::C, [0.0; 3])]), 0.0).is_err());
    }

    #[test]
    fn zero_phase_and_dc() {
        let cell = Cell { origin: [0.0; 3], edges: [8.0; 3] };
        let h = mol(&[(Element::H, [0.0; 3])]);
        let sf = structure_factors(&h, &cell, 2.0, &FormFactorModel::default()).unwrap();
        assert!(sf.entries.iter().all(|(_, f)| *f == Complex64::new(1.0, 0.0)));
        let methane = mol(&[
            (Element::C, [4.0; 3]),
            (Element::H, [4.6, 4.6, 4.6]),
            (Element::H, [3.4, 3.4, 4.6]),
            (Element::H, [3.4, 4.6, 3.4]),
            (Element::H, [4.6, 3.4, 3.4]),
        ]);
        let sf = structure_factors(&methane, &cell, 2.0, &FormFactorModel::default()).unwrap();
        assert_eq!(sf.get([0, 0, 0]), Some(Complex64::new(10.0, 0.0)));
    }

    #[test]
    fn half_cell_cancellation() {
        let cell = Cell { origin: [0.0; 3], edges: [8.0; 3] };
        let m = mol(&[(Element::C, [0.0; 3]), (Element::C, [4.0, 0.0, 0.0])]);
        let sf = structure_factors(&m, &cell, 2.0, &FormFactorModel::default()).unwrap();
        assert!(sf.get([1, 0, 0]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn dc_only_grid_is_constant() {
        let cell = Cell { origin: [0.0; 3], edges: [6.0, 7.0, 8.0] };
        let sf = StructureFactorSet {
            cell,
            d_min: 3.0,
            entries: vec![([0, 0, 0], Complex64::new(12.0, 0.0))],
        };
        let g = density_from_factors(&sf, default_dims(&cell, 3.0)).unwrap();
        assert!(g.values.iter().all(|v| (v - 12.0 / cell.volume()).abs() < 1e-15));
    }

    #[test]
    fn friedel_and_coarse_grid_errors() {
        let cell = Cell { origin: [0.0; 3], edges: [6.0; 3] };
        let sf = StructureFactorSet {
            cell,
            d_min: 3.0,
            entries: vec![([0, 0, 0], Complex64::new(1.0, 0.0)), ([1, 0, 0], Complex64::new(1.0, 0.0))],
        };
        assert_eq!(density_from_factors(&sf, [6, 6, 6]), Err(DensityError::FriedelViolation(1, 0, 0)));
        assert!(matches!(density_from_factors(&sf, [2, 6, 6]), Err(DensityError::GridTooCoarse { .. })));
        let m = mol(&[(Element::C, [1.0; 3])]);
        assert_eq!(structure_factors(&m, &cell, 0.0, &FormFactorModel::default()), Err(DensityError::InvalidDMin(0.0)));
    }

    #[test]
    fn gaussian_mode_matches_z_at_origin() {
        let ff = FormFactorModel { mode: FormFactorMode::Gaussian, b: 20.0 };
        assert_eq!(ff.value(6.0, 0.0), 6.0);
        assert!(ff.value(6.0, 0.05) < 6.0);
    }

    #[test]
    fn finer_resolution_never_loses_indices() {
        let cell = Cell { origin: [0.0; 3], edges: [11.0, 9.5, 13.2] };
        let mut last = 0;
        for d in [5.0, 4.0, 3.5, 3.0, 2.5, 2.0] {
            let n = miller_indices(&cell, d).len();
            assert!(n >= last);
            last = n;
        }
    }
}
