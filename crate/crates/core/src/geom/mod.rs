//! Coordinate lattice, relative internal geometry (bond length, displacement
//! angle, dihedral) and the tolerance-bounded inverse used at generation time.

mod feasible;
mod relative;

use serde::{Deserialize, Serialize};

pub use feasible::{feasible_lattice_points, residuals, satisfies, GeomResiduals};
pub(crate) use feasible::effective_target;
pub(crate) use relative::frame_defined;
pub use relative::{reconstruct_position, relative_geometry, GeomBins, GeomError, GeomRecord};

pub type Vec3 = [f64; 3];

/// Integer lattice coordinate after the offset shift.
pub type LatticePoint = [i32; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Floor of `x / width`, tolerant of values a rounding error below a bin edge.
pub(crate) fn bin_floor(x: f64, width: f64) -> i64 {
    (x / width + 1e-9).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationParams {
    /// Lattice spacing and bond-length bin width in Å.
    pub sigma: f64,
    /// Added to centered bins so they become non-negative.
    pub offset: i32,
    pub coord_min: i32,
    pub coord_max: i32,
    /// Angle bin width in degrees.
    pub angle_bin: f64,
    /// Number of slots in each of the bond-length, angle and dihedral heads.
    pub geom_bins: u16,
}

impl Default for DiscretizationParams {
    fn default() -> Self {
        DiscretizationParams {
            sigma: 0.1,
            offset: 150,
            coord_min: 0,
            coord_max: 299,
            angle_bin: 10.0,
            geom_bins: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub delta_l: f64,
    pub delta_theta: f64,
    pub delta_phi: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            delta_l: 0.1,
            delta_theta: 10.0,
            delta_phi: 10.0,
        }
    }
}

/// A lattice anchored at a real-space center: lattice point `q` stands for
/// the voxel whose lower corner is `center + (q - offset) * sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub params: DiscretizationParams,
    pub center: Vec3,
}

impl Lattice {
    pub fn new(params: DiscretizationParams, center: Vec3) -> Self {
        Lattice { params, center }
    }

    /// Lattice centered on the arithmetic mean of `positions`.
    pub fn centered_on(params: DiscretizationParams, positions: &[Vec3]) -> Self {
        Lattice::new(params, centroid(positions))
    }

    /// Quantizes one position; the flag reports whether clamping occurred.
    pub fn quantize(&self, v: Vec3) -> (LatticePoint, bool) {
        let p = &self.params;
        let mut clamped = false;
        let mut q = [0; 3];
        for k in 0..3 {
            let raw = bin_floor(v[k] - self.center[k], p.sigma) + p.offset as i64;
            let c = raw.clamp(p.coord_min as i64, p.coord_max as i64);
            clamped |= c != raw;
            q[k] = c as i32;
        }
        (q, clamped)
    }

    /// Center of the voxel represented by `q`.
    pub fn dequantize(&self, q: LatticePoint) -> Vec3 {
        let p = &self.params;
        std::array::from_fn(|k| self.center[k] + ((q[k] - p.offset) as f64 + 0.5) * p.sigma)
    }

    pub fn contains(&self, q: LatticePoint) -> bool {
        q.iter().all(|&c| (self.params.coord_min..=self.params.coord_max).contains(&c))
    }
}

pub fn centroid(positions: &[Vec3]) -> Vec3 {
    if positions.is_empty() {
        return [0.0; 3];
    }
    let mut c = [0.0; 3];
    for p in positions {
        c = add(c, *p);
    }
    scale(c, 1.0 / positions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub coords: Vec<LatticePoint>,
    pub center: Vec3,
    /// Number of positions that fell outside the coordinate range.
    pub clamped: usize,
}

/// Quantizes positions on a lattice centered at their own mean.
pub fn discretize_coords(positions: &[Vec3], params: &DiscretizationParams) -> Discretized {
    discretize_about(positions, &Lattice::centered_on(*params, positions))
}

/// Quantizes positions on an existing lattice.
pub fn discretize_about(positions: &[Vec3], lattice: &Lattice) -> Discretized {
    let mut clamped = 0;
    let coords = positions
        .iter()
        .map(|&v| {
            let (q, c) = lattice.quantize(v);
            clamped += c as usize;
            q
        })
        .collect();
    Discretized {
        coords,
        center: lattice.center,
        clamped,
    }
}
