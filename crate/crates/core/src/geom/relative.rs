use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{add, bin_floor, cross, dot, norm, scale, sub, DiscretizationParams, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeomError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
}

/// Continuous relative geometry of an atom against up to three ancestors.
/// `theta` and `phi` are in degrees; absent fields lack enough anchors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeomRecord {
    pub l: Option<f64>,
    pub theta: Option<f64>,
    pub phi: Option<f64>,
}

/// Discretized relative geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeomBins {
    pub l: Option<u16>,
    pub theta: Option<u16>,
    pub phi: Option<u16>,
}

impl GeomRecord {
    pub fn bins(&self, p: &DiscretizationParams) -> GeomBins {
        let cap = |x: f64, w: f64| bin_floor(x, w).clamp(0, p.geom_bins as i64 - 1) as u16;
        GeomBins {
            l: self.l.map(|l| cap(l, p.sigma)),
            theta: self.theta.map(|t| cap(t, p.angle_bin)),
            phi: self.phi.map(|f| cap(f, p.angle_bin)),
        }
    }
}

impl GeomBins {
    /// Continuous values recovered from bins: bin index times bin width.
    pub fn values(&self, p: &DiscretizationParams) -> GeomRecord {
        GeomRecord {
            l: self.l.map(|b| b as f64 * p.sigma),
            theta: self.theta.map(|b| b as f64 * p.angle_bin),
            phi: self.phi.map(|b| b as f64 * p.angle_bin),
        }
    }
}

const EPS: f64 = 1e-12;

fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Dihedral from three successive displacements, in [0, 360). `None` when
/// `b1` and `b2` are parallel, which leaves the reference plane undefined.
fn dihedral(b1: Vec3, b2: Vec3, b3: Vec3) -> Option<f64> {
    let n1 = cross(b1, b2);
    if norm(n1) <= EPS * norm(b1) * norm(b2) || norm(n1) == 0.0 {
        return None;
    }
    let n2 = cross(b2, b3);
    let y = dot(cross(n1, n2), b2) / norm(b2);
    let x = dot(n1, n2);
    let phi = y.atan2(x).to_degrees();
    Some(if phi < 0.0 { phi + 360.0 } else if phi >= 360.0 { phi - 360.0 } else { phi })
}

/// Whether anchors `[v1, v2, v3]` span a plane, so a dihedral is defined.
pub(crate) fn frame_defined(anchors: [Vec3; 3]) -> bool {
    let b1 = sub(anchors[1], anchors[2]);
    let b2 = sub(anchors[0], anchors[1]);
    norm(cross(b1, b2)) > EPS * norm(b1) * norm(b2)
}

/// Measures the geometry of `v0` against `anchors = [v1, v2, v3]` (nearest
/// ancestor first; shorter slices leave the trailing fields absent).
///
/// `l = |v0 - v1|`, `theta` is the angle between `v1 - v2` and `v0 - v1`
/// (0 for straight continuation), `phi` the dihedral about the `v2 -> v1` axis.
pub fn relative_geometry(anchors: &[Vec3], v0: Vec3) -> Result<GeomRecord, GeomError> {
    let mut rec = GeomRecord::default();
    let Some(&v1) = anchors.first() else {
        return Ok(rec);
    };
    let b3 = sub(v0, v1);
    let l = norm(b3);
    if l <= EPS {
        return Err(GeomError::Degenerate("atom coincides with its first ancestor"));
    }
    rec.l = Some(l);
    let Some(&v2) = anchors.get(1) else {
        return Ok(rec);
    };
    let b2 = sub(v1, v2);
    if norm(b2) <= EPS {
        return Err(GeomError::Degenerate("coincident first and second ancestors"));
    }
    rec.theta = Some(angle_deg(b2, b3));
    let Some(&v3) = anchors.get(2) else {
        return Ok(rec);
    };
    let b1 = sub(v2, v3);
    if norm(b1) <= EPS {
        return Err(GeomError::Degenerate("coincident second and third ancestors"));
    }
    rec.phi = dihedral(b1, b2, b3);
    Ok(rec)
}

/// Inverse of [`relative_geometry`] for a full anchor frame `[v1, v2, v3]`:
/// the point at distance `l` from `v1` with displacement angle `theta` and
/// dihedral `phi` (degrees).
pub fn reconstruct_position(anchors: [Vec3; 3], l: f64, theta: f64, phi: f64) -> Result<Vec3, GeomError> {
    let [v1, v2, v3] = anchors;
    let b2 = sub(v1, v2);
    let n2 = norm(b2);
    if n2 <= EPS {
        return Err(GeomError::Degenerate("coincident first and second ancestors"));
    }
    let e1 = scale(b2, 1.0 / n2);
    let (st, ct) = theta.to_radians().sin_cos();
    if st.abs() <= EPS {
        return Ok(add(v1, scale(e1, l * ct)));
    }
    let b1 = sub(v2, v3);
    let perp = sub(b1, scale(e1, dot(b1, e1)));
    let np = norm(perp);
    if np <= EPS * norm(b1).max(1.0) {
        return Err(GeomError::Degenerate("collinear anchor frame"));
    }
    let u = scale(perp, 1.0 / np);
    let w = cross(e1, u);
    let (sp, cp) = phi.to_radians().sin_cos();
    let dir = sub(scale(e1, ct), scale(add(scale(u, cp), scale(w, sp)), st));
    Ok(add(v1, scale(dir, l)))
}
