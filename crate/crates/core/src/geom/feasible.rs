use serde::{Deserialize, Serialize};

use super::{
    add, cross, frame_defined, norm, reconstruct_position, relative_geometry, scale, sub, GeomBins, GeomRecord, Lattice,
    LatticePoint, ToleranceConfig, Vec3,
};

/// Absolute deviations of a placed atom from its target geometry.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeomResiduals {
    pub dl: Option<f64>,
    pub dtheta: Option<f64>,
    pub dphi: Option<f64>,
}

fn circular_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Deviation of `p` from `target` for every target field the anchors can
/// measure. `None` when `p` coincides with an anchor.
pub fn residuals(anchors: &[Vec3], p: Vec3, target: &GeomRecord) -> Option<GeomResiduals> {
    let got = relative_geometry(anchors, p).ok()?;
    let pair = |t: Option<f64>, g: Option<f64>, f: fn(f64, f64) -> f64| match (t, g) {
        (Some(t), Some(g)) => Some(f(t, g)),
        _ => None,
    };
    Some(GeomResiduals {
        dl: pair(target.l, got.l, |a, b| (a - b).abs()),
        dtheta: pair(target.theta, got.theta, |a, b| (a - b).abs()),
        dphi: pair(target.phi, got.phi, circular_diff),
    })
}

/// Whether `p` lies within tolerance of every present target field.
pub fn satisfies(anchors: &[Vec3], p: Vec3, target: &GeomRecord, tol: &ToleranceConfig) -> bool {
    let Some(r) = residuals(anchors, p, target) else {
        return false;
    };
    let ok = |t: Option<f64>, d: Option<f64>, delta: f64| t.is_none() || d.is_some_and(|d| d <= delta);
    ok(target.l, r.dl, tol.delta_l) && ok(target.theta, r.dtheta, tol.delta_theta) && ok(target.phi, r.dphi, tol.delta_phi)
}

/// Target fields the anchor set can constrain: `l` needs one anchor, `theta`
/// two, and `phi` three with a non-collinear frame.
pub(crate) fn effective_target(anchors: &[Vec3], bins: &GeomBins, lattice: &Lattice) -> GeomRecord {
    let mut t = bins.values(&lattice.params);
    if anchors.len() < 2 {
        t.theta = None;
    }
    if !(anchors.len() == 3 && frame_defined([anchors[0], anchors[1], anchors[2]])) {
        t.phi = None;
    }
    t
}

fn perpendicular(v: Vec3) -> Vec3 {
    let axis = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
        [1.0, 0.0, 0.0]
    } else if v[1].abs() <= v[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let c = cross(v, axis);
    scale(c, 1.0 / norm(c))
}

/// A representative exact placement used for fallback.
fn nominal_position(anchors: &[Vec3], t: &GeomRecord) -> Vec3 {
    let l = t.l.unwrap_or(0.0);
    let v1 = anchors[0];
    match (anchors, t.theta, t.phi) {
        ([a, b, c], Some(theta), Some(phi)) => reconstruct_position([*a, *b, *c], l, theta, phi).unwrap_or(v1),
        ([_, v2, ..], Some(theta), _) => {
            let axis = sub(v1, *v2);
            let e1 = scale(axis, 1.0 / norm(axis));
            let u = perpendicular(e1);
            let (s, c) = theta.to_radians().sin_cos();
            add(v1, scale(add(scale(e1, c), scale(u, s)), l))
        }
        _ => add(v1, [l, 0.0, 0.0]),
    }
}

/// Lattice index box covering the real-space box `[lo, hi]`, clipped to the
/// coordinate range.
fn index_box(lattice: &Lattice, lo: Vec3, hi: Vec3) -> ([i32; 3], [i32; 3]) {
    let p = &lattice.params;
    let to_index = |x: f64, k: usize| ((x - lattice.center[k]) / p.sigma).floor() as i64 + p.offset as i64;
    let clip = |i: i64| i.clamp(p.coord_min as i64, p.coord_max as i64) as i32;
    let a = std::array::from_fn(|k| clip(to_index(lo[k], k)));
    let b = std::array::from_fn(|k| clip(to_index(hi[k], k)));
    (a, b)
}

/// Search box for candidates: the hull of the 27 reconstructions at the
/// tolerance corners when a full frame exists, otherwise the shell bounding
/// box around the first anchor; inflated by one lattice step.
fn search_box(anchors: &[Vec3], t: &GeomRecord, tol: &ToleranceConfig, lattice: &Lattice) -> ([i32; 3], [i32; 3]) {
    let sigma = lattice.params.sigma;
    let l = t.l.unwrap_or(0.0);
    let (mut lo, mut hi);
    if let ([a, b, c], Some(theta), Some(phi)) = (anchors, t.theta, t.phi) {
        lo = [f64::INFINITY; 3];
        hi = [f64::NEG_INFINITY; 3];
        for dl in [-1.0, 0.0, 1.0] {
            for dt in [-1.0, 0.0, 1.0] {
                for dp in [-1.0, 0.0, 1.0] {
                    let p = reconstruct_position(
                        [*a, *b, *c],
                        l + dl * tol.delta_l,
                        theta + dt * tol.delta_theta,
                        phi + dp * tol.delta_phi,
                    )
                    .expect("frame checked non-degenerate");
                    for k in 0..3 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
            }
        }
    } else {
        let r = l + tol.delta_l;
        lo = sub(anchors[0], [r; 3]);
        hi = add(anchors[0], [r; 3]);
    }
    index_box(lattice, sub(lo, [sigma; 3]), add(hi, [sigma; 3]))
}

/// Lattice points whose voxel centers satisfy the tolerance constraints
/// around the geometry recovered from `bins`, in lexicographic order.
/// Falls back to the lattice point nearest a nominal placement when no point
/// qualifies, so the result is never empty.
///
/// `anchors` is `[v1]`, `[v1, v2]` or `[v1, v2, v3]`; fields the anchors
/// cannot measure are ignored.
pub fn feasible_lattice_points(
    anchors: &[Vec3],
    bins: &GeomBins,
    tol: &ToleranceConfig,
    lattice: &Lattice,
) -> Vec<LatticePoint> {
    assert!(!anchors.is_empty() && anchors.len() <= 3, "need one to three anchors");
    let target = effective_target(anchors, bins, lattice);
    let (lo, hi) = search_box(anchors, &target, tol, lattice);
    let p = &lattice.params;
    let l = target.l.unwrap_or(0.0);
    // squared radii of the distance shell, widened by a lattice step so the
    // column bounds below never cut off a qualifying point
    let r_in = (l - tol.delta_l - p.sigma).max(0.0);
    let r_out = l + tol.delta_l + p.sigma;
    let z_index = |z: f64| ((z - lattice.center[2]) / p.sigma).floor() as i64 + p.offset as i64;
    let mut out = Vec::new();
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            let c = lattice.dequantize([x, y, 0]);
            let dxy2 = (c[0] - anchors[0][0]).powi(2) + (c[1] - anchors[0][1]).powi(2);
            if dxy2 > r_out * r_out {
                continue;
            }
            let outer = (r_out * r_out - dxy2).sqrt();
            let inner = (r_in * r_in - dxy2).max(0.0).sqrt();
            let z0 = anchors[0][2];
            let spans = [(z0 - outer, z0 - inner), (z0 + inner, z0 + outer)];
            let mut last = i64::MIN;
            for (a, b) in spans {
                let from = (z_index(a) - 1).max(lo[2] as i64).max(last + 1);
                let to = (z_index(b) + 1).min(hi[2] as i64);
                for z in from..=to {
                    let q = [x, y, z as i32];
                    if satisfies(anchors, lattice.dequantize(q), &target, tol) {
                        out.push(q);
                    }
                }
                last = last.max(to);
            }
        }
    }
    if out.is_empty() {
        out.push(lattice.quantize(nominal_position(anchors, &target)).0);
    }
    out
}
