//! Independent geometry routines: dihedral via projected perpendiculars and an
//! exhaustive lattice scan over the whole shell around the first anchor.
#![allow(dead_code)]

pub type V = [f64; 3];

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: V, b: V) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
fn len(a: V) -> f64 {
    dot(a, a).sqrt()
}
fn cross(a: V, b: V) -> V {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
fn reject(a: V, unit: V) -> V {
    let d = dot(a, unit);
    [a[0] - d * unit[0], a[1] - d * unit[1], a[2] - d * unit[2]]
}

pub fn bond_length(v1: V, v0: V) -> f64 {
    len(sub(v0, v1))
}

/// Angle in degrees between the displacements v2->v1 and v1->v0.
pub fn displacement_angle(v2: V, v1: V, v0: V) -> f64 {
    let a = sub(v1, v2);
    let b = sub(v0, v1);
    (dot(a, b) / (len(a) * len(b))).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Dihedral in [0, 360) measured from the v3 side to the v0 side about the
/// v2 -> v1 axis; 0 when v3 and v0 are eclipsed.
pub fn dihedral(v3: V, v2: V, v1: V, v0: V) -> f64 {
    let axis = sub(v1, v2);
    let e = [axis[0] / len(axis), axis[1] / len(axis), axis[2] / len(axis)];
    let p = reject(sub(v3, v2), e);
    let q = reject(sub(v0, v1), e);
    let y = dot(cross(e, p), q);
    let x = dot(p, q);
    let d = y.atan2(x).to_degrees();
    (d + 360.0) % 360.0
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

pub struct ScanSpec {
    pub sigma: f64,
    pub offset: i32,
    pub lo: i32,
    pub hi: i32,
    pub center: V,
    pub dl: f64,
    pub dt: f64,
    pub dp: f64,
}

impl ScanSpec {
    pub fn point(&self, q: [i32; 3]) -> V {
        std::array::from_fn(|k| self.center[k] + ((q[k] - self.offset) as f64 + 0.5) * self.sigma)
    }
}

/// Every lattice point within `l + dl + sigma` of v1 (per axis) that meets
/// the constraints. `anchors` is [v1], [v1, v2] or [v1, v2, v3]; `target`
/// holds the continuous (l, theta, phi) to enforce, `None` to skip.
pub fn exhaustive_scan(spec: &ScanSpec, anchors: &[V], target: (f64, Option<f64>, Option<f64>)) -> Vec<[i32; 3]> {
    let v1 = anchors[0];
    let r = target.0 + spec.dl + spec.sigma;
    let idx = |x: f64, k: usize| (((x - spec.center[k]) / spec.sigma).floor() as i32 + spec.offset).clamp(spec.lo, spec.hi);
    let lo: [i32; 3] = std::array::from_fn(|k| idx(v1[k] - r, k));
    let hi: [i32; 3] = std::array::from_fn(|k| idx(v1[k] + r, k));
    let mut out = Vec::new();
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                let p = spec.point([x, y, z]);
                let l = bond_length(v1, p);
                if l == 0.0 || (l - target.0).abs() > spec.dl {
                    continue;
                }
                if let Some(t) = target.1 {
                    if (displacement_angle(anchors[1], v1, p) - t).abs() > spec.dt {
                        continue;
                    }
                }
                if let Some(f) = target.2 {
                    if circ(dihedral(anchors[2], anchors[1], v1, p), f) > spec.dp {
                        continue;
                    }
                }
                out.push([x, y, z]);
            }
        }
    }
    out
}
