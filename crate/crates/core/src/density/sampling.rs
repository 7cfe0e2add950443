use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DensityError, DensityGrid};
use crate::chem::{classify_pharmacophore, Molecule, PharmacophoreClass};
use crate::geom::{distance, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    #[serde(rename = "t", with = "label")]
    pub class: PharmacophoreClass,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CloudPoint {
    pub fn position(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }
}

mod label {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::chem::PharmacophoreClass;

    pub fn serialize<S: Serializer>(c: &PharmacophoreClass, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(c.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PharmacophoreClass, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Pharmacophore-labeled points sorted ascending by (x, y, z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledPointCloud {
    pub d_min: f64,
    pub n: usize,
    pub points: Vec<CloudPoint>,
}

impl LabeledPointCloud {
    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(CloudPoint::position).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("point clouds serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cloud: LabeledPointCloud = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if cloud.points.len() != cloud.n {
            return Err(format!("n = {} but {} points listed", cloud.n, cloud.points.len()));
        }
        Ok(cloud)
    }
}

fn nearest_atom(mol: &Molecule, p: Vec3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, a) in mol.atoms().iter().enumerate() {
        let d = distance(a.position, p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn sort_points(points: &mut [CloudPoint]) {
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
}

/// Draws `n` grid nodes with probability proportional to max(ρ, 0): without
/// replacement until the positive nodes run out, then with replacement.
/// Each point takes the pharmacophore class of its nearest atom.
pub fn sample_point_cloud(
    grid: &DensityGrid,
    mol: &Molecule,
    n: usize,
    d_min: f64,
    seed: u64,
) -> Result<LabeledPointCloud, DensityError> {
    if n == 0 {
        return Err(DensityError::NoPoints);
    }
    if mol.is_empty() {
        return Err(DensityError::EmptyMolecule);
    }
    let weights: Vec<f64> = grid.values.iter().map(|&v| v.max(0.0)).collect();
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive == 0 {
        return Err(DensityError::EmptyDensity);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = weights.clone();
    let mut chosen = Vec::with_capacity(n);
    for draw in 0..n {
        let pool = if draw < positive { &mut remaining } else { &mut weights.clone() };
        let total: f64 = pool.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in pool.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        let pick = pick.expect("positive weight exists");
        if draw < positive {
            remaining[pick] = 0.0;
        }
        chosen.push(pick);
    }
    let classes: Vec<PharmacophoreClass> = (0..mol.len()).map(|i| classify_pharmacophore(mol, i)).collect();
    let mut points: Vec<CloudPoint> = chosen
        .into_iter()
        .map(|flat| {
            let p = grid.node_position(flat);
            CloudPoint {
                class: classes[nearest_atom(mol, p)],
                x: p[0],
                y: p[1],
                z: p[2],
            }
        })
        .collect();
    sort_points(&mut points);
    Ok(LabeledPointCloud { d_min, n, points })
}
