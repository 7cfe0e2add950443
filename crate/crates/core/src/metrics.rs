//! Circular fingerprints, Tanimoto similarity, recovery and diversity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{Element, Molecule};

/// Radius 2 matches ECFP4 (diameter 4).
pub const DEFAULT_RADIUS: u32 = 2;

/// Similarity above which a reference counts as recovered.
pub const RECOVERY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("fingerprint radii differ: {0} vs {1}")]
    Radius(u32, u32),
    #[error("{0} molecule list is empty")]
    Empty(&'static str),
}

/// Unfolded set of 32-bit environment identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub bits: BTreeSet<u32>,
    pub radius: u32,
}

/// 32-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Morgan-style fingerprint on the hydrogen-suppressed graph. Round 0 hashes
/// (atomic number, heavy degree, charge, aromatic flag, hydrogen count);
/// round r hashes the atom's previous id followed by the sorted
/// (bond order, neighbor id) pairs. Ids of all rounds form the set.
pub fn fingerprint(mol: &Molecule, radius: u32) -> Fingerprint {
    let (heavy, _) = mol.strip_hydrogens();
    let n = heavy.len();
    let mut ids: Vec<u32> = (0..n)
        .map(|i| {
            let a = heavy.atom(i);
            fnv1a(&[
                a.element.atomic_number() as u8,
                heavy.degree(i) as u8,
                a.formal_charge as u8,
                a.aromatic as u8,
                heavy.total_h(i),
            ])
        })
        .collect();
    let mut bits: BTreeSet<u32> = ids.iter().copied().collect();
    for _ in 0..radius {
        let next: Vec<u32> = (0..n)
            .map(|i| {
                let mut env: Vec<(u8, u32)> = heavy
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bond)| (heavy.bond(bond).order.sdf_code(), ids[j]))
                    .collect();
                env.sort_unstable();
                let mut bytes = ids[i].to_le_bytes().to_vec();
                for (order, id) in env {
                    bytes.push(order);
                    bytes.extend_from_slice(&id.to_le_bytes());
                }
                fnv1a(&bytes)
            })
            .collect();
        ids = next;
        bits.extend(ids.iter().copied());
    }
    Fingerprint { bits, radius }
}

/// |a ∩ b| / |a ∪ b|, and 1 when both sets are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, MetricsError> {
    if a.radius != b.radius {
        return Err(MetricsError::Radius(a.radius, b.radius));
    }
    let inter = a.bits.intersection(&b.bits).count();
    let union = a.bits.len() + b.bits.len() - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Sum of standard atomic masses, hydrogens included.
pub fn molecular_weight(mol: &Molecule) -> f64 {
    (0..mol.len())
        .map(|i| {
            let a = mol.atom(i);
            let h = (a.explicit_h + mol.implicit_h(i)) as f64;
            a.element.mass() + h * Element::H.mass()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Some generated/reference pair exceeds the recovery threshold.
    pub recovered: bool,
    /// Mean over generated molecules of the best similarity to any reference.
    pub div: f64,
    pub mean_mw: f64,
    /// `pairs[g][r]` is the similarity of generated `g` to reference `r`.
    pub pairs: Vec<Vec<f64>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Pairwise similarities with the default radius, summarized.
pub fn recovery_and_diversity(generated: &[Molecule], references: &[Molecule]) -> Result<Report, MetricsError> {
    if generated.is_empty() {
        return Err(MetricsError::Empty("generated"));
    }
    if references.is_empty() {
        return Err(MetricsError::Empty("reference"));
    }
    let refs: Vec<Fingerprint> = references.iter().map(|m| fingerprint(m, DEFAULT_RADIUS)).collect();
    let pairs: Vec<Vec<f64>> = generated
        .iter()
        .map(|g| {
            let fg = fingerprint(g, DEFAULT_RADIUS);
            refs.iter().map(|fr| tanimoto(&fg, fr)).collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(report_from_pairs(pairs, generated))
}

/// Report from a precomputed similarity matrix, rows indexed like `generated`.
pub fn report_from_pairs(pairs: Vec<Vec<f64>>, generated: &[Molecule]) -> Report {
    let recovered = pairs.iter().flatten().any(|&s| s > RECOVERY_THRESHOLD);
    let div = pairs.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum::<f64>() / pairs.len() as f64;
    let mean_mw = generated.iter().map(molecular_weight).sum::<f64>() / generated.len() as f64;
    Report { recovered, div, mean_mw, pairs }
}
