//! Per-token encoding of a molecule: FSMILES token ids, lattice coordinates
//! of atom tokens, and relative-geometry bins against traced ancestors.
//! Point clouds share the same lattice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::Molecule;
use crate::density::LabeledPointCloud;
use crate::fsmiles::{atom_ancestors, prepare_for_tokens, tokenize, FsmilesError, TokenEvent, TokenId, TokenKind, Vocab};
use crate::geom::{relative_geometry, GeomBins, GeomError, Lattice, LatticePoint, Vec3};

/// Marks a field that does not apply to a token.
pub const ABSENT: i32 = -1;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Tokens(#[from] FsmilesError),
    #[error("atom {atom}: {source}")]
    Geometry {
        atom: usize,
        #[source]
        source: GeomError,
    },
    #[error("invalid sequence: {0}")]
    Invalid(String),
}

/// Token sequence with per-token coordinates and geometry bins. Non-atom
/// tokens carry [`ABSENT`] in every field, as do geometry fields an atom's
/// anchors cannot define.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodedSequence {
    pub tokens: Vec<TokenId>,
    pub coords: Vec<[i32; 3]>,
    pub geom: Vec<[i32; 3]>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequences serialize")
    }

    /// Parses and checks lengths, token ids and sentinel placement.
    pub fn from_json(text: &str) -> Result<Self, EncodeError> {
        let seq: EncodedSequence = serde_json::from_str(text).map_err(|e| EncodeError::Invalid(e.to_string()))?;
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        let bad = |m: String| Err(EncodeError::Invalid(m));
        if self.coords.len() != self.len() || self.geom.len() != self.len() {
            return bad("tokens, coords and geom differ in length".into());
        }
        let vocab = Vocab::get();
        for (i, &id) in self.tokens.iter().enumerate() {
            if vocab.token(id).is_none() {
                return bad(format!("token {i}: unknown id {id}"));
            }
            let atom = vocab.kind(id) == TokenKind::Atom;
            let c = self.coords[i];
            if atom != c.iter().all(|&v| v != ABSENT) || c.iter().any(|&v| v < ABSENT) {
                return bad(format!("token {i}: coordinates {c:?} do not match the token kind"));
            }
            let g = self.geom[i];
            if g.iter().any(|&v| v < ABSENT) || (!atom && g != [ABSENT; 3]) {
                return bad(format!("token {i}: geometry {g:?} does not match the token kind"));
            }
        }
        Ok(())
    }

    pub fn events(&self) -> Result<Vec<TokenEvent>, EncodeError> {
        Ok(crate::fsmiles::events_from_ids(&self.tokens)?)
    }
}

fn opt(v: Option<u16>) -> i32 {
    v.map_or(ABSENT, i32::from)
}

impl From<GeomBins> for [i32; 3] {
    fn from(b: GeomBins) -> Self {
        [opt(b.l), opt(b.theta), opt(b.phi)]
    }
}

/// Bins stored in a geometry triple.
pub fn bins_from_triple(g: [i32; 3]) -> GeomBins {
    let get = |v: i32| (v >= 0).then_some(v as u16);
    GeomBins {
        l: get(g[0]),
        theta: get(g[1]),
        phi: get(g[2]),
    }
}

/// Result of [`encode_molecule`].
#[derive(Debug, Clone)]
pub struct Encoded {
    pub sequence: EncodedSequence,
    pub events: Vec<TokenEvent>,
    /// The hydrogen-free molecule the tokens describe.
    pub molecule: Molecule,
    /// Atom coordinates that fell outside the lattice range.
    pub clamped: usize,
}

/// Anchor positions for an atom from the positions of earlier atoms.
pub fn anchor_positions(refs: &[Option<usize>; 3], placed: &[Vec3]) -> Vec<Vec3> {
    refs.iter().map_while(|r| r.map(|k| placed[k])).collect()
}

/// Encodes a molecule on `lattice`. Geometry is measured between voxel
/// centers, the same positions a generator sees when it places atoms.
pub fn encode_molecule(mol: &Molecule, lattice: &Lattice) -> Result<Encoded, EncodeError> {
    let (heavy, _) = prepare_for_tokens(mol);
    let events = tokenize(&heavy)?;
    let refs = atom_ancestors(&events)?;
    let mut seq = EncodedSequence::default();
    let mut placed = Vec::new();
    let mut clamped = 0;
    for e in &events {
        seq.tokens.push(e.id);
        let Some(src) = e.atom else {
            seq.coords.push([ABSENT; 3]);
            seq.geom.push([ABSENT; 3]);
            continue;
        };
        let (q, c) = lattice.quantize(heavy.atom(src).position);
        clamped += c as usize;
        let v0 = lattice.dequantize(q);
        let k = placed.len();
        let anchors = anchor_positions(&refs[k], &placed);
        let rec = relative_geometry(&anchors, v0).map_err(|source| EncodeError::Geometry { atom: src, source })?;
        seq.coords.push(q);
        seq.geom.push(rec.bins(&lattice.params).into());
        placed.push(v0);
    }
    Ok(Encoded {
        sequence: seq,
        events,
        molecule: heavy,
        clamped,
    })
}

/// Lattice centered on a point cloud, shared by the cloud and the molecule
/// it conditions.
pub fn cloud_lattice(cloud: &LabeledPointCloud, params: crate::geom::DiscretizationParams) -> Lattice {
    Lattice::centered_on(params, &cloud.positions())
}

/// Cloud points as (class id, lattice point), in cloud order.
pub fn encode_cloud(cloud: &LabeledPointCloud, lattice: &Lattice) -> Vec<(usize, LatticePoint)> {
    cloud
        .points
        .iter()
        .map(|p| (p.class.id(), lattice.quantize(p.position()).0))
        .collect()
}

/// Rebuilds the molecule of an encoded sequence with atoms at voxel centers.
pub fn decode_sequence(seq: &EncodedSequence, lattice: &Lattice) -> Result<Molecule, EncodeError> {
    seq.validate()?;
    let events = seq.events()?;
    let mut mol = crate::fsmiles::detokenize(&events)?;
    let coords: Vec<[i32; 3]> = seq
        .coords
        .iter()
        .zip(&events)
        .filter(|(_, e)| e.kind == TokenKind::Atom)
        .map(|(c, _)| *c)
        .collect();
    for (k, q) in coords.into_iter().enumerate() {
        mol.atom_mut(k).position = lattice.dequantize(q);
    }
    Ok(mol)
}
