//! Molecular graph model, SMILES and SDF I/O, ring perception and
//! pharmacophore typing.

mod pharmacophore;
mod rings;
pub mod sdf;
pub mod smiles;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pharmacophore::{classify_pharmacophore, PharmacophoreClass};
pub use rings::{ring_bonds, smallest_ring_sizes};
pub use sdf::{read_sdf, write_sdf, SdfError};
pub use smiles::{parse_smiles, write_smiles, SmilesError};

/// Elements admitted by the token vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    C,
    N,
    O,
    F,
    S,
    Cl,
    Br,
}

impl Element {
    pub const ALL: [Element; 8] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::S,
        Element::Cl,
        Element::Br,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.into_iter().find(|e| e.symbol() == symbol)
    }

    /// Atomic number, which is also the electron count of the neutral atom.
    pub fn atomic_number(self) -> u32 {
        match self {
            Element::H => 1,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
        }
    }

    /// Standard atomic weight in g/mol.
    pub fn mass(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
        }
    }

    /// Allowed valences of the neutral atom, ascending.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::H | Element::F | Element::Cl | Element::Br => &[1],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
        }
    }

    /// Whether the element may be written in lowercase aromatic form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self, Element::C | Element::N | Element::O | Element::S)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    /// Cartesian position in Å. All zeros for graphs parsed from SMILES.
    pub position: [f64; 3],
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogens stated explicitly (bracket atoms), not counting H atoms
    /// present as graph nodes.
    pub explicit_h: u8,
    /// When set, no implicit hydrogens are added by valence fill.
    pub no_implicit_h: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            position: [0.0; 3],
            aromatic: false,
            formal_charge: 0,
            explicit_h: 0,
            no_implicit_h: false,
        }
    }

    pub fn at(mut self, position: [f64; 3]) -> Self {
        self.position = position;
        self
    }

    pub fn aromatic(mut self, aromatic: bool) -> Self {
        self.aromatic = aromatic;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as 1 here and
    /// the aromatic atom receives one extra unit in [`Molecule::used_valence`].
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Bond order code of the V2000 bond block.
    pub fn sdf_code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond endpoint {0} out of range")]
    AtomOutOfRange(usize),
    #[error("self bond on atom {0}")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

/// A molecular graph with optional 3D coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Molecule {
    pub name: String,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_name(name: impl Into<String>) -> Self {
        Molecule {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, GraphError> {
        let n = self.atoms.len();
        if a >= n {
            return Err(GraphError::AtomOutOfRange(a));
        }
        if b >= n {
            return Err(GraphError::AtomOutOfRange(b));
        }
        if a == b {
            return Err(GraphError::SelfBond(a));
        }
        if self.bond_between(a, b).is_some() {
            return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
        }
        let id = self.bonds.len();
        self.bonds.push(Bond { a, b, order });
        self.adjacency[a].push((b, id));
        self.adjacency[b].push((a, id));
        Ok(id)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, id: usize) -> &Bond {
        &self.bonds[id]
    }

    pub(crate) fn set_bond_order(&mut self, id: usize, order: BondOrder) {
        self.bonds[id].order = order;
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond id)` pairs in insertion order.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn heavy_degree(&self, i: usize) -> usize {
        self.adjacency[i]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element != Element::H)
            .count()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, id)| *id)
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn set_positions(&mut self, positions: &[[f64; 3]]) {
        assert_eq!(positions.len(), self.atoms.len());
        for (atom, p) in self.atoms.iter_mut().zip(positions) {
            atom.position = *p;
        }
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    /// Total electrons of the neutral atoms (formal charges ignored).
    pub fn electron_count(&self) -> u32 {
        self.atoms.iter().map(|a| a.element.atomic_number()).sum()
    }

    /// Valence consumed by bonds and explicit hydrogens. An aromatic atom
    /// with aromatic bonds counts one extra unit for its pi bond.
    pub fn used_valence(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        let mut used: u8 = atom.explicit_h;
        let mut has_aromatic = false;
        for &(_, id) in &self.adjacency[i] {
            let order = self.bonds[id].order;
            has_aromatic |= order == BondOrder::Aromatic;
            used = used.saturating_add(order.valence());
        }
        if atom.aromatic && has_aromatic {
            used = used.saturating_add(1);
        }
        used
    }

    /// Valence-fill hydrogens: the smallest allowed valence (charge adjusted)
    /// that accommodates the used valence, minus the used valence. Aromatic
    /// atoms only consider their lowest valence.
    pub fn implicit_h(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        if atom.no_implicit_h {
            return 0;
        }
        let used = self.used_valence(i) as i32;
        let q = atom.formal_charge as i32;
        let allowed = atom.element.valences();
        let allowed = if atom.aromatic { &allowed[..1] } else { allowed };
        for &v in allowed {
            let target = match atom.element {
                Element::C => v as i32 - q.abs(),
                _ => v as i32 + q,
            };
            if target >= used {
                return (target - used) as u8;
            }
        }
        0
    }

    /// Hydrogens on atom `i`: explicit, implicit and H-atom neighbors.
    pub fn total_h(&self, i: usize) -> u8 {
        let h_neighbors = self.adjacency[i]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element == Element::H)
            .count() as u8;
        self.atoms[i].explicit_h + self.implicit_h(i) + h_neighbors
    }

    pub fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.atoms.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.atoms.len()
    }

    /// Removes hydrogen atoms, folding them into the hydrogen counts of their
    /// heavy neighbors. Returns the new molecule and the old-to-new index map.
    pub fn strip_hydrogens(&self) -> (Molecule, Vec<Option<usize>>) {
        let mut out = Molecule::with_name(self.name.clone());
        let mut map = vec![None; self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.element != Element::H {
                map[i] = Some(out.add_atom(atom.clone()));
            }
        }
        for bond in &self.bonds {
            if let (Some(a), Some(b)) = (map[bond.a], map[bond.b]) {
                out.add_bond(a, b, bond.order)
                    .expect("bonds of a valid molecule stay valid");
            }
        }
        for (old, new) in map.iter().enumerate() {
            let Some(new) = *new else { continue };
            let want = self.total_h(old);
            let atom = out.atom_mut(new);
            if !atom.no_implicit_h && atom.explicit_h == 0 {
                if out.implicit_h(new) == want {
                    continue;
                }
            }
            let atom = out.atom_mut(new);
            atom.no_implicit_h = true;
            atom.explicit_h = want;
        }
        (out, map)
    }

    /// Clears bracket-style hydrogen counts wherever valence fill yields the
    /// same count, so such atoms can be written without brackets.
    pub fn normalize_hydrogens(&mut self) {
        for i in 0..self.atoms.len() {
            let atom = &self.atoms[i];
            if !atom.no_implicit_h || atom.element == Element::H {
                continue;
            }
            let want = atom.explicit_h;
            let saved = (atom.no_implicit_h, atom.explicit_h);
            self.atoms[i].no_implicit_h = false;
            self.atoms[i].explicit_h = 0;
            if self.implicit_h(i) != want {
                (self.atoms[i].no_implicit_h, self.atoms[i].explicit_h) = saved;
            }
        }
    }

    pub fn from_parts(name: String, atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let mut mol = Molecule::with_name(name);
        for atom in atoms {
            mol.add_atom(atom);
        }
        for bond in bonds {
            mol.add_bond(bond.a, bond.b, bond.order)?;
        }
        Ok(mol)
    }
}
