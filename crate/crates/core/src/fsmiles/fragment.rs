use crate::chem::{ring_bonds, smallest_ring_sizes, BondOrder, Element, Molecule};

/// Split of a molecule into fragments along cut bonds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentDecomposition {
    /// Atom lists, each ascending, ordered by their smallest atom.
    pub fragments: Vec<Vec<usize>>,
    /// Fragment index of every atom.
    pub fragment_of: Vec<usize>,
    /// Cut bond ids, ascending.
    pub cuts: Vec<usize>,
}

pub(crate) const MIN_FRAGMENT_HEAVY_ATOMS: usize = 3;

fn components(mol: &Molecule, cut: &[bool]) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; mol.len()];
    let mut count = 0;
    for s in 0..mol.len() {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = count;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, id) in mol.neighbors(u) {
                if !cut[id] && label[v] == usize::MAX {
                    label[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn heavy_counts(mol: &Molecule, label: &[usize], count: usize) -> Vec<usize> {
    let mut n = vec![0; count];
    for (i, &c) in label.iter().enumerate() {
        if mol.atom(i).element != Element::H {
            n[c] += 1;
        }
    }
    n
}

/// Cuts every single, non-aromatic, acyclic bond touching a ring, visiting
/// candidates by ascending atom pair and keeping a cut only while every
/// fragment retains at least three heavy atoms.
pub fn fragment(mol: &Molecule) -> FragmentDecomposition {
    let in_ring = ring_bonds(mol);
    let ring_atom: Vec<bool> = smallest_ring_sizes(mol).iter().map(|&s| s > 0).collect();
    let mut candidates: Vec<(usize, usize, usize)> = mol
        .bonds()
        .iter()
        .enumerate()
        .filter(|(id, b)| {
            b.order == BondOrder::Single && !in_ring[*id] && (ring_atom[b.a] || ring_atom[b.b])
        })
        .map(|(id, b)| (b.a.min(b.b), b.a.max(b.b), id))
        .collect();
    candidates.sort_unstable();
    let mut cut = vec![false; mol.bonds().len()];
    for (_, _, id) in candidates {
        cut[id] = true;
        let (label, count) = components(mol, &cut);
        if heavy_counts(mol, &label, count).iter().any(|&n| n < MIN_FRAGMENT_HEAVY_ATOMS) {
            cut[id] = false;
        }
    }
    let (fragment_of, count) = components(mol, &cut);
    let mut fragments = vec![Vec::new(); count];
    for (i, &f) in fragment_of.iter().enumerate() {
        fragments[f].push(i);
    }
    FragmentDecomposition {
        fragments,
        fragment_of,
        cuts: (0..cut.len()).filter(|&id| cut[id]).collect(),
    }
}
