use std::collections::VecDeque;

use super::Molecule;

/// Shortest path length from `from` to `to` that avoids bond `skip`.
fn distance_avoiding(mol: &Molecule, from: usize, to: usize, skip: usize) -> Option<usize> {
    let mut dist = vec![usize::MAX; mol.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            return Some(dist[u]);
        }
        for &(v, id) in mol.neighbors(u) {
            if id != skip && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    None
}

/// Size of the smallest cycle through each atom, 0 for acyclic atoms.
///
/// The smallest cycle through `v` uses some bond `(v, u)`; its length is one
/// more than the shortest `u -> v` path that avoids that bond.
pub fn smallest_ring_sizes(mol: &Molecule) -> Vec<usize> {
    (0..mol.len())
        .map(|v| {
            mol.neighbors(v)
                .iter()
                .filter_map(|&(u, id)| distance_avoiding(mol, u, v, id).map(|d| d + 1))
                .min()
                .unwrap_or(0)
        })
        .collect()
}

/// Per-bond flag: true when the bond lies on a cycle.
pub fn ring_bonds(mol: &Molecule) -> Vec<bool> {
    mol.bonds()
        .iter()
        .enumerate()
        .map(|(id, b)| distance_avoiding(mol, b.a, b.b, id).is_some())
        .collect()
}
