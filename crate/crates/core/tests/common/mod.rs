#![allow(dead_code)]

use edmol_core::chem::{BondOrder, Element, Molecule};
use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;

pub fn corpus() -> Vec<(String, String)> {
    include_str!("../../data/corpus.smi")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let smiles = it.next().unwrap().to_string();
            let name = it.next().unwrap_or("").to_string();
            (smiles, name)
        })
        .collect()
}

type Label = (Element, bool, i8, u8);

fn graph(m: &Molecule) -> UnGraph<Label, BondOrder> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = (0..m.len())
        .map(|i| {
            let a = m.atom(i);
            g.add_node((a.element, a.aromatic, a.formal_charge, m.total_h(i)))
        })
        .collect();
    for b in m.bonds() {
        g.add_edge(nodes[b.a], nodes[b.b], b.order);
    }
    g
}

/// Isomorphism on element, aromaticity, charge, hydrogen count and bond order.
pub fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    a.len() == b.len()
        && a.bonds().len() == b.bonds().len()
        && is_isomorphic_matching(&graph(a), &graph(b), |x, y| x == y, |x, y| x == y)
}

/// The same molecule with atom `order[k]` moved to index `k`.
pub fn permute(m: &Molecule, order: &[usize]) -> Molecule {
    let mut new_index = vec![0; order.len()];
    for (k, &old) in order.iter().enumerate() {
        new_index[old] = k;
    }
    let mut out = Molecule::with_name(m.name.clone());
    for &old in order {
        out.add_atom(m.atom(old).clone());
    }
    for b in m.bonds() {
        out.add_bond(new_index[b.a], new_index[b.b], b.order).unwrap();
    }
    out
}
