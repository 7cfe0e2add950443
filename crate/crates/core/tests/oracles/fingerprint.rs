//! Environment enumeration: every atom's radius-r neighborhood written out as
//! a canonical string tree, no hashing involved.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// Atom labels and (bond order, neighbor) lists.
pub struct Graph {
    pub labels: Vec<String>,
    pub adj: Vec<Vec<(u8, usize)>>,
}

fn env(g: &Graph, a: usize, r: u32) -> String {
    if r == 0 {
        return format!("<{}>", g.labels[a]);
    }
    let mut parts: Vec<String> = g.adj[a].iter().map(|&(o, n)| format!("{o}:{}", env(g, n, r - 1))).collect();
    parts.sort();
    format!("({}|{})", env(g, a, r - 1), parts.join(","))
}

/// Distinct environments of all atoms at radii 0..=radius.
pub fn environments(g: &Graph, radius: u32) -> BTreeSet<String> {
    (0..=radius).flat_map(|r| (0..g.labels.len()).map(move |a| env(g, a, r))).collect()
}

pub fn tanimoto(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// A six-membered aromatic ring; `n_at` marks a ring nitrogen.
pub fn aromatic_six_ring(n_at: Option<usize>) -> Graph {
    let labels = (0..6)
        .map(|i| if Some(i) == n_at { "N,2,0,ar,0".to_string() } else { "C,2,0,ar,1".to_string() })
        .collect();
    let adj = (0..6).map(|i| vec![(4, (i + 1) % 6), (4, (i + 5) % 6)]).collect();
    Graph { labels, adj }
}
