//! SMILES subset: organic-subset and bracket atoms, aromatic lowercase,
//! branches, ring closures (`1`-`9`, `%nn`), bond symbols `- = # :` and the
//! stereo markers `/ \ @ @@` (accepted, not stored), plus the `[*]` wildcard
//! used for fragment attachment points.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{ring_bonds, Atom, BondOrder, Element, GraphError, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMILES error at offset {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("non-ASCII character")]
    NonAscii,
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("unexpected character {0:?}")]
    Unexpected(char),
    #[error("unbalanced parenthesis")]
    UnbalancedParen,
    #[error("unterminated bracket atom")]
    UnclosedBracket,
    #[error("ring closure {0} never closed")]
    UnmatchedRing(u32),
    #[error("conflicting bond symbols on ring closure {0}")]
    RingBondConflict(u32),
    #[error("bond symbol without a following atom")]
    DanglingBond,
    #[error("unsupported feature: {0}")]
    Unsupported(&'static str),
    #[error("wildcard atom must have exactly one neighbor")]
    StarValence,
    #[error("wildcard atom not allowed here")]
    StarNotAllowed,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn err(offset: usize, kind: SmilesErrorKind) -> SmilesError {
    SmilesError { offset, kind }
}

/// An attachment point `[*]` left in a parsed fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StarSlot {
    /// Atom the wildcard was bonded to.
    pub atom: usize,
    pub order: BondOrder,
    /// Byte offset of the wildcard in the input.
    pub offset: usize,
}

/// A parsed SMILES string whose wildcard atoms were removed and recorded as
/// attachment slots, in order of appearance.
#[derive(Debug, Clone)]
pub struct ParsedFragment {
    pub molecule: Molecule,
    pub stars: Vec<StarSlot>,
}

enum Node {
    Atom(Atom),
    Star,
}

struct Edge {
    u: usize,
    v: usize,
    order: BondOrder,
    implicit: bool,
}

struct OpenRing {
    node: usize,
    bond: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    nodes: Vec<(Node, usize)>,
    edges: Vec<Edge>,
    prev: Option<usize>,
    branches: Vec<(usize, usize)>,
    bond: Option<(BondOrder, usize)>,
    rings: BTreeMap<u32, OpenRing>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<u8> {
        self.text.get(self.pos + k).copied()
    }

    fn is_aromatic(&self, node: usize) -> bool {
        matches!(&self.nodes[node].0, Node::Atom(a) if a.aromatic)
    }

    fn connect(&mut self, u: usize, v: usize, explicit: Option<BondOrder>, offset: usize) -> Result<(), SmilesError> {
        if u == v {
            return Err(err(offset, GraphError::SelfBond(u).into()));
        }
        if self.edges.iter().any(|e| (e.u == u && e.v == v) || (e.u == v && e.v == u)) {
            return Err(err(offset, GraphError::DuplicateBond(u.min(v), u.max(v)).into()));
        }
        let (order, implicit) = match explicit {
            Some(order) => (order, false),
            None if self.is_aromatic(u) && self.is_aromatic(v) => (BondOrder::Aromatic, true),
            None => (BondOrder::Single, false),
        };
        self.edges.push(Edge { u, v, order, implicit });
        Ok(())
    }

    fn add_node(&mut self, node: Node, offset: usize) -> Result<(), SmilesError> {
        let id = self.nodes.len();
        self.nodes.push((node, offset));
        if let Some(prev) = self.prev {
            let bond = self.bond.take().map(|(b, _)| b);
            self.connect(prev, id, bond, offset)?;
        } else if let Some((_, at)) = self.bond {
            return Err(err(at, SmilesErrorKind::DanglingBond));
        }
        self.prev = Some(id);
        Ok(())
    }

    fn organic(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let c = self.text[self.pos];
        let (element, aromatic, len) = match c {
            b'C' if self.peek_at(1) == Some(b'l') => (Element::Cl, false, 2),
            b'B' if self.peek_at(1) == Some(b'r') => (Element::Br, false, 2),
            b'C' => (Element::C, false, 1),
            b'N' => (Element::N, false, 1),
            b'O' => (Element::O, false, 1),
            b'S' => (Element::S, false, 1),
            b'F' => (Element::F, false, 1),
            b'c' => (Element::C, true, 1),
            b'n' => (Element::N, true, 1),
            b'o' => (Element::O, true, 1),
            b's' => (Element::S, true, 1),
            b'*' => {
                self.pos += 1;
                return self.add_node(Node::Star, start);
            }
            _ => {
                let end = (start + 2).min(self.text.len());
                let sym = String::from_utf8_lossy(&self.text[start..end]).into_owned();
                return Err(err(start, SmilesErrorKind::UnknownSymbol(sym)));
            }
        };
        self.pos += len;
        self.add_node(Node::Atom(Atom::new(element).aromatic(aromatic)), start)
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            None
        } else {
            std::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
        }
    }

    fn bracket(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        self.pos += 1;
        if matches!(self.peek(), Some(b'0'..=b'9')) {
            return Err(err(self.pos, SmilesErrorKind::Unsupported("isotope labels")));
        }
        if self.peek() == Some(b'*') {
            self.pos += 1;
            if self.peek() != Some(b']') {
                return Err(err(self.pos, SmilesErrorKind::Unsupported("decorated wildcard")));
            }
            self.pos += 1;
            return self.add_node(Node::Star, start);
        }
        let sym_start = self.pos;
        let (element, aromatic) = match (self.peek(), self.peek_at(1)) {
            (Some(b'C'), Some(b'l')) => {
                self.pos += 2;
                (Element::Cl, false)
            }
            (Some(b'B'), Some(b'r')) => {
                self.pos += 2;
                (Element::Br, false)
            }
            (Some(c), next) => {
                let element = match c.to_ascii_uppercase() {
                    b'C' => Element::C,
                    b'N' => Element::N,
                    b'O' => Element::O,
                    b'S' => Element::S,
                    b'F' if c == b'F' => Element::F,
                    b'H' if c == b'H' => Element::H,
                    _ => {
                        let mut sym = (c as char).to_string();
                        if let Some(n) = next.filter(|n| n.is_ascii_lowercase()) {
                            sym.push(n as char);
                        }
                        return Err(err(sym_start, SmilesErrorKind::UnknownSymbol(sym)));
                    }
                };
                // two-letter symbols outside the element set, e.g. [Na], [Si]
                if c.is_ascii_uppercase() && next.is_some_and(|n| n.is_ascii_lowercase() && n != b'l' && n != b'r') {
                    let sym = format!("{}{}", c as char, next.unwrap() as char);
                    if !matches!(sym.as_str(), "Cl" | "Br") {
                        return Err(err(sym_start, SmilesErrorKind::UnknownSymbol(sym)));
                    }
                }
                self.pos += 1;
                (element, c.is_ascii_lowercase())
            }
            (None, _) => return Err(err(start, SmilesErrorKind::UnclosedBracket)),
        };
        let mut atom = Atom::new(element).aromatic(aromatic);
        atom.no_implicit_h = true;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            }
        }
        if self.peek() == Some(b'H') {
            self.pos += 1;
            atom.explicit_h = self.number().unwrap_or(1) as u8;
        }
        match self.peek() {
            Some(sign @ (b'+' | b'-')) => {
                self.pos += 1;
                let unit: i8 = if sign == b'+' { 1 } else { -1 };
                let mut charge = unit;
                if let Some(n) = self.number() {
                    charge = unit * n as i8;
                } else {
                    while self.peek() == Some(sign) {
                        self.pos += 1;
                        charge += unit;
                    }
                }
                atom.formal_charge = charge;
            }
            _ => {}
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => return Err(err(self.pos, SmilesErrorKind::Unsupported("atom classes"))),
            Some(c) => return Err(err(self.pos, SmilesErrorKind::Unexpected(c as char))),
            None => return Err(err(start, SmilesErrorKind::UnclosedBracket)),
        }
        self.add_node(Node::Atom(atom), start)
    }

    fn ring_closure(&mut self, digit: u32, offset: usize) -> Result<(), SmilesError> {
        let Some(prev) = self.prev else {
            return Err(err(offset, SmilesErrorKind::Unexpected(self.text[offset] as char)));
        };
        let bond = self.bond.take().map(|(b, _)| b);
        match self.rings.remove(&digit) {
            Some(open) => {
                let order = match (open.bond, bond) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(err(offset, SmilesErrorKind::RingBondConflict(digit)))
                    }
                    (a, b) => a.or(b),
                };
                self.connect(open.node, prev, order, offset)
            }
            None => {
                self.rings.insert(digit, OpenRing { node: prev, bond, offset });
                Ok(())
            }
        }
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let offset = self.pos;
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(err(offset, SmilesErrorKind::Unexpected('(')));
                    };
                    if self.bond.is_some() {
                        return Err(err(offset, SmilesErrorKind::DanglingBond));
                    }
                    self.branches.push((prev, offset));
                    self.pos += 1;
                }
                b')' => {
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(err(offset, SmilesErrorKind::UnbalancedParen));
                    };
                    if let Some((_, at)) = self.bond {
                        return Err(err(at, SmilesErrorKind::DanglingBond));
                    }
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.bond.is_some() || self.prev.is_none() {
                        return Err(err(offset, SmilesErrorKind::Unexpected(c as char)));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.bond = Some((order, offset));
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, at)) = self.bond {
                        return Err(err(at, SmilesErrorKind::DanglingBond));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_closure((c - b'0') as u32, offset)?;
                }
                b'%' => {
                    let digits = self.text.get(self.pos + 1..self.pos + 3);
                    let Some(n) = digits
                        .filter(|d| d.iter().all(u8::is_ascii_digit))
                        .map(|d| ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                    else {
                        return Err(err(offset, SmilesErrorKind::Unexpected('%')));
                    };
                    self.pos += 3;
                    self.ring_closure(n, offset)?;
                }
                b'[' => self.bracket()?,
                _ if c.is_ascii_alphabetic() || c == b'*' => self.organic()?,
                _ => return Err(err(offset, SmilesErrorKind::Unexpected(c as char))),
            }
        }
        if let Some((_, at)) = self.bond {
            return Err(err(at, SmilesErrorKind::DanglingBond));
        }
        if let Some(&(_, at)) = self.branches.last() {
            return Err(err(at, SmilesErrorKind::UnbalancedParen));
        }
        if let Some((digit, open)) = self.rings.iter().next() {
            return Err(err(open.offset, SmilesErrorKind::UnmatchedRing(*digit)));
        }
        Ok(())
    }

    fn finish(self) -> Result<ParsedFragment, SmilesError> {
        let mut molecule = Molecule::new();
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (i, (node, _)) in self.nodes.iter().enumerate() {
            if let Node::Atom(atom) = node {
                index[i] = molecule.add_atom(atom.clone());
            }
        }
        let mut implicit_aromatic = Vec::new();
        let mut star_links: Vec<(usize, usize, BondOrder)> = Vec::new();
        for e in &self.edges {
            match (index[e.u], index[e.v]) {
                (usize::MAX, usize::MAX) => {
                    return Err(err(self.nodes[e.v].1, SmilesErrorKind::StarValence));
                }
                (usize::MAX, a) => star_links.push((e.u, a, e.order)),
                (a, usize::MAX) => star_links.push((e.v, a, e.order)),
                (a, b) => {
                    let id = molecule.add_bond(a, b, e.order).map_err(|g| err(0, g.into()))?;
                    if e.implicit {
                        implicit_aromatic.push(id);
                    }
                }
            }
        }
        // implicit bonds between aromatic atoms in different rings are single
        if !implicit_aromatic.is_empty() {
            let in_ring = ring_bonds(&molecule);
            for id in implicit_aromatic {
                if !in_ring[id] {
                    molecule.set_bond_order(id, BondOrder::Single);
                }
            }
        }
        let mut stars = Vec::new();
        for (i, (node, offset)) in self.nodes.iter().enumerate() {
            if let Node::Star = node {
                let links: Vec<_> = star_links.iter().filter(|l| l.0 == i).collect();
                if links.len() != 1 {
                    return Err(err(*offset, SmilesErrorKind::StarValence));
                }
                stars.push(StarSlot {
                    atom: links[0].1,
                    order: links[0].2,
                    offset: *offset,
                });
            }
        }
        Ok(ParsedFragment { molecule, stars })
    }
}

/// Parses SMILES that may contain `[*]` attachment points.
pub fn parse_fragment(text: &str) -> Result<ParsedFragment, SmilesError> {
    if text.is_empty() {
        return Err(err(0, SmilesErrorKind::Empty));
    }
    if let Some(i) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(err(i, SmilesErrorKind::NonAscii));
    }
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
        edges: Vec::new(),
        prev: None,
        branches: Vec::new(),
        bond: None,
        rings: BTreeMap::new(),
    };
    parser.run()?;
    parser.finish()
}

/// Parses a SMILES string into a molecular graph with zero coordinates.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let parsed = parse_fragment(text)?;
    if let Some(star) = parsed.stars.first() {
        return Err(err(star.offset, SmilesErrorKind::StarNotAllowed));
    }
    Ok(parsed.molecule)
}

/// One element of an emitted SMILES string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Piece {
    Atom(usize),
    Bond(BondOrder),
    Ring(u32),
    Open,
    Close,
    /// Attachment point for cut bond `cut`; `branch` renders as `([*])`.
    Star { cut: usize, branch: bool },
    Dot,
}

/// Symbol needed for a bond, or `None` when the implicit bond matches.
pub(crate) fn bond_symbol(mol: &Molecule, id: usize) -> Option<BondOrder> {
    let b = mol.bond(id);
    let both_aromatic = mol.atom(b.a).aromatic && mol.atom(b.b).aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => Some(BondOrder::Single),
        BondOrder::Single => None,
        BondOrder::Aromatic if both_aromatic => None,
        order => Some(order),
    }
}

pub(crate) fn bond_text(order: BondOrder) -> &'static str {
    match order {
        BondOrder::Single => "-",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => ":",
    }
}

/// Whether an atom can be written without brackets.
pub(crate) fn is_organic(mol: &Molecule, i: usize) -> bool {
    let a = mol.atom(i);
    a.element != Element::H && !a.no_implicit_h && a.formal_charge == 0 && a.explicit_h == 0
}

/// Hydrogen count to write inside brackets (H-atom neighbors excluded).
pub(crate) fn bracket_h(mol: &Molecule, i: usize) -> u8 {
    mol.atom(i).explicit_h + mol.implicit_h(i)
}

pub(crate) fn atom_text(mol: &Molecule, i: usize) -> String {
    let a = mol.atom(i);
    let mut sym = a.element.symbol().to_string();
    if a.aromatic {
        sym = sym.to_ascii_lowercase();
    }
    if is_organic(mol, i) {
        return sym;
    }
    let mut out = format!("[{sym}");
    match bracket_h(mol, i) {
        0 => {}
        1 => out.push('H'),
        n => {
            let _ = write!(out, "H{n}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        q if q > 0 => {
            let _ = write!(out, "+{q}");
        }
        q => {
            let _ = write!(out, "-{}", -q);
        }
    }
    out.push(']');
    out
}

/// Which part of a molecule to emit and how.
pub(crate) struct EmitPlan<'a> {
    pub member: &'a [bool],
    pub excluded_bond: &'a [bool],
    pub root: usize,
    /// Cut bond rendered as a leading `[*]` bonded to the root.
    pub leading_star: Option<usize>,
    /// Cut bonds hanging off each atom, rendered as stars after the atom.
    pub stubs: &'a [Vec<usize>],
}

struct Tree {
    children: Vec<Vec<(usize, usize)>>,
    ring_open: Vec<Vec<usize>>,
    ring_close: Vec<Vec<usize>>,
}

fn dfs(mol: &Molecule, plan: &EmitPlan, u: usize, parent_bond: Option<usize>, seen: &mut [bool], tree: &mut Tree, closure_seen: &mut [bool]) {
    seen[u] = true;
    let mut nbrs: Vec<(usize, usize)> = mol
        .neighbors(u)
        .iter()
        .copied()
        .filter(|&(v, id)| plan.member[v] && !plan.excluded_bond[id] && Some(id) != parent_bond)
        .collect();
    nbrs.sort_unstable();
    for (v, id) in nbrs {
        if seen[v] {
            if !closure_seen[id] {
                closure_seen[id] = true;
                tree.ring_open[v].push(id);
                tree.ring_close[u].push(id);
            }
        } else {
            tree.children[u].push((v, id));
            dfs(mol, plan, v, Some(id), seen, tree, closure_seen);
        }
    }
}

struct Emitter<'a> {
    mol: &'a Molecule,
    plan: &'a EmitPlan<'a>,
    tree: Tree,
    digits: BTreeMap<usize, u32>,
    in_use: Vec<bool>,
    out: Vec<Piece>,
}

impl Emitter<'_> {
    fn take_digit(&mut self) -> u32 {
        let d = (1..self.in_use.len()).find(|&d| !self.in_use[d]).unwrap_or_else(|| {
            self.in_use.push(false);
            self.in_use.len() - 1
        });
        self.in_use[d] = true;
        d as u32
    }

    fn atom(&mut self, u: usize) {
        self.out.push(Piece::Atom(u));
        let closes = std::mem::take(&mut self.tree.ring_close[u]);
        let mut freed = Vec::new();
        for id in closes {
            let d = self.digits.remove(&id).expect("ring opened before closing");
            self.out.push(Piece::Ring(d));
            freed.push(d);
        }
        let opens = std::mem::take(&mut self.tree.ring_open[u]);
        for id in opens {
            if let Some(order) = bond_symbol(self.mol, id) {
                self.out.push(Piece::Bond(order));
            }
            let d = self.take_digit();
            self.digits.insert(id, d);
            self.out.push(Piece::Ring(d));
        }
        for d in freed {
            self.in_use[d as usize] = false;
        }
        let children = std::mem::take(&mut self.tree.children[u]);
        let stubs = &self.plan.stubs[u];
        for (k, &cut) in stubs.iter().enumerate() {
            let last = k + 1 == stubs.len() && children.is_empty();
            self.out.push(Piece::Star { cut, branch: !last });
        }
        let n = children.len();
        for (k, (v, id)) in children.into_iter().enumerate() {
            let branch = k + 1 < n;
            if branch {
                self.out.push(Piece::Open);
            }
            if let Some(order) = bond_symbol(self.mol, id) {
                self.out.push(Piece::Bond(order));
            }
            self.atom(v);
            if branch {
                self.out.push(Piece::Close);
            }
        }
    }
}

/// Emits one connected component as a depth-first SMILES piece sequence.
/// Ring-closure digits open at the first visited endpoint of each ring bond.
pub(crate) fn emit(mol: &Molecule, plan: &EmitPlan) -> Vec<Piece> {
    let n = mol.len();
    let mut tree = Tree {
        children: vec![Vec::new(); n],
        ring_open: vec![Vec::new(); n],
        ring_close: vec![Vec::new(); n],
    };
    let mut seen = vec![false; n];
    let mut closure_seen = vec![false; mol.bonds().len()];
    dfs(mol, plan, plan.root, None, &mut seen, &mut tree, &mut closure_seen);
    let mut emitter = Emitter {
        mol,
        plan,
        tree,
        digits: BTreeMap::new(),
        in_use: vec![true],
        out: Vec::new(),
    };
    if let Some(cut) = plan.leading_star {
        emitter.out.push(Piece::Star { cut, branch: false });
    }
    emitter.atom(plan.root);
    emitter.out
}

pub(crate) fn pieces_to_string(mol: &Molecule, pieces: &[Piece]) -> String {
    let mut s = String::new();
    for piece in pieces {
        match *piece {
            Piece::Atom(i) => s.push_str(&atom_text(mol, i)),
            Piece::Bond(order) => s.push_str(bond_text(order)),
            Piece::Ring(d) if d < 10 => {
                let _ = write!(s, "{d}");
            }
            Piece::Ring(d) => {
                let _ = write!(s, "%{d:02}");
            }
            Piece::Open => s.push('('),
            Piece::Close => s.push(')'),
            Piece::Star { branch: false, .. } => s.push_str("[*]"),
            Piece::Star { branch: true, .. } => s.push_str("([*])"),
            Piece::Dot => s.push('.'),
        }
    }
    s
}

/// Writes a SMILES string that parses back to an isomorphic graph.
/// Disconnected components are joined with `.`.
pub fn write_smiles(mol: &Molecule) -> String {
    let n = mol.len();
    let excluded = vec![false; mol.bonds().len()];
    let stubs = vec![Vec::new(); n];
    let mut done = vec![false; n];
    let mut pieces = Vec::new();
    for root in 0..n {
        if done[root] {
            continue;
        }
        // component membership
        let mut member = vec![false; n];
        let mut stack = vec![root];
        member[root] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in mol.neighbors(u) {
                if !member[v] {
                    member[v] = true;
                    stack.push(v);
                }
            }
        }
        for (d, m) in done.iter_mut().zip(&member) {
            *d |= *m;
        }
        if !pieces.is_empty() {
            pieces.push(Piece::Dot);
        }
        let plan = EmitPlan {
            member: &member,
            excluded_bond: &excluded,
            root,
            leading_star: None,
            stubs: &stubs,
        };
        pieces.extend(emit(mol, &plan));
    }
    pieces_to_string(mol, &pieces)
}
