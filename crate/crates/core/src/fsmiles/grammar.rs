//! Incremental syntax check for FSMILES token streams, used to reject
//! tokens during sampling that could not be detokenized.

use std::collections::{BTreeMap, BTreeSet};

use super::vocab::{TokenId, TokenKind, Vocab, END, SEP, START};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Begin,
    AfterStart,
    AfterSep,
    AfterLead,
    /// After an atom or a ring digit: ring digits may follow.
    AfterAtom,
    /// After `)`: the atom is complete, no ring digits or stars.
    AfterBranch,
    /// After `([*])`: like `AfterBranch`, but further stars may follow.
    AfterStub,
    AfterBond,
    AfterOpen,
    AfterChainStar,
    Bracket(Inner),
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Inner {
    Open,
    Atom,
    H,
    HCount,
    Charge,
    ChargeCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    Start,
    End,
    Sep,
    Pad,
    Atom,
    BracketAtom,
    Bond,
    Minus,
    Plus,
    Digit(u8),
    Open,
    Close,
    BracketOpen,
    BracketClose,
    Star,
    BranchStar,
    H,
    Stereo,
}

fn sym(vocab: &Vocab, id: TokenId) -> Option<Sym> {
    let text = vocab.text(id)?;
    Some(match (id, text) {
        (START, _) => Sym::Start,
        (END, _) => Sym::End,
        (SEP, _) => Sym::Sep,
        (_, "pad") => Sym::Pad,
        (_, "[nH]") => Sym::BracketAtom,
        _ if vocab.kind(id) == TokenKind::Atom => Sym::Atom,
        (_, "-") => Sym::Minus,
        (_, "=") | (_, "#") => Sym::Bond,
        (_, "+") => Sym::Plus,
        (_, "(") => Sym::Open,
        (_, ")") => Sym::Close,
        (_, "[") => Sym::BracketOpen,
        (_, "]") => Sym::BracketClose,
        (_, "[*]") => Sym::Star,
        (_, "([*])") => Sym::BranchStar,
        (_, "H") => Sym::H,
        (_, d) if d.len() == 1 && d.as_bytes()[0].is_ascii_digit() => Sym::Digit(d.as_bytes()[0] - b'0'),
        _ => Sym::Stereo,
    })
}

/// Tracks enough of a partial sequence to decide which next tokens keep it
/// parseable: branch depth, open ring digits, bracket contents, bonds of
/// the current fragment and attachment stars awaiting a fragment.
#[derive(Debug, Clone)]
pub struct GrammarState {
    state: State,
    depth: usize,
    branch_atoms: Vec<Option<usize>>,
    current: Option<usize>,
    next_atom: usize,
    rings: BTreeMap<u8, usize>,
    bonds: BTreeSet<(usize, usize)>,
    open_stars: usize,
    fragment_atoms: usize,
}

impl Default for GrammarState {
    fn default() -> Self {
        Self::new()
    }
}

impl GrammarState {
    pub fn new() -> Self {
        GrammarState {
            state: State::Begin,
            depth: 0,
            branch_atoms: Vec::new(),
            current: None,
            next_atom: 0,
            rings: BTreeMap::new(),
            bonds: BTreeSet::new(),
            open_stars: 0,
            fragment_atoms: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    fn fragment_closable(&self) -> bool {
        self.depth == 0 && self.rings.is_empty() && self.fragment_atoms > 0
    }

    fn ring_digit_ok(&self, d: u8) -> bool {
        let Some(a) = self.current else {
            return false;
        };
        match self.rings.get(&d) {
            None => true,
            Some(&b) => b != a && !self.bonds.contains(&(a.min(b), a.max(b))),
        }
    }

    /// Whether `id` may come next.
    pub fn allows(&self, id: TokenId) -> bool {
        let Some(s) = sym(Vocab::get(), id) else {
            return false;
        };
        use State::*;
        let atom_start = matches!(s, Sym::Atom | Sym::BracketAtom | Sym::BracketOpen);
        match self.state {
            Begin => s == Sym::Start,
            Done => false,
            AfterStart | AfterOpen => atom_start || (self.state == AfterOpen && matches!(s, Sym::Bond | Sym::Minus)),
            AfterSep => s == Sym::Star,
            AfterLead => atom_start || matches!(s, Sym::Bond | Sym::Minus),
            AfterBond => atom_start || matches!(s, Sym::Digit(d) if !self.rings.contains_key(&d) && self.current.is_some()),
            AfterChainStar => match s {
                Sym::Close => self.depth > 0,
                Sym::Sep => self.fragment_closable() && self.open_stars > 0,
                Sym::End => self.fragment_closable() && self.open_stars == 0,
                _ => false,
            },
            AfterAtom | AfterBranch | AfterStub => match s {
                Sym::Atom | Sym::BracketAtom | Sym::BracketOpen | Sym::Bond | Sym::Minus | Sym::Open => true,
                Sym::Close => self.depth > 0,
                Sym::Digit(d) => self.state == AfterAtom && self.ring_digit_ok(d),
                Sym::Star | Sym::BranchStar => self.state != AfterBranch,
                Sym::Sep => self.fragment_closable() && self.open_stars > 0,
                Sym::End => self.fragment_closable() && self.open_stars == 0,
                _ => false,
            },
            Bracket(inner) => match (inner, s) {
                (Inner::Open, Sym::Atom) => true,
                (Inner::Atom, Sym::H | Sym::Plus | Sym::Minus | Sym::BracketClose) => true,
                (Inner::H, Sym::Digit(_) | Sym::Plus | Sym::Minus | Sym::BracketClose) => true,
                (Inner::HCount, Sym::Plus | Sym::Minus | Sym::BracketClose) => true,
                (Inner::Charge, Sym::Digit(_) | Sym::BracketClose) => true,
                (Inner::ChargeCount, Sym::BracketClose) => true,
                _ => false,
            },
        }
    }

    fn add_atom(&mut self) {
        let a = self.next_atom;
        self.next_atom += 1;
        if let Some(prev) = self.current {
            self.bonds.insert((prev, a));
        }
        self.current = Some(a);
        self.fragment_atoms += 1;
    }

    /// Consumes `id`; returns false, leaving the state untouched, if it is
    /// not allowed.
    pub fn advance(&mut self, id: TokenId) -> bool {
        if !self.allows(id) {
            return false;
        }
        let s = sym(Vocab::get(), id).expect("allowed ids are tokens");
        use State::*;
        self.state = match (self.state, s) {
            (Begin, _) => AfterStart,
            (Bracket(Inner::Open), _) => {
                self.add_atom();
                Bracket(Inner::Atom)
            }
            (Bracket(_), Sym::H) => Bracket(Inner::H),
            (Bracket(Inner::H), Sym::Digit(_)) => Bracket(Inner::HCount),
            (Bracket(_), Sym::Plus | Sym::Minus) => Bracket(Inner::Charge),
            (Bracket(_), Sym::Digit(_)) => Bracket(Inner::ChargeCount),
            (Bracket(_), Sym::BracketClose) => AfterAtom,
            (_, Sym::BracketOpen) => Bracket(Inner::Open),
            (_, Sym::Atom | Sym::BracketAtom) => {
                self.add_atom();
                AfterAtom
            }
            (_, Sym::Bond | Sym::Minus) => AfterBond,
            (_, Sym::Digit(d)) => {
                let a = self.current.expect("ring digits follow an atom");
                match self.rings.remove(&d) {
                    Some(b) => {
                        self.bonds.insert((a.min(b), a.max(b)));
                    }
                    None => {
                        self.rings.insert(d, a);
                    }
                }
                AfterAtom
            }
            (_, Sym::Open) => {
                self.depth += 1;
                self.branch_atoms.push(self.current);
                AfterOpen
            }
            (_, Sym::Close) => {
                self.depth -= 1;
                self.current = self.branch_atoms.pop().expect("depth tracked");
                AfterBranch
            }
            (AfterSep, Sym::Star) => AfterLead,
            (_, Sym::Star) => {
                self.open_stars += 1;
                AfterChainStar
            }
            (_, Sym::BranchStar) => {
                self.open_stars += 1;
                AfterStub
            }
            (_, Sym::Sep) => {
                self.open_stars -= 1;
                self.current = None;
                self.fragment_atoms = 0;
                AfterSep
            }
            (_, Sym::End) => Done,
            _ => unreachable!("rejected by allows"),
        };
        true
    }

    /// Ids allowed next, over the whole vocabulary.
    pub fn allowed_ids(&self) -> Vec<TokenId> {
        (0..Vocab::get().len() as TokenId).filter(|&id| self.allows(id)).collect()
    }
}
