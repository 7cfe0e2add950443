use thiserror::Error;

use super::fragment::{fragment, FragmentDecomposition};
use super::vocab::{ring_suffix, TokenId, TokenKind, Vocab, END, SEP, START};
use crate::chem::smiles::{bracket_h, emit, is_organic, parse_fragment, EmitPlan, Piece};
use crate::chem::{smallest_ring_sizes, BondOrder, Element, Molecule, SmilesError};

/// One token of an FSMILES sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenEvent {
    pub id: TokenId,
    pub kind: TokenKind,
    /// Source atom for atom tokens.
    pub atom: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmilesError {
    #[error("atom {atom}: no vocabulary token for {what}")]
    Unsupported { atom: usize, what: String },
    #[error("molecule is empty or disconnected")]
    NotConnected,
    #[error("token {position}: {message}")]
    Sequence { position: usize, message: String },
    #[error("token {position}: fragment does not parse: {source}")]
    Fragment {
        position: usize,
        #[source]
        source: SmilesError,
    },
}

fn seq_err(position: usize, message: impl Into<String>) -> FsmilesError {
    FsmilesError::Sequence {
        position,
        message: message.into(),
    }
}

struct Writer<'a> {
    vocab: &'a Vocab,
    mol: &'a Molecule,
    suffix: &'a [u8],
    out: Vec<TokenEvent>,
}

impl Writer<'_> {
    fn push(&mut self, token: &str, atom: Option<usize>, culprit: usize) -> Result<(), FsmilesError> {
        let id = self.vocab.id(token).ok_or_else(|| FsmilesError::Unsupported {
            atom: culprit,
            what: format!("{token:?}"),
        })?;
        self.out.push(TokenEvent {
            id,
            kind: self.vocab.kind(id),
            atom,
        });
        Ok(())
    }

    fn count(&mut self, n: u8, atom: usize) -> Result<(), FsmilesError> {
        if n > 1 {
            self.push(&format!("{n}_0"), None, atom)?;
        }
        Ok(())
    }

    fn atom(&mut self, i: usize) -> Result<(), FsmilesError> {
        let a = self.mol.atom(i);
        let mut sym = a.element.symbol().to_string();
        if a.aromatic {
            sym = sym.to_ascii_lowercase();
        }
        let suffix = self.suffix[i];
        if is_organic(self.mol, i) {
            return self.push(&format!("{sym}_{suffix}"), Some(i), i);
        }
        let h = bracket_h(self.mol, i);
        if a.element == Element::N && a.aromatic && h == 1 && a.formal_charge == 0 {
            return self.push(&format!("[nH]_{suffix}"), Some(i), i);
        }
        self.push("[_0", None, i)?;
        self.push(&format!("{sym}_{suffix}"), Some(i), i)?;
        if h > 0 {
            self.push("H_0", None, i)?;
            self.count(h, i)?;
        }
        match a.formal_charge {
            0 => {}
            q => {
                self.push(if q > 0 { "+_0" } else { "-_0" }, None, i)?;
                self.count(q.unsigned_abs(), i)?;
            }
        }
        self.push("]_0", None, i)
    }

    fn pieces(&mut self, pieces: &[Piece], anchor: usize) -> Result<(), FsmilesError> {
        let mut last_atom = anchor;
        for piece in pieces {
            match *piece {
                Piece::Atom(i) => {
                    last_atom = i;
                    self.atom(i)?;
                }
                Piece::Bond(BondOrder::Single) => self.push("-_0", None, last_atom)?,
                Piece::Bond(BondOrder::Double) => self.push("=_0", None, last_atom)?,
                Piece::Bond(BondOrder::Triple) => self.push("#_0", None, last_atom)?,
                Piece::Bond(BondOrder::Aromatic) => {
                    return Err(FsmilesError::Unsupported {
                        atom: last_atom,
                        what: "an aromatic bond between non-aromatic atoms".into(),
                    })
                }
                Piece::Ring(d) => {
                    if d > 6 {
                        return Err(FsmilesError::Unsupported {
                            atom: last_atom,
                            what: format!("ring-closure digit {d}"),
                        });
                    }
                    self.push(&format!("{d}_0"), None, last_atom)?
                }
                Piece::Open => self.push("(_0", None, last_atom)?,
                Piece::Close => self.push(")_0", None, last_atom)?,
                Piece::Star { branch: false, .. } => self.push("[*]_0", None, last_atom)?,
                Piece::Star { branch: true, .. } => self.push("([*])_0", None, last_atom)?,
                Piece::Dot => unreachable!("fragments are connected"),
            }
        }
        Ok(())
    }
}

/// Hydrogen-free, normalized copy of a molecule ready for tokenization,
/// with the map from original to new atom indices.
pub fn prepare_for_tokens(mol: &Molecule) -> (Molecule, Vec<Option<usize>>) {
    let (mut heavy, map) = mol.strip_hydrogens();
    heavy.normalize_hydrogens();
    (heavy, map)
}

/// Tokenizes a heavy-atom molecule (see [`prepare_for_tokens`]) into
/// `start, fragment, sep, fragment, ..., end`. Fragments follow the cut tree
/// depth-first from the fragment holding atom 0; a fragment's attachment
/// stars are consumed last-first, and each child fragment opens with the
/// `[*]` standing for its parent bond.
pub fn tokenize(mol: &Molecule) -> Result<Vec<TokenEvent>, FsmilesError> {
    if mol.is_empty() || !mol.is_connected() {
        return Err(FsmilesError::NotConnected);
    }
    if let Some(i) = mol.atoms().iter().position(|a| a.element == Element::H) {
        return Err(FsmilesError::Unsupported {
            atom: i,
            what: "a hydrogen atom node".into(),
        });
    }
    let sizes = smallest_ring_sizes(mol);
    let mut suffix = Vec::with_capacity(mol.len());
    for (i, &s) in sizes.iter().enumerate() {
        suffix.push(ring_suffix(s).ok_or_else(|| FsmilesError::Unsupported {
            atom: i,
            what: format!("ring size {s}"),
        })?);
    }
    let decomposition = fragment(mol);
    let FragmentDecomposition {
        fragments,
        fragment_of,
        cuts,
    } = &decomposition;
    let mut excluded = vec![false; mol.bonds().len()];
    let mut stubs = vec![Vec::new(); mol.len()];
    for &id in cuts {
        excluded[id] = true;
    }
    let vocab = Vocab::get();
    let mut w = Writer {
        vocab,
        mol,
        suffix: &suffix,
        out: Vec::new(),
    };
    w.push("start_0", None, 0)?;
    // (fragment, root atom, parent cut bond)
    let mut pending: Vec<(usize, usize, Option<usize>)> = vec![(fragment_of[0], 0, None)];
    let mut first = true;
    while let Some((frag, root, parent)) = pending.pop() {
        if !first {
            w.push("sep_0", None, root)?;
        }
        first = false;
        let mut member = vec![false; mol.len()];
        for &a in &fragments[frag] {
            member[a] = true;
            stubs[a].clear();
            let mut here: Vec<(usize, usize)> = mol
                .neighbors(a)
                .iter()
                .filter(|&&(_, id)| excluded[id] && Some(id) != parent)
                .map(|&(v, id)| (v, id))
                .collect();
            here.sort_unstable();
            stubs[a] = here.into_iter().map(|(_, id)| id).collect();
        }
        let plan = EmitPlan {
            member: &member,
            excluded_bond: &excluded,
            root,
            leading_star: parent,
            stubs: &stubs,
        };
        let pieces = emit(mol, &plan);
        w.pieces(&pieces, root)?;
        for piece in &pieces {
            if let Piece::Star { cut, .. } = *piece {
                if Some(cut) == parent {
                    continue;
                }
                let b = mol.bond(cut);
                let child_root = if member[b.a] { b.b } else { b.a };
                pending.push((fragment_of[child_root], child_root, Some(cut)));
            }
        }
    }
    w.push("end_0", None, 0)?;
    Ok(w.out)
}

/// Token names of a sequence, space separated.
pub fn token_string(events: &[TokenEvent]) -> String {
    let vocab = Vocab::get();
    events
        .iter()
        .map(|e| vocab.token(e.id).unwrap_or("?"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Events for raw token ids, with atom indices numbered in order.
pub fn events_from_ids(ids: &[TokenId]) -> Result<Vec<TokenEvent>, FsmilesError> {
    let vocab = Vocab::get();
    let mut next_atom = 0;
    ids.iter()
        .enumerate()
        .map(|(pos, &id)| {
            vocab.token(id).ok_or_else(|| seq_err(pos, format!("unknown token id {id}")))?;
            let kind = vocab.kind(id);
            let atom = (kind == TokenKind::Atom).then(|| {
                next_atom += 1;
                next_atom - 1
            });
            Ok(TokenEvent { id, kind, atom })
        })
        .collect()
}

/// Rebuilds the molecule. Atom `k` of the result is the `k`-th atom token.
/// Each fragment after a `sep` bonds its leading star to the most recent
/// unconsumed star of the earlier fragments.
pub fn detokenize(events: &[TokenEvent]) -> Result<Molecule, FsmilesError> {
    let vocab = Vocab::get();
    if events.first().map(|e| e.id) != Some(START) {
        return Err(seq_err(0, "sequence must begin with start_0"));
    }
    let end = events
        .iter()
        .position(|e| e.id == END)
        .ok_or_else(|| seq_err(events.len(), "sequence lacks end_0"))?;
    let mut mol = Molecule::new();
    // star slots awaiting a child: (atom in mol, token position)
    let mut open_stars: Vec<(usize, usize)> = Vec::new();
    let mut pos = 1;
    let mut first = true;
    while pos <= end {
        let start = pos;
        while pos < end && events[pos].id != SEP {
            if events[pos].kind == TokenKind::Control {
                return Err(seq_err(pos, "unexpected control token inside a fragment"));
            }
            pos += 1;
        }
        if start == pos {
            return Err(seq_err(pos, "empty fragment"));
        }
        let mut text = String::new();
        let mut offsets = Vec::new();
        for e in &events[start..pos] {
            offsets.push(text.len());
            text.push_str(vocab.text(e.id).expect("ids validated"));
        }
        let token_at = |offset: usize| start + offsets.partition_point(|&o| o <= offset).saturating_sub(1);
        let parsed = parse_fragment(&text).map_err(|source| FsmilesError::Fragment {
            position: token_at(source.offset),
            source,
        })?;
        let base = mol.len();
        for atom in parsed.molecule.atoms() {
            mol.add_atom(atom.clone());
        }
        for b in parsed.molecule.bonds() {
            mol.add_bond(base + b.a, base + b.b, b.order).expect("fragment bonds are valid");
        }
        let mut stars = parsed.stars.iter();
        if !first {
            let lead = stars
                .next()
                .filter(|s| s.offset == 0)
                .ok_or_else(|| seq_err(start, "fragment must open with its attachment star"))?;
            let (parent_atom, _) = open_stars
                .pop()
                .ok_or_else(|| seq_err(start - 1, "no open attachment star for this fragment"))?;
            mol.add_bond(parent_atom, base + lead.atom, BondOrder::Single)
                .map_err(|e| seq_err(start, e.to_string()))?;
        }
        for s in stars {
            open_stars.push((base + s.atom, token_at(s.offset)));
        }
        first = false;
        pos += 1;
    }
    if let Some(&(_, position)) = open_stars.first() {
        return Err(seq_err(position, "attachment star never used"));
    }
    Ok(mol)
}
