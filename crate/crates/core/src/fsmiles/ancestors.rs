//! Reference atoms for relative geometry. The first reference of an atom is
//! the atom it hangs off in the written chain: scanning backwards, closed
//! branches are skipped and an unmatched `(` is stepped over. Crossing a
//! `sep` jumps to the atom carrying the star that fragment attached to.
//! The second and third references repeat the step from the previous one.

use super::tokenize::{FsmilesError, TokenEvent};
use super::vocab::{TokenKind, Vocab, SEP, START};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Open,
    Close,
    Star,
    Sep,
    Start,
    Atom,
    Other,
}

fn role(vocab: &Vocab, e: &TokenEvent) -> Role {
    if e.id == SEP {
        return Role::Sep;
    }
    if e.id == START {
        return Role::Start;
    }
    if e.kind == TokenKind::Atom {
        return Role::Atom;
    }
    match vocab.text(e.id) {
        Some("(") => Role::Open,
        Some(")") => Role::Close,
        Some("[*]") | Some("([*])") => Role::Star,
        _ => Role::Other,
    }
}

fn err(position: usize, message: &str) -> FsmilesError {
    FsmilesError::Sequence {
        position,
        message: message.into(),
    }
}

/// Ancestor lookup over a (possibly partial) token sequence.
pub struct AncestorTable {
    roles: Vec<Role>,
    /// For each `sep` position, the star token its fragment consumed.
    consumed: Vec<Option<usize>>,
}

impl AncestorTable {
    pub fn new(events: &[TokenEvent]) -> Result<Self, FsmilesError> {
        let vocab = Vocab::get();
        let roles: Vec<Role> = events.iter().map(|e| role(vocab, e)).collect();
        let mut consumed = vec![None; roles.len()];
        let mut stack = Vec::new();
        for (pos, &r) in roles.iter().enumerate() {
            match r {
                Role::Sep => {
                    consumed[pos] = Some(stack.pop().ok_or_else(|| err(pos, "no open attachment star for this fragment"))?);
                }
                // the first token after a sep is the fragment's own leading star
                Role::Star if pos == 0 || roles[pos - 1] != Role::Sep => stack.push(pos),
                _ => {}
            }
        }
        Ok(Self { roles, consumed })
    }

    /// Token position of the atom that token `pos` hangs off, if any.
    pub fn parent(&self, pos: usize) -> Result<Option<usize>, FsmilesError> {
        let mut depth = 0usize;
        let mut q = pos;
        while q > 0 {
            q -= 1;
            match self.roles[q] {
                Role::Close => depth += 1,
                Role::Open => depth = depth.saturating_sub(1),
                Role::Atom if depth == 0 => return Ok(Some(q)),
                Role::Sep if depth == 0 => {
                    let star = self.consumed[q].expect("every sep consumed a star");
                    return self.parent(star);
                }
                Role::Start if depth == 0 => return Ok(None),
                Role::Sep | Role::Start => return Err(err(q, "unbalanced branch")),
                _ => {}
            }
        }
        Ok(None)
    }

    /// Up to three reference atoms (token positions), nearest first.
    pub fn references(&self, pos: usize) -> Result<[Option<usize>; 3], FsmilesError> {
        let mut out = [None; 3];
        let mut cur = pos;
        for slot in &mut out {
            match self.parent(cur)? {
                Some(p) => {
                    *slot = Some(p);
                    cur = p;
                }
                None => break,
            }
        }
        Ok(out)
    }
}

/// Reference atoms of one token as sequence positions, nearest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AncestorIndices {
    pub r1: Option<usize>,
    pub r2: Option<usize>,
    pub r3: Option<usize>,
}

impl AncestorIndices {
    pub fn as_array(&self) -> [Option<usize>; 3] {
        [self.r1, self.r2, self.r3]
    }
}

/// Ancestors of the atom token at position `i`.
pub fn trace_ancestors(events: &[TokenEvent], i: usize) -> Result<AncestorIndices, FsmilesError> {
    if events.get(i).map(|e| e.kind) != Some(TokenKind::Atom) {
        return Err(err(i, "ancestors are defined for atom tokens only"));
    }
    let [r1, r2, r3] = AncestorTable::new(&events[..=i])?.references(i)?;
    Ok(AncestorIndices { r1, r2, r3 })
}

/// Reference atoms for every atom token, as atom ordinals (the `k` in "k-th
/// atom token"), one entry per atom in sequence order.
pub fn atom_ancestors(events: &[TokenEvent]) -> Result<Vec<[Option<usize>; 3]>, FsmilesError> {
    let table = AncestorTable::new(events)?;
    let mut ordinal = vec![usize::MAX; events.len()];
    let mut out = Vec::new();
    for (pos, e) in events.iter().enumerate() {
        if e.kind == TokenKind::Atom {
            ordinal[pos] = out.len();
            out.push(table.references(pos)?.map(|r| r.map(|p| ordinal[p])));
        }
    }
    Ok(out)
}
