use std::collections::HashMap;
use std::sync::OnceLock;

pub type TokenId = u16;

/// Token list in id order. `"+_0"` sits where the ring-suffix pattern would
/// put `"o_10"`; `"o_10"` itself is appended at the end.
const TOKENS: &[&str] = &[
    "pad_0", "start_0", "end_0", "sep_0",
    "C_0", "C_5", "C_6", "C_10", "C_11", "C_12",
    "c_0", "c_5", "c_6", "c_10", "c_11", "c_12",
    "N_0", "N_5", "N_6", "N_10", "N_11", "N_12",
    "n_0", "n_5", "n_6", "n_10", "n_11", "n_12",
    "S_0",
    "s_0", "s_5", "s_6", "s_10", "s_11", "s_12",
    "O_0", "O_5", "O_6", "O_10", "O_11", "O_12",
    "o_0", "o_5", "o_6", "+_0", "o_11", "o_12",
    "F_0",
    "Cl_0",
    "[nH]_0", "[nH]_5", "[nH]_6",
    "[nH]_10", "[nH]_11", "[nH]_12",
    "Br_0",
    "/_0", "\\_0", "@_0", "@@_0", "H_0",
    "1_0", "2_0", "3_0", "4_0", "5_0", "6_0",
    "#_0", "=_0", "-_0", "(_0", ")_0",
    "[_0", "]_0", "[*]_0", "([*])_0",
    "o_10",
];

pub const PAD: TokenId = 0;
pub const START: TokenId = 1;
pub const END: TokenId = 2;
pub const SEP: TokenId = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// pad, start, end, sep.
    Control,
    /// An element symbol, carrying an atom.
    Atom,
    /// Branches, ring digits, bonds, brackets, stars and modifiers.
    Structural,
}

/// Fixed bijection between token strings and dense ids.
#[derive(Debug)]
pub struct Vocab {
    ids: HashMap<&'static str, TokenId>,
}

impl Vocab {
    pub fn get() -> &'static Vocab {
        static VOCAB: OnceLock<Vocab> = OnceLock::new();
        VOCAB.get_or_init(|| Vocab {
            ids: TOKENS.iter().enumerate().map(|(i, t)| (*t, i as TokenId)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        TOKENS.len()
    }

    pub fn is_empty(&self) -> bool {
        TOKENS.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&'static str> {
        TOKENS.get(id as usize).copied()
    }

    pub fn tokens(&self) -> &'static [&'static str] {
        TOKENS
    }

    /// SMILES text of a token: the name without its ring-size suffix.
    pub fn text(&self, id: TokenId) -> Option<&'static str> {
        let t = self.token(id)?;
        Some(&t[..t.rfind('_').expect("every token has a suffix")])
    }

    pub fn kind(&self, id: TokenId) -> TokenKind {
        match id {
            PAD | START | END | SEP => TokenKind::Control,
            _ => {
                let text = self.text(id).unwrap_or("");
                let atom = matches!(text, "[nH]" | "Cl" | "Br")
                    || (text.len() == 1 && text.as_bytes()[0].is_ascii_alphabetic() && text != "H");
                if atom {
                    TokenKind::Atom
                } else {
                    TokenKind::Structural
                }
            }
        }
    }

    /// Ring-size suffix of a token.
    pub fn suffix(&self, id: TokenId) -> Option<u8> {
        let t = self.token(id)?;
        t[t.rfind('_')? + 1..].parse().ok()
    }
}

/// Ring-size suffix for an atom whose smallest ring has `size` atoms:
/// 0 when acyclic, 3-4 map to 5, sizes above 12 to 12, and 7-9 have no token.
pub fn ring_suffix(size: usize) -> Option<u8> {
    match size {
        0 => Some(0),
        1..=5 => Some(5),
        6 => Some(6),
        7..=9 => None,
        10..=12 => Some(size as u8),
        _ => Some(12),
    }
}
