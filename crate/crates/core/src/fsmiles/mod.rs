//! Fragment-SMILES (FSMILES) tokenization: ring-size annotated atom tokens,
//! fragments joined through `[*]` attachment points and separated by `sep`.

mod ancestors;
mod fragment;
mod grammar;
mod tokenize;
mod vocab;

pub use ancestors::{atom_ancestors, trace_ancestors, AncestorIndices, AncestorTable};
pub use grammar::GrammarState;
pub use fragment::{fragment, FragmentDecomposition};
pub use tokenize::{detokenize, events_from_ids, prepare_for_tokens, token_string, tokenize, FsmilesError, TokenEvent};
pub use vocab::{ring_suffix, TokenId, TokenKind, Vocab, END, PAD, SEP, START};
