mod common;

use std::time::Instant;

use edmol_core::chem::parse_smiles;
use edmol_core::fsmiles::{detokenize, fragment, prepare_for_tokens, token_string, tokenize, trace_ancestors, atom_ancestors, TokenKind};

#[test]
fn corpus_roundtrip_is_isomorphic() {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let corpus = common::corpus();
    for (smiles, name) in &corpus {
        let (mol, _) = prepare_for_tokens(&parse_smiles(smiles).unwrap());
        let events = match tokenize(&mol) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        match detokenize(&events) {
            Ok(back) if common::isomorphic(&mol, &back) => {}
            Ok(_) => failures.push(format!("{name}: not isomorphic: {}", token_string(&events))),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
    assert_eq!(corpus.len(), 100);
    assert!(t0.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn fragments_have_three_heavy_atoms() {
    for (smiles, name) in common::corpus() {
        let (mol, _) = prepare_for_tokens(&parse_smiles(&smiles).unwrap());
        let d = fragment(&mol);
        for f in &d.fragments {
            assert!(f.len() >= 3, "{name}: fragment {f:?}");
        }
        let covered: usize = d.fragments.iter().map(Vec::len).sum();
        assert_eq!(covered, mol.len());
    }
}

#[test]
fn detokenized_atoms_follow_token_order() {
    for (smiles, name) in common::corpus() {
        let (mol, _) = prepare_for_tokens(&parse_smiles(&smiles).unwrap());
        let events = tokenize(&mol).unwrap();
        let back = detokenize(&events).unwrap();
        let sources: Vec<usize> = events.iter().filter_map(|e| e.atom).collect();
        assert_eq!(sources.len(), mol.len(), "{name}");
        for (k, &src) in sources.iter().enumerate() {
            assert_eq!(back.atom(k).element, mol.atom(src).element, "{name}");
        }
        for b in back.bonds() {
            assert!(mol.bond_between(sources[b.a], sources[b.b]).is_some(), "{name}");
        }
    }
}

#[test]
fn ancestors_form_a_path_in_the_graph() {
    for (smiles, name) in common::corpus() {
        let (mol, _) = prepare_for_tokens(&parse_smiles(&smiles).unwrap());
        let events = tokenize(&mol).unwrap();
        let back = detokenize(&events).unwrap();
        let refs = atom_ancestors(&events).unwrap();
        assert_eq!(refs.len(), back.len());
        assert_eq!(refs[0], [None; 3]);
        for (k, r) in refs.iter().enumerate().skip(1) {
            let mut prev = k;
            for (depth, slot) in r.iter().enumerate() {
                match slot {
                    Some(p) => {
                        assert!(*p < prev, "{name}: atom {k} ref {p}");
                        assert!(back.bond_between(prev, *p).is_some(), "{name}: atom {k} refs {r:?}");
                        prev = *p;
                    }
                    // the chain only ends at the first atom
                    None => assert_eq!(prev, 0, "{name}: atom {k} refs {r:?} at {depth}"),
                }
            }
            let distinct: std::collections::BTreeSet<_> = r.iter().flatten().chain([&k]).collect();
            assert_eq!(distinct.len(), 1 + r.iter().flatten().count(), "{name}");
        }
        for (i, _) in events.iter().enumerate().filter(|(_, e)| e.kind == TokenKind::Atom) {
            let a = trace_ancestors(&events, i).unwrap();
            let present: Vec<usize> = a.as_array().into_iter().flatten().collect();
            assert!(present.windows(2).all(|w| w[0] > w[1]) && present.iter().all(|&p| p < i));
            assert!(present.iter().all(|&p| events[p].kind == TokenKind::Atom));
        }
    }
}

#[test]
fn grammar_accepts_every_corpus_sequence() {
    use edmol_core::fsmiles::GrammarState;
    for (smiles, name) in common::corpus() {
        let (mol, _) = prepare_for_tokens(&parse_smiles(&smiles).unwrap());
        let events = tokenize(&mol).unwrap();
        let mut g = GrammarState::new();
        for (i, e) in events.iter().enumerate() {
            assert!(g.advance(e.id), "{name}: token {i} of {}", token_string(&events));
        }
        assert!(g.is_done(), "{name}");
    }
}
