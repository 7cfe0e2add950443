//! MDL V2000 molfile/SDF subset: fixed-column atom and bond blocks,
//! `M  CHG` properties, bond order 4 for aromatic bonds.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Atom, BondOrder, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SDF record {record}, line {line}: {kind}")]
pub struct SdfError {
    /// Zero-based record index within the file.
    pub record: usize,
    /// One-based line number within the file.
    pub line: usize,
    pub kind: SdfErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdfErrorKind {
    #[error("file ends inside a record")]
    Truncated,
    #[error("malformed counts line")]
    BadCounts,
    #[error("unsupported format {0:?}, expected V2000")]
    Version(String),
    #[error("malformed atom line")]
    BadAtom,
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("malformed bond line")]
    BadBond,
    #[error("atom index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("unsupported bond order {0}")]
    BondOrder(u8),
    #[error("invalid bond: {0}")]
    Graph(String),
    #[error("malformed property line")]
    BadProperty,
}

fn field<'a>(line: &'a str, start: usize, end: usize) -> &'a str {
    let end = end.min(line.len());
    if start >= end {
        ""
    } else {
        line.get(start..end).unwrap_or("").trim()
    }
}

struct Cursor<'a> {
    lines: &'a [&'a str],
    pos: usize,
    record: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, kind: SdfErrorKind) -> SdfError {
        SdfError {
            record: self.record,
            line: self.pos,
            kind,
        }
    }

    fn next(&mut self) -> Result<&'a str, SdfError> {
        let line = *self.lines.get(self.pos).ok_or_else(|| self.fail(SdfErrorKind::Truncated))?;
        self.pos += 1;
        Ok(line)
    }
}

fn charge_code(code: i32) -> i8 {
    match code {
        1 => 3,
        2 => 2,
        3 => 1,
        5 => -1,
        6 => -2,
        7 => -3,
        _ => 0,
    }
}

fn read_record(cur: &mut Cursor) -> Result<Molecule, SdfError> {
    let name = cur.next()?.trim().to_string();
    cur.next()?;
    cur.next()?;
    let counts = cur.next()?;
    let n_atoms: usize = field(counts, 0, 3).parse().map_err(|_| cur.fail(SdfErrorKind::BadCounts))?;
    let n_bonds: usize = field(counts, 3, 6).parse().map_err(|_| cur.fail(SdfErrorKind::BadCounts))?;
    let version = field(counts, 33, 39);
    if !version.is_empty() && version != "V2000" {
        return Err(cur.fail(SdfErrorKind::Version(version.to_string())));
    }
    let mut mol = Molecule::with_name(name);
    let mut valence_field = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        let line = cur.next()?;
        let coord = |s, e| field(line, s, e).parse::<f64>().ok().filter(|v| v.is_finite());
        let (Some(x), Some(y), Some(z)) = (coord(0, 10), coord(10, 20), coord(20, 30)) else {
            return Err(cur.fail(SdfErrorKind::BadAtom));
        };
        let symbol = field(line, 31, 34);
        let element =
            Element::from_symbol(symbol).ok_or_else(|| cur.fail(SdfErrorKind::UnknownElement(symbol.to_string())))?;
        let mut atom = Atom::new(element).at([x, y, z]);
        let parse_int = |s, e| -> Result<i32, SdfError> {
            let f = field(line, s, e);
            if f.is_empty() {
                Ok(0)
            } else {
                f.parse().map_err(|_| cur.fail(SdfErrorKind::BadAtom))
            }
        };
        atom.formal_charge = charge_code(parse_int(36, 39)?);
        valence_field.push(parse_int(48, 51)?);
        mol.add_atom(atom);
    }
    for _ in 0..n_bonds {
        let line = cur.next()?;
        let parse = |s, e| field(line, s, e).parse::<usize>().map_err(|_| cur.fail(SdfErrorKind::BadBond));
        let (a, b, code) = (parse(0, 3)?, parse(3, 6)?, parse(6, 9)?);
        for idx in [a, b] {
            if idx == 0 || idx > n_atoms {
                return Err(cur.fail(SdfErrorKind::IndexOutOfRange(idx)));
            }
        }
        let order = match code {
            1 => BondOrder::Single,
            2 => BondOrder::Double,
            3 => BondOrder::Triple,
            4 => BondOrder::Aromatic,
            other => return Err(cur.fail(SdfErrorKind::BondOrder(other as u8))),
        };
        mol.add_bond(a - 1, b - 1, order)
            .map_err(|e| cur.fail(SdfErrorKind::Graph(e.to_string())))?;
    }
    let mut charges_from_block = true;
    loop {
        let line = cur.next()?;
        if line.starts_with("M  END") {
            break;
        }
        if line.starts_with("M  CHG") {
            if charges_from_block {
                for atom in 0..mol.len() {
                    mol.atom_mut(atom).formal_charge = 0;
                }
                charges_from_block = false;
            }
            let parts: Vec<&str> = line[6..].split_whitespace().collect();
            let nums: Result<Vec<i32>, _> = parts.iter().map(|p| p.parse::<i32>()).collect();
            let nums = nums.map_err(|_| cur.fail(SdfErrorKind::BadProperty))?;
            let Some((&count, pairs)) = nums.split_first() else {
                return Err(cur.fail(SdfErrorKind::BadProperty));
            };
            if pairs.len() != 2 * count as usize {
                return Err(cur.fail(SdfErrorKind::BadProperty));
            }
            for pair in pairs.chunks(2) {
                let idx = pair[0] as usize;
                if idx == 0 || idx > mol.len() {
                    return Err(cur.fail(SdfErrorKind::IndexOutOfRange(idx)));
                }
                mol.atom_mut(idx - 1).formal_charge = pair[1] as i8;
            }
        }
    }
    let aromatic: Vec<(usize, usize)> = mol
        .bonds()
        .iter()
        .filter(|b| b.order == BondOrder::Aromatic)
        .map(|b| (b.a, b.b))
        .collect();
    for (a, b) in aromatic {
        mol.atom_mut(a).aromatic = true;
        mol.atom_mut(b).aromatic = true;
    }
    // a nonzero valence field fixes the total valence; 15 encodes zero
    for (i, &v) in valence_field.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let total = if v == 15 { 0 } else { v };
        let bonded = mol.used_valence(i) as i32 - mol.atom(i).explicit_h as i32;
        let atom = mol.atom_mut(i);
        atom.no_implicit_h = true;
        atom.explicit_h = (total - bonded).max(0) as u8;
    }
    // skip data items up to the record separator
    while cur.pos < cur.lines.len() {
        let line = cur.next()?;
        if line.starts_with("$$$$") {
            break;
        }
    }
    Ok(mol)
}

/// Reads every record of an SDF file.
pub fn read_sdf(text: &str) -> Result<Vec<Molecule>, SdfError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut cur = Cursor {
        lines: &lines,
        pos: 0,
        record: 0,
    };
    let mut out = Vec::new();
    while cur.pos < lines.len() {
        if lines[cur.pos..].iter().all(|l| l.trim().is_empty()) {
            break;
        }
        out.push(read_record(&mut cur)?);
        cur.record += 1;
    }
    Ok(out)
}

/// Writes molecules as V2000 records. Coordinates keep four decimals.
pub fn write_sdf(mols: &[Molecule]) -> String {
    let mut s = String::new();
    for mol in mols {
        let _ = writeln!(s, "{}", mol.name);
        s.push_str("  edmol           3D\n\n");
        let _ = writeln!(
            s,
            "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000",
            mol.len(),
            mol.bonds().len()
        );
        for (i, a) in mol.atoms().iter().enumerate() {
            let valence = if a.no_implicit_h {
                match mol.used_valence(i) {
                    0 => 15,
                    v => v,
                }
            } else {
                0
            };
            let [x, y, z] = a.position.map(|v| if v == 0.0 { 0.0 } else { v });
            let _ = writeln!(
                s,
                "{x:>10.4}{y:>10.4}{z:>10.4} {:<3} 0  0  0  0  0{valence:>3}  0  0  0  0  0  0",
                a.element.symbol()
            );
        }
        for b in mol.bonds() {
            let _ = writeln!(s, "{:>3}{:>3}{:>3}  0", b.a + 1, b.b + 1, b.order.sdf_code());
        }
        let charged: Vec<(usize, i8)> = mol
            .atoms()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.formal_charge != 0)
            .map(|(i, a)| (i + 1, a.formal_charge))
            .collect();
        for chunk in charged.chunks(8) {
            let _ = write!(s, "M  CHG{:>3}", chunk.len());
            for (i, q) in chunk {
                let _ = write!(s, " {i:>3} {q:>3}");
            }
            s.push('\n');
        }
        s.push_str("M  END\n$$$$\n");
    }
    s
}
