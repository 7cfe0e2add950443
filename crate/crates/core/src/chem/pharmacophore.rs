use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Element, Molecule};

/// Pharmacophore label attached to point-cloud points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PharmacophoreClass {
    Hbd,
    Hba,
    HbdHba,
    Other,
}

impl PharmacophoreClass {
    pub const ALL: [PharmacophoreClass; 4] = [
        PharmacophoreClass::Hbd,
        PharmacophoreClass::Hba,
        PharmacophoreClass::HbdHba,
        PharmacophoreClass::Other,
    ];

    /// Dense id used by the class embedding table.
    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    /// Label used in point-cloud files.
    pub fn label(self) -> &'static str {
        match self {
            PharmacophoreClass::Hbd => "HBD",
            PharmacophoreClass::Hba => "HBA",
            PharmacophoreClass::HbdHba => "HBD_HBA",
            PharmacophoreClass::Other => "OTH",
        }
    }
}

impl fmt::Display for PharmacophoreClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PharmacophoreClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown pharmacophore label {s:?}"))
    }
}

/// Donor/acceptor typing of one atom.
///
/// Only N and O carry labels. Donor: at least one hydrogen. Acceptor: O with
/// formal charge <= 0, or N that is not positively charged and is not an
/// aromatic N-H (pyrrole-type nitrogen, whose lone pair is in the ring).
pub fn classify_pharmacophore(mol: &Molecule, atom: usize) -> PharmacophoreClass {
    let a = mol.atom(atom);
    let donor;
    let acceptor;
    match a.element {
        Element::O => {
            donor = mol.total_h(atom) > 0;
            acceptor = a.formal_charge <= 0;
        }
        Element::N => {
            let h = mol.total_h(atom);
            donor = h > 0;
            acceptor = a.formal_charge <= 0 && !(a.aromatic && h > 0);
        }
        _ => return PharmacophoreClass::Other,
    }
    match (donor, acceptor) {
        (true, true) => PharmacophoreClass::HbdHba,
        (true, false) => PharmacophoreClass::Hbd,
        (false, true) => PharmacophoreClass::Hba,
        (false, false) => PharmacophoreClass::Other,
    }
}
