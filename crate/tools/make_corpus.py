#!/usr/bin/env python3
"""Regenerate the bundled molecule corpora under crates/core/data.

Requires RDKit. The Rust crates never call this; it only freezes reference
values (hydrogen counts, ring sizes) and 3D conformers into data files.

    python3 tools/make_corpus.py
"""

import json
import os
import sys

from rdkit import Chem
from rdkit.Chem import AllChem

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "crates", "core", "data")

ALLOWED = {"C", "N", "O", "S", "F", "Cl", "Br"}

# Drug-like candidates. Anything that violates the token vocabulary
# (7-9 membered rings, aliphatic ring sulfur, other elements) is dropped.
CANDIDATES = """
CC(=O)Oc1ccccc1C(=O)O aspirin
CC(=O)Nc1ccc(O)cc1 paracetamol
CC(C)Cc1ccc(cc1)C(C)C(=O)O ibuprofen
Cn1cnc2c1c(=O)n(C)c(=O)n2C caffeine
CN1CCC[C@H]1c1cccnc1 nicotine
OC(=O)c1ccccc1O salicylic_acid
CC(C)NCC(O)COc1cccc2ccccc12 propranolol
COc1ccc2[nH]cc(CCN(C)C)c2c1 methoxy_dmt
CN1CCN(CC1)c1ccccc1 phenylpiperazine_me
O=C(O)Cc1ccccc1Nc1c(Cl)cccc1Cl diclofenac
CC(C)(C)NCC(O)c1ccc(O)c(CO)c1 salbutamol
COc1ccc(CCN)cc1OC dimethoxyphenethylamine
NC(=O)c1cccnc1 nicotinamide
CC(=O)Nc1ccc(OCC)cc1 phenacetin
OC(=O)CCc1ccccc1 hydrocinnamic_acid
Clc1ccc(cc1)C(=O)c1ccccc1 chlorobenzophenone
CCN(CC)CC(=O)Nc1c(C)cccc1C lidocaine
COc1cc(C=O)ccc1O vanillin
CC(=O)c1ccc(N)cc1 aminoacetophenone
Oc1ccc(cc1)C(=O)O hydroxybenzoic_acid
CN(C)c1ccc(C=O)cc1 dimethylaminobenzaldehyde
CCOC(=O)c1ccc(N)cc1 benzocaine
CCN(CC)C(=O)c1cccc(C)c1 deet
Cc1ccc(cc1)S(=O)(=O)N tosylamide
NS(=O)(=O)c1ccc(N)cc1 sulfanilamide
Cc1onc(c1)NS(=O)(=O)c1ccc(N)cc1 sulfamethoxazole
COc1ccc(cc1)C(=O)CC methoxypropiophenone
Fc1ccc(cc1)C(=O)CCCN1CCCCC1 fluorobutyrophenone
OC1CCN(CC1)Cc1ccccc1 benzylpiperidinol
c1ccc2c(c1)[nH]c1ccccc12 carbazole
O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1 phenytoin
CC1=CC(=O)c2ccccc2C1=O menadione
Oc1ccc2ccccc2c1 naphthol
Nc1ccc2ccccc2c1 naphthylamine
COc1ccc2cc(ccc2c1)C(C)C(=O)O naproxen
CC(N)Cc1ccccc1 amphetamine
CNC(C)Cc1ccccc1 methamphetamine
OCCN1CCN(CC1)CCc1ccccc1 piperazine_ethanol
c1ccc(cc1)-c1ccccn1 phenylpyridine
Cc1ncc(n1CCO)[N+](=O)[O-] metronidazole
O=[N+]([O-])c1ccc(O)cc1 nitrophenol
Nc1ncnc2[nH]cnc12 adenine
O=c1[nH]cnc2nc[nH]c12 hypoxanthine
Cc1cc(C)nc(n1)N dimethylaminopyrimidine
CC(C)c1ccc(C)cc1O thymol
CC(C)c1cccc(C(C)C)c1O propofol
COc1ccccc1OCC(O)CO guaifenesin
OC(CNc1ccccc1)c1ccccc1 anilino_phenylethanol
Clc1ccc(Cl)c(c1)C(=O)N dichlorobenzamide
Brc1ccc(cc1)C(=O)O bromobenzoic_acid
Fc1ccc(cc1)C(=O)Nc1ccccn1 fluorobenzamidopyridine
CC(=O)NCCc1c[nH]c2ccc(OC)cc12 melatonin
NCCc1c[nH]c2ccc(O)cc12 serotonin
NCCc1ccc(O)c(O)c1 dopamine
CNCC(O)c1ccc(O)c(O)c1 epinephrine
N[C@@H](Cc1ccccc1)C(=O)O phenylalanine
N[C@@H](Cc1c[nH]c2ccccc12)C(=O)O tryptophan
N[C@@H](Cc1ccc(O)cc1)C(=O)O tyrosine
OC(=O)c1cccnc1 nicotinic_acid
NNC(=O)c1ccncc1 isoniazid
Cc1ccc(cc1)C(=O)O toluic_acid
COC(=O)c1ccccc1O methyl_salicylate
CC(C)OC(=O)c1ccccc1 isopropyl_benzoate
O=C(Nc1ccccc1)Nc1ccccc1 carbanilide
CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc12 diazepam
CC1(C)C(N2C(=O)CC2S1)C(=O)O penam_core
c1ccc(cc1)C1CCNCC1 phenylpiperidine
CN1CCC(CC1)OC(=O)c1ccccc1 piperidinyl_benzoate
Cc1cccc(C)c1NC(=O)C1CCCCN1C mepivacaine
O=C(O)c1ccc(cc1)N aminobenzoic_acid
CC(=O)Oc1ccc(cc1)C(C)=O acetoxyacetophenone
COc1ccc(cc1)C=CC(=O)O methoxycinnamic_acid
OC(=O)C=Cc1ccc(O)c(O)c1 caffeic_acid
Oc1cc(O)cc(O)c1 phloroglucinol
CCCCc1ccc(O)cc1 butylphenol
CC(C)(C)c1ccc(O)cc1 tert_butylphenol
Clc1ccc(cc1)OCC(=O)O chlorophenoxyacetic_acid
Clc1cc(Cl)c(OCC(=O)O)cc1 dichlorophenoxyacetic_acid
CN(C)CCOC(c1ccccc1)c1ccccc1 diphenhydramine
CN(C)CCC(c1ccccc1)c1ccccn1 pheniramine
Clc1ccc(cc1)C(CCN(C)C)c1ccccn1 chlorpheniramine
CC(O)(c1ccccc1)c1ccccc1 diphenylethanol
OCc1ccc(CO)o1 furandimethanol
O=Cc1ccco1 furfural
Cc1ccc(s1)C(=O)O methylthiophenecarboxylic_acid
c1csc(n1)N aminothiazole
Cc1nc(N)sc1C(=O)OCC ethyl_aminothiazole
COc1cccc(c1)C1CC1N phenylcyclopropylamine_ome
NC1CC1c1ccccc1 tranylcypromine
OC(=O)C1CC(=O)NC1 pyroglutamic_homolog
O=C1CCCN1 pyrrolidone
CN1CCCC1=O methylpyrrolidinone
O=C1CCC(=O)N1 succinimide
O=C1NC(=O)c2ccccc12 phthalimide
Cn1ccnc1 methylimidazole
c1ccc2[nH]ncc2c1 indazole
c1ccc2ncccc2c1 quinoline
c1ccc2cnccc2c1 isoquinoline
Oc1cccc2cccnc12 hydroxyquinoline
c1ccc2occc2c1 benzofuran
c1ccc2sccc2c1 benzothiophene
Cc1ccc2nc(N)sc2c1 aminomethylbenzothiazole
CCOc1ccc2nc(S(N)(=O)=O)sc2c1 ethoxzolamide
CC(=O)Nc1nnc(s1)S(N)(=O)=O acetazolamide
NC(=N)c1ccccc1 benzamidine
CC(C)NC(=O)c1ccccc1 isopropylbenzamide
O=C(NCc1ccccc1)c1ccccn1 picolinamide_benzyl
FC(F)(F)c1ccccc1 trifluorotoluene
FC(F)(F)c1ccc(Oc2ccccc2)cc1 trifluoromethyl_diphenylether
c1ccc(Oc2ccccc2)cc1 diphenyl_ether
c1ccc(Cc2ccccc2)cc1 diphenylmethane
OC(=O)CC(O)(CC(=O)O)C(=O)O citric_acid
OCC(O)CO glycerol
CCCCCCCC(=O)O octanoic_acid
NCCCC[C@H](N)C(=O)O lysine
NC(=N)NCCC[C@H](N)C(=O)O arginine
c1ccccc1CCCc1ccccc1 diphenylpropane
"""

TOY = """
Oc1ccccc1 phenol
Cc1ccccc1N toluidine
CC(=O)Nc1ccccc1 acetanilide
OC(=O)c1ccccc1 benzoic_acid
NC(=O)c1cccnc1 nicotinamide
CCOC(C)=O ethyl_acetate
CCCCO butanol
c1ccc2ccccc2c1 naphthalene
Oc1ccc(Cl)cc1 chlorophenol
O=Cc1ccco1 furfural
Cc1cccs1 methylthiophene
C1CCNCC1 piperidine
C1CCOC1 tetrahydrofuran
NCCc1ccccc1 phenethylamine
CC(C)O isopropanol
c1cc[nH]c1 pyrrole
Fc1ccccc1F difluorobenzene
CC(C)=O acetone
OCC(O)CO glycerol
CC(=O)c1ccccc1 acetophenone
"""


def vocab_ok(mol):
    ri = mol.GetRingInfo()
    for a in mol.GetAtoms():
        if a.GetSymbol() not in ALLOWED:
            return False
        size = ri.MinAtomRingSize(a.GetIdx()) if ri.NumAtomRings(a.GetIdx()) else 0
        if 7 <= size <= 9 or size > 12:
            return False
        if a.GetSymbol() == "S" and not a.GetIsAromatic() and size:
            return False
        if a.GetSymbol() in ("F", "Cl", "Br") and size:
            return False
        if a.GetSymbol() == "O" and a.GetIsAromatic() and size >= 10:
            return False
    return True


def parse_list(text):
    out = []
    for line in text.strip().splitlines():
        smi, name = line.split()
        out.append((smi, name))
    return out


def reference_record(smi, name):
    mol = Chem.MolFromSmiles(smi)
    ri = mol.GetRingInfo()
    return {
        "name": name,
        "smiles": smi,
        "n_atoms": mol.GetNumAtoms(),
        "n_bonds": mol.GetNumBonds(),
        "aromatic": [a.GetIsAromatic() for a in mol.GetAtoms()],
        "charge": [a.GetFormalCharge() for a in mol.GetAtoms()],
        "total_h": [a.GetTotalNumHs() for a in mol.GetAtoms()],
        "min_ring": [
            ri.MinAtomRingSize(a.GetIdx()) if ri.NumAtomRings(a.GetIdx()) else 0
            for a in mol.GetAtoms()
        ],
    }


def embed(smi, name, seed):
    mol = Chem.AddHs(Chem.MolFromSmiles(smi))
    params = AllChem.ETKDGv3()
    params.randomSeed = seed
    if AllChem.EmbedMolecule(mol, params) != 0:
        raise RuntimeError(f"embedding failed for {name}")
    AllChem.MMFFOptimizeMolecule(mol)
    mol.SetProp("_Name", name)
    return Chem.MolToMolBlock(mol, kekulize=False) + "$$$$\n"


def main():
    os.makedirs(DATA, exist_ok=True)
    corpus = []
    seen = set()
    for smi, name in parse_list(CANDIDATES):
        mol = Chem.MolFromSmiles(smi)
        if mol is None or not vocab_ok(mol):
            print(f"skip {name}", file=sys.stderr)
            continue
        can = Chem.MolToSmiles(mol)
        if can in seen:
            continue
        seen.add(can)
        corpus.append((can, name))
    corpus = corpus[:100]
    if len(corpus) != 100:
        raise SystemExit(f"only {len(corpus)} usable molecules")

    with open(os.path.join(DATA, "corpus.smi"), "w") as f:
        for smi, name in corpus:
            f.write(f"{smi} {name}\n")
    with open(os.path.join(DATA, "corpus_reference.json"), "w") as f:
        json.dump([reference_record(s, n) for s, n in corpus], f, indent=1)

    with open(os.path.join(DATA, "toy20.sdf"), "w") as f:
        for i, (smi, name) in enumerate(parse_list(TOY)):
            f.write(embed(smi, name, 7 + i))
    with open(os.path.join(DATA, "ethanol.sdf"), "w") as f:
        f.write(embed("CCO", "ethanol", 42))


if __name__ == "__main__":
    main()
