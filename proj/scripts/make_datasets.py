#!/usr/bin/env python3
"""Generate the bundled benchmark-style CSV datasets.

Molecules are assembled from valence-safe SMILES fragments so every row
parses. Labels are deterministic functions of structure plus seeded noise,
which keeps the tasks learnable while staying reproducible.

Outputs:
  data/esol.csv  - 1127 molecules, one continuous solubility-style label
  data/bbbp.csv  - 2040 molecules, one 0/1 permeability-style label
"""

import csv
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, os.pardir, "data")

# Fragments that connect through single bonds on both sides without ever
# exceeding organic-subset valences.
MID = [
    "C", "CC", "CCC", "C(C)", "C(C)C", "CO", "CN", "OC", "NC",
    "C(=O)", "C(O)", "C(N)", "C(F)", "C(Cl)", "CS", "SC",
    "c1ccccc1", "c1ccncc1", "C1CCCCC1", "C1CCOCC1", "c1ccsc1",
    "C1CCNCC1", "C1CCCC1", "C1CC1",
]
TERMINAL = [
    "", "", "", "C", "O", "N", "Cl", "Br", "F",
    "C#N", "C(=O)O", "C(=O)N", "C(F)(F)F", "S(=O)(=O)O",
]
AROMATIC_RINGS = ("c1ccccc1", "c1ccncc1", "c1ccsc1")


def random_smiles(rng):
    k = rng.randint(1, 6)
    frags = [rng.choice(MID) for _ in range(k)]
    return "".join(frags) + rng.choice(TERMINAL)


def descriptors(s):
    arom = sum(s.count(r) for r in AROMATIC_RINGS)
    return {
        "len": len(s),
        "arom": arom,
        "o": s.count("O") + s.count("o"),
        "n": s.count("N") + s.count("n"),
        "halogen": s.count("Cl") + s.count("Br") + s.count("F"),
        "s": s.count("S") + s.count("s"),
    }


def make_unique(rng, count):
    seen = set()
    out = []
    while len(out) < count:
        s = random_smiles(rng)
        if s in seen:
            continue
        seen.add(s)
        out.append(s)
    return out


def write_esol():
    rng = random.Random(20260824)
    mols = make_unique(rng, 1127)
    rows = []
    for s in mols:
        d = descriptors(s)
        log_s = (
            -2.0
            + 0.55 * (d["o"] + d["n"])
            - 0.05 * d["len"]
            - 1.1 * d["arom"]
            - 0.6 * d["halogen"]
            - 0.3 * d["s"]
            + rng.gauss(0.0, 0.25)
        )
        rows.append((s, round(log_s, 4)))
    os.makedirs(DATA, exist_ok=True)
    with open(os.path.join(DATA, "esol.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["smiles", "logSolubility"])
        w.writerows(rows)
    vals = [r[1] for r in rows]
    mean = sum(vals) / len(vals)
    std = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))
    print(f"esol: n={len(rows)} mean={mean:.3f} std={std:.3f}")


def write_bbbp():
    rng = random.Random(114250)
    mols = make_unique(rng, 2040)
    scored = []
    for s in mols:
        d = descriptors(s)
        score = (
            0.7 * d["arom"]
            - 0.45 * d["o"]
            - 0.3 * d["n"]
            - 0.015 * d["len"]
            + 0.2 * d["halogen"]
            + rng.gauss(0.0, 0.45)
        )
        scored.append((s, score))
    # threshold at a fixed quantile so the class balance mirrors the usual
    # ~3:1 permeable/non-permeable ratio
    cutoff = sorted(x[1] for x in scored)[len(scored) // 4]
    rows = [(s, 1 if v > cutoff else 0) for s, v in scored]
    with open(os.path.join(DATA, "bbbp.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["smiles", "p_np"])
        w.writerows(rows)
    pos = sum(r[1] for r in rows)
    print(f"bbbp: n={len(rows)} positives={pos} ({pos / len(rows):.1%})")


if __name__ == "__main__":
    write_esol()
    write_bbbp()
