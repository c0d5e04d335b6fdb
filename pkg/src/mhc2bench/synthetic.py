"""Synthetic antigens with planted per-allele motifs, for smoke tests and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AMINO_ACIDS, Antigen, AssayRecord

DEFAULT_ALLELES = ("DRB1_0101", "DPA10103-DPB10201", "DQA10501-DQB10201")


def random_sequence(rng: np.random.Generator, n: int) -> str:
    return "".join(AMINO_ACIDS[i] for i in rng.integers(0, 20, size=n))


@dataclass
class SyntheticCorpus:
    antigens: dict
    records: list
    cores: dict
    motifs: dict


def make_corpus(n_antigens: int = 40, alleles=DEFAULT_ALLELES, epitopes_per_antigen: int = 2,
                length_range=(150, 400), peptide_range=(13, 19), seed: int = 0,
                motif_seed: int = 0, id_prefix: str = "ag") -> SyntheticCorpus:
    """Antigens with one planted 9-mer motif per allele.

    Each antigen receives ``epitopes_per_antigen`` positives per allele: a
    peptide whose core is the allele's motif, placed without overlapping
    other planted peptides. Records are linked EL positives dated 2015.
    Motifs depend only on ``motif_seed``, so corpora built with different
    ``seed`` share them (train versus held-out antigens).
    """
    rng = np.random.default_rng(seed)
    motifs = {a: random_sequence(np.random.default_rng([motif_seed, i]), 9)
              for i, a in enumerate(alleles)}
    antigens, records, cores = {}, [], {}
    for g in range(n_antigens):
        n = int(rng.integers(length_range[0], length_range[1] + 1))
        seq = list(random_sequence(rng, n))
        gid = f"{id_prefix}{g:04d}"
        occupied = np.zeros(n, dtype=bool)
        placed = []
        for allele in alleles:
            for _ in range(epitopes_per_antigen):
                L = int(rng.integers(peptide_range[0], peptide_range[1] + 1))
                for _attempt in range(50):
                    s = int(rng.integers(0, n - L + 1))
                    if not occupied[max(s - 2, 0):s + L + 2].any():
                        break
                else:
                    continue
                occupied[s:s + L] = True
                off = int(rng.integers(0, L - 9 + 1))
                seq[s + off:s + off + 9] = motifs[allele]
                placed.append((allele, s, L, s + off))
        sequence = "".join(seq)
        antigens[gid] = Antigen(gid, sequence)
        for allele, s, L, core in placed:
            pep = sequence[s:s + L]
            records.append(AssayRecord(pep, allele, "EL", 1.0, 2015, gid, s, "synthetic"))
            cores[(pep, allele, gid)] = core
    return SyntheticCorpus(antigens, records, cores, motifs)
