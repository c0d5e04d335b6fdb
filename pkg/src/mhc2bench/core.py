"""Domain types shared by every stage: sequences, alleles, records, splits."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .exceptions import EmptySequence, InvalidResidue, UnparsableAllele, ValidationError

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
_AA_SET = frozenset(AMINO_ACIDS)

ASSAYS = ("BA", "EL")
LOCI = ("DR", "DP", "DQ")
CORE_LENGTH = 9


def validate_sequence(s: str) -> str:
    """Upper-case ``s`` and check it against the 20 canonical residues.

    Raises
    ------
    EmptySequence
        If ``s`` is empty.
    InvalidResidue
        For the first character outside ``ACDEFGHIKLMNPQRSTVWY``.
    """
    if not s:
        raise EmptySequence("sequence is empty")
    seq = s.upper()
    if not _AA_SET.issuperset(seq):
        for i, c in enumerate(seq):
            if c not in _AA_SET:
                raise InvalidResidue(i, c)
    return seq


def is_valid_sequence(s: str) -> bool:
    return bool(s) and _AA_SET.issuperset(s.upper())


# ---------------------------------------------------------------------------
# Alleles

_CHAIN_RE = re.compile(r"(DRA|DRB[1-9]|DPA1|DPB1|DQA1|DQB1)[*_]?(\d[\d:]*)")


@dataclass(frozen=True)
class AlleleId:
    locus: str
    name: str

    def __str__(self) -> str:
        return self.name


def _chain_digits(digits: str, raw: str) -> str:
    if ":" in digits:
        fields = [f for f in digits.split(":") if f]
        if len(fields) < 2:
            raise UnparsableAllele(f"allele {raw!r} lacks a two-field resolution")
        return "".join(f.zfill(2) for f in fields[:2])
    if len(digits) < 3:
        raise UnparsableAllele(f"allele {raw!r} lacks a two-field resolution")
    if len(digits) == 3:
        return digits.zfill(4)
    return digits[:4] if len(digits) in (6, 8) else digits


def normalize_allele(raw: str) -> AlleleId:
    """Map an MHC-II allele name onto its canonical token.

    DR alleles keep only the beta chain (``DRB1_0101``); DP and DQ alleles
    keep the alpha-beta pair (``DPA10103-DPB10201``). Prefixes, case, ``*``
    and ``:`` separators are ignored, so the mapping is idempotent.

    >>> normalize_allele("HLA-DRB1*01:01").name
    'DRB1_0101'
    >>> normalize_allele("HLA-DPA1*01:03/DPB1*02:01").name
    'DPA10103-DPB10201'
    """
    if not raw or not raw.strip():
        raise UnparsableAllele("empty allele name")
    s = raw.strip().upper().replace("HLA-", "").replace("HLA_", "")
    chains = []
    for tok in re.split(r"[/\-\s]+", s):
        if not tok:
            continue
        m = _CHAIN_RE.fullmatch(tok)
        if m is None:
            raise UnparsableAllele(f"cannot parse allele {raw!r}")
        chains.append((m.group(1), _chain_digits(m.group(2), raw)))
    if not chains:
        raise UnparsableAllele(f"cannot parse allele {raw!r}")

    loci = {gene[:2] for gene, _ in chains}
    if len(loci) != 1:
        raise UnparsableAllele(f"mixed loci in allele {raw!r}")
    locus = loci.pop()

    if locus == "DR":
        betas = [(g, d) for g, d in chains if g.startswith("DRB")]
        if len(betas) != 1:
            raise UnparsableAllele(f"DR allele {raw!r} needs exactly one beta chain")
        gene, digits = betas[0]
        return AlleleId("DR", f"{gene}_{digits}")

    alpha = [(g, d) for g, d in chains if g[2] == "A"]
    beta = [(g, d) for g, d in chains if g[2] == "B"]
    if len(alpha) != 1 or len(beta) != 1:
        raise UnparsableAllele(f"{locus} allele {raw!r} needs one alpha and one beta chain")
    (ga, da), (gb, db) = alpha[0], beta[0]
    return AlleleId(locus, f"{ga}{da}-{gb}{db}")


def allele_locus(name: str) -> str:
    """Locus (DR/DP/DQ) of a canonical allele token."""
    locus = name[:2]
    if locus not in LOCI:
        raise UnparsableAllele(f"not a canonical MHC-II allele: {name!r}")
    return locus


# ---------------------------------------------------------------------------
# Records


@dataclass(frozen=True)
class AssayRecord:
    """One peptide-allele measurement.

    ``label`` is the normalized affinity for BA and 0/1 for EL. ``start`` is
    the 0-based offset of the peptide in antigen ``antigen_id``.
    """

    peptide: str
    allele: str
    assay: str
    label: float
    year: Optional[int] = None
    antigen_id: Optional[str] = None
    start: Optional[int] = None
    provenance: str = ""

    def __post_init__(self):
        if not is_valid_sequence(self.peptide) or self.peptide != self.peptide.upper():
            validate_sequence(self.peptide)
            raise ValidationError(f"peptide must be upper-case: {self.peptide!r}")
        if self.assay not in ASSAYS:
            raise ValidationError(f"unknown assay {self.assay!r}")
        if not 0.0 <= self.label <= 1.0:
            raise ValidationError(f"label {self.label} outside [0, 1]")
        if self.assay == "EL" and self.label not in (0.0, 1.0):
            raise ValidationError(f"EL label must be 0 or 1, got {self.label}")
        if self.start is not None and self.start < 0:
            raise ValidationError(f"negative start {self.start}")

    @property
    def key(self) -> tuple:
        return (self.peptide, self.allele, self.assay)

    @property
    def end(self) -> Optional[int]:
        return None if self.start is None else self.start + len(self.peptide)

    @property
    def is_linked(self) -> bool:
        return self.antigen_id is not None and self.start is not None


@dataclass(frozen=True)
class Antigen:
    id: str
    sequence: str

    def __post_init__(self):
        if not self.id:
            raise ValidationError("antigen id is empty")
        object.__setattr__(self, "sequence", validate_sequence(self.sequence))

    def __len__(self):
        return len(self.sequence)


@dataclass(frozen=True)
class EpitopeAnnotation:
    """A positive span ``[start, end)`` with an optional 9-residue core."""

    antigen_id: str
    allele: str
    start: int
    end: int
    core_start: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"bad span [{self.start}, {self.end})")
        if self.core_start is not None:
            if not self.start <= self.core_start <= self.end - CORE_LENGTH:
                raise ValidationError(
                    f"core at {self.core_start} not inside span [{self.start}, {self.end})")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def core(self) -> Optional[tuple[int, int]]:
        if self.core_start is None:
            return None
        return (self.core_start, self.core_start + CORE_LENGTH)


def check_antigen_link(record: AssayRecord, antigens: Mapping[str, Antigen]) -> bool:
    """True if the record's peptide equals its claimed antigen substring."""
    if not record.is_linked:
        return False
    antigen = antigens.get(record.antigen_id)
    if antigen is None:
        return False
    return antigen.sequence[record.start:record.end] == record.peptide


def check_annotation(ann: EpitopeAnnotation, antigen: Antigen) -> None:
    if ann.antigen_id != antigen.id:
        raise ValidationError(f"annotation for {ann.antigen_id!r} checked against {antigen.id!r}")
    if ann.end > len(antigen):
        raise ValidationError(
            f"span [{ann.start}, {ann.end}) exceeds antigen {antigen.id!r} of length {len(antigen)}")


def annotations_from_records(records: Iterable[AssayRecord],
                             cores: Optional[Mapping[tuple, int]] = None) -> list[EpitopeAnnotation]:
    """Build epitope annotations from linked positive records.

    ``cores`` maps ``(peptide, allele, antigen_id)`` to an absolute core start.
    """
    cores = cores or {}
    seen = set()
    out = []
    for r in records:
        if not r.is_linked or r.label < 0.5:
            continue
        key = (r.antigen_id, r.allele, r.start, r.end)
        if key in seen:
            continue
        seen.add(key)
        out.append(EpitopeAnnotation(r.antigen_id, r.allele, r.start, r.end,
                                     cores.get((r.peptide, r.allele, r.antigen_id))))
    out.sort(key=lambda a: (a.antigen_id, a.allele, a.start, a.end))
    return out


@dataclass(frozen=True)
class DatasetSplit:
    """Train/validation/test partitions plus audit counters."""

    train: tuple = ()
    validation: tuple = ()
    test: tuple = ()
    audit: dict = field(default_factory=dict, compare=False)
    overlap_ratio: Optional[float] = None

    def check_disjoint(self) -> None:
        parts = {"train": self.train, "validation": self.validation, "test": self.test}
        keys = {name: {r.key for r in recs} for name, recs in parts.items()}
        for a, b in (("train", "validation"), ("train", "test"), ("validation", "test")):
            common = keys[a] & keys[b]
            if common:
                raise ValidationError(f"{a} and {b} share {len(common)} record keys")
