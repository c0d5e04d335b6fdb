"""Exact k-mer indexing and train/test leakage repair."""

from __future__ import annotations

import logging
import warnings
from typing import Iterable, NamedTuple, Sequence

from .core import AssayRecord
from .exceptions import EmptyTestWarning

logger = logging.getLogger(__name__)


def kmers(seq: str, k: int) -> set[str]:
    """All length-``k`` substrings of ``seq`` (empty if ``seq`` is shorter)."""
    return {seq[i:i + k] for i in range(len(seq) - k + 1)}


class KmerIndex:
    """Hash set of every length-``k`` window of a peptide collection."""

    def __init__(self, k: int = 9):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self._members: set[str] = set()

    def add(self, peptide: str) -> None:
        k = self.k
        self._members.update(peptide[i:i + k] for i in range(len(peptide) - k + 1))

    def update(self, peptides: Iterable[str]) -> None:
        for p in peptides:
            self.add(p)

    def __contains__(self, kmer: str) -> bool:
        return len(kmer) == self.k and kmer in self._members

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self):
        return iter(sorted(self._members))

    def shares_kmer(self, peptide: str) -> bool:
        k, members = self.k, self._members
        return any(peptide[i:i + k] in members for i in range(len(peptide) - k + 1))


def build_index(peptides: Iterable[str], k: int = 9) -> KmerIndex:
    idx = KmerIndex(k)
    idx.update(peptides)
    return idx


def shares_kmer(peptide: str, idx: KmerIndex) -> bool:
    return idx.shares_kmer(peptide)


class RepairResult(NamedTuple):
    train: list
    test: list
    moved: int
    iterations: int


def repair_split(train: Sequence[AssayRecord], test: Sequence[AssayRecord], k: int = 9,
                 extra_train_peptides: Iterable[str] = ()) -> RepairResult:
    """Move test peptides that share a k-mer with train until none remain.

    Each pass checks every remaining test peptide against the index of the
    current train set, then moves all records of the offending peptides at
    once. Passes repeat until one moves nothing. ``extra_train_peptides``
    are indexed too but never receive records (cross-task strict mode).

    Returns ``(train', test', moved_records, iterations)`` where
    ``iterations`` counts passes that moved at least one peptide.
    """
    train = list(train)
    idx = build_index({r.peptide for r in train}, k)
    idx.update(set(extra_train_peptides))

    by_peptide: dict[str, list[AssayRecord]] = {}
    for r in test:
        by_peptide.setdefault(r.peptide, []).append(r)
    remaining = sorted(by_peptide)

    moved_peptides: set[str] = set()
    iterations = 0
    while True:
        offending = [p for p in remaining if idx.shares_kmer(p)]
        if not offending:
            break
        iterations += 1
        for p in offending:
            moved_peptides.add(p)
            idx.add(p)
        off = set(offending)
        remaining = [p for p in remaining if p not in off]
        logger.debug("kmer repair pass %d moved %d peptides", iterations, len(offending))

    new_test, moved = [], 0
    for r in test:
        if r.peptide in moved_peptides:
            train.append(r)
            moved += 1
        else:
            new_test.append(r)
    if test and not new_test:
        warnings.warn("k-mer repair emptied the test set", EmptyTestWarning, stacklevel=2)
    return RepairResult(train, new_test, moved, iterations)


class LeakageReport(NamedTuple):
    count: int
    pairs: list


def leakage_report(train: Iterable, test: Iterable, k: int = 9, max_pairs: int = 20) -> LeakageReport:
    """Count distinct test peptides sharing a k-mer with any train peptide.

    Accepts records or bare peptide strings. ``pairs`` holds up to
    ``max_pairs`` ``(test_peptide, train_peptide, kmer)`` examples.
    """
    train_peps = sorted({getattr(r, "peptide", r) for r in train})
    test_peps = sorted({getattr(r, "peptide", r) for r in test})
    owner: dict[str, str] = {}
    for p in train_peps:
        for i in range(len(p) - k + 1):
            owner.setdefault(p[i:i + k], p)
    count, pairs = 0, []
    for p in test_peps:
        for i in range(len(p) - k + 1):
            m = p[i:i + k]
            if m in owner:
                count += 1
                if len(pairs) < max_pairs:
                    pairs.append((p, owner[m], m))
                break
    return LeakageReport(count, pairs)
