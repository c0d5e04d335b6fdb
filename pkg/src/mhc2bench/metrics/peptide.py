"""Peptide-level and epitope-level metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from ..curation import ba_binder_threshold
from ..exceptions import DegenerateClasses, EmptyInput, NoCandidates, ValidationError


def _pair_arrays(y_true, y_score) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=float)
    y_score = np.asarray(y_score, dtype=float)
    if y_true.shape != y_score.shape or y_true.ndim != 1:
        raise ValidationError(f"shape mismatch: {y_true.shape} vs {y_score.shape}")
    if y_true.size == 0:
        raise EmptyInput("no pairs")
    return y_true, y_score


def rmse(y_true, y_score) -> float:
    y_true, y_score = _pair_arrays(y_true, y_score)
    return float(np.sqrt(np.mean((y_score - y_true) ** 2)))


def roc_auc(y_true, y_score) -> float:
    """Mann-Whitney ROC-AUC with average ranks for ties.

    ``y_true`` is interpreted as boolean. Equals
    ``(#{pos > neg} + 0.5 * #{pos == neg}) / (P * N)``.
    """
    y_true, y_score = _pair_arrays(y_true, y_score)
    pos = y_true.astype(bool)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClasses(f"need both classes, got {n_pos} positives and {n_neg} negatives")
    ranks = rankdata(y_score, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ba_roc_auc(labels, y_score) -> float:
    """ROC-AUC after calling normalized BA labels above the 500 nM level binders."""
    labels = np.asarray(labels, dtype=float)
    return roc_auc(labels > ba_binder_threshold(), y_score)


def accuracy(y_true, y_score, threshold: float = 0.5) -> float:
    """Fraction of pairs where ``score > threshold`` agrees with ``label == 1``."""
    y_true, y_score = _pair_arrays(y_true, y_score)
    return float(np.mean((y_score > threshold) == (y_true == 1)))


@dataclass(frozen=True)
class EpitopeEvalCase:
    """One epitope and the scores of every same-length window of its antigen.

    ``scores[s]`` belongs to the window starting at ``s``; ``other_epitopes``
    holds starts of further known positives of this length.
    """

    antigen_id: str
    allele: str
    epitope_start: int
    length: int
    scores: np.ndarray
    other_epitopes: tuple = ()

    @classmethod
    def from_scores(cls, antigen_id, allele, epitope_start, length, scores, other_epitopes=()):
        scores = np.asarray(scores, dtype=float)
        if scores.size == 0:
            raise NoCandidates(f"antigen {antigen_id!r} shorter than epitope length {length}")
        if not 0 <= epitope_start < scores.size:
            raise ValidationError(f"epitope start {epitope_start} outside {scores.size} windows")
        others = tuple(sorted({int(s) for s in other_epitopes} - {epitope_start}))
        return cls(antigen_id, allele, epitope_start, length, scores, others)

    @property
    def epitope_score(self) -> float:
        return float(self.scores[self.epitope_start])

    def negatives(self, exclude_others: bool) -> np.ndarray:
        mask = np.ones(self.scores.size, dtype=bool)
        mask[self.epitope_start] = False
        if exclude_others and self.other_epitopes:
            mask[list(self.other_epitopes)] = False
        return self.scores[mask]


def frank(case: EpitopeEvalCase, exclude_others: bool = True) -> float:
    """Fraction of non-epitope windows scoring strictly above the epitope."""
    neg = case.negatives(exclude_others)
    if neg.size == 0:
        raise NoCandidates(f"no competing windows in antigen {case.antigen_id!r}")
    return float(np.count_nonzero(neg > case.epitope_score) / neg.size)


def auc_epitope(case: EpitopeEvalCase, exclude_others: bool = False) -> float:
    """ROC-AUC with the epitope as the single positive.

    By default every other window is a negative, other known epitopes
    included; ``exclude_others=True`` drops them from the negatives.
    """
    neg = case.negatives(exclude_others)
    if neg.size == 0:
        raise DegenerateClasses(f"no negative windows in antigen {case.antigen_id!r}")
    y_score = np.concatenate(([case.epitope_score], neg))
    y_true = np.zeros(y_score.size)
    y_true[0] = 1
    return roc_auc(y_true, y_score)


def el_filter_mixmhc2(records: Iterable, min_length: int = 12, max_length: int = 21
                      ) -> tuple[list, dict]:
    """Keep EL records whose peptide length lies in ``[min_length, max_length]``."""
    kept, dropped = [], 0
    for r in records:
        if r.assay == "EL" and min_length <= len(r.peptide) <= max_length:
            kept.append(r)
        else:
            dropped += 1
    return kept, {"kept": len(kept), "dropped": dropped}
