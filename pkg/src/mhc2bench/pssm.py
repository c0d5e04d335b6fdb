"""Per-allele 9-mer PSSM baseline with an sklearn-compatible interface."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_peptide_allele_pairs
from .core import AMINO_ACIDS
from .exceptions import NoPositives, PeptideTooShort, UnknownAllele, ValidationError

FORMAT = "mhc2bench-pssm"
FORMAT_VERSION = 1

_AA_INDEX = {a: i for i, a in enumerate(AMINO_ACIDS)}
_CODE = np.full(128, -1, dtype=np.int64)
for _a, _i in _AA_INDEX.items():
    _CODE[ord(_a)] = _i


def encode(seq: str) -> np.ndarray:
    return _CODE[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


class PSSMPredictor(BaseEstimator):
    """Log-odds motif model, one ``k x 20`` matrix per allele.

    Counts come from annotated binding cores when given, otherwise from
    every k-mer of each positive peptide weighted by ``1 / n_windows``.
    Column frequencies get ``pseudocount`` added per residue and are scored
    against a uniform background. A peptide's raw score is its best k-mer;
    ``predict`` squashes it with a logistic shifted so the median training
    positive lands on ``median_target``.

    Parameters
    ----------
    k : int, default=9
    pseudocount : float, default=1.0
    median_target : float, default=0.7
    """

    def __init__(self, k: int = 9, pseudocount: float = 1.0, median_target: float = 0.7):
        self.k = k
        self.pseudocount = pseudocount
        self.median_target = median_target

    def fit(self, X, y=None, cores: Optional[Sequence[Optional[int]]] = None):
        """Fit on ``(peptide, allele)`` rows.

        When ``y`` is given only rows with ``y >= 0.5`` count as positives.
        ``cores`` optionally gives, per row, the core offset inside the
        peptide (or None).
        """
        if self.pseudocount <= 0:
            raise ValidationError("pseudocount must be positive")
        if not 0.0 < self.median_target < 1.0:
            raise ValidationError("median_target must lie in (0, 1)")
        pairs = check_peptide_allele_pairs(X)
        if y is not None:
            y = np.asarray(y, dtype=float)
            if y.shape != (len(pairs),):
                raise ValidationError(f"y has shape {y.shape}, expected ({len(pairs)},)")
        if cores is not None and len(cores) != len(pairs):
            raise ValidationError("cores must align with X")

        k = self.k
        counts: dict[str, np.ndarray] = defaultdict(lambda: np.zeros((k, 20)))
        positives: dict[str, list[str]] = defaultdict(list)
        for i, (pep, allele) in enumerate(pairs):
            if y is not None and y[i] < 0.5:
                continue
            core = None if cores is None else cores[i]
            if core is not None:
                if not 0 <= core <= len(pep) - k:
                    raise ValidationError(f"core offset {core} invalid for {pep}")
                windows, weight = [pep[core:core + k]], 1.0
            else:
                n = len(pep) - k + 1
                if n <= 0:
                    continue
                windows, weight = [pep[j:j + k] for j in range(n)], 1.0 / n
            c = counts[allele]
            for w in windows:
                c[np.arange(k), encode(w)] += weight
            positives[allele].append(pep)

        missing = sorted({a for _, a in pairs} - set(positives))
        if missing or not positives:
            raise NoPositives(f"no usable positives for allele(s) {', '.join(missing) or '-'}")

        self.matrices_ = {}
        for allele in sorted(positives):
            c = counts[allele]
            freq = (c + self.pseudocount) / (c.sum(axis=1, keepdims=True) + 20 * self.pseudocount)
            self.matrices_[allele] = np.log(freq * 20.0)
        self.offsets_ = {}
        for allele in sorted(positives):
            raw = [self._raw(p, allele) for p in positives[allele] if len(p) >= k]
            self.offsets_[allele] = float(np.median(raw)) - _logit(self.median_target)
        self.alleles_ = sorted(self.matrices_)
        return self

    def _matrix(self, allele: str) -> np.ndarray:
        try:
            return self.matrices_[allele]
        except KeyError:
            raise UnknownAllele(f"allele {allele!r} was not fitted") from None

    def kmer_scores(self, sequence: str, allele: str) -> np.ndarray:
        """Summed log-odds of every k-mer of ``sequence``."""
        M = self._matrix(allele)
        k = self.k
        if len(sequence) < k:
            return np.empty(0)
        idx = sliding_window_view(encode(sequence), k)
        return M[np.arange(k), idx].sum(axis=1)

    def _raw(self, peptide: str, allele: str) -> float:
        if len(peptide) < self.k:
            raise PeptideTooShort(f"peptide {peptide!r} shorter than {self.k}")
        return float(self.kmer_scores(peptide, allele).max())

    def _squash(self, raw, allele: str):
        return 1.0 / (1.0 + np.exp(-(np.asarray(raw) - self.offsets_[allele])))

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self)
        return np.array([self._raw(p, a) for p, a in check_peptide_allele_pairs(X)])

    def predict(self, X) -> np.ndarray:
        """Scores in [0, 1] for ``(peptide, allele)`` rows."""
        check_is_fitted(self)
        pairs = check_peptide_allele_pairs(X)
        return np.array([float(self._squash(self._raw(p, a), a)) for p, a in pairs])

    def score_windows(self, sequence: str, allele: str, length: int) -> np.ndarray:
        """Scores of every length-``length`` window of ``sequence``."""
        check_is_fitted(self)
        if length < self.k:
            raise PeptideTooShort(f"window length {length} shorter than {self.k}")
        km = self.kmer_scores(sequence, allele)
        width = length - self.k + 1
        if km.size < width:
            return np.empty(0)
        raw = sliding_window_view(km, width).max(axis=1)
        return self._squash(raw, allele)

    # serialization

    def to_dict(self) -> dict:
        check_is_fitted(self)
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "params": self.get_params(),
            "alphabet": AMINO_ACIDS,
            "alleles": {
                a: {"matrix": self.matrices_[a].tolist(), "offset": self.offsets_[a]}
                for a in self.alleles_
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PSSMPredictor":
        if doc.get("format") != FORMAT or doc.get("version") != FORMAT_VERSION:
            raise ValidationError(
                f"unsupported model document {doc.get('format')!r} v{doc.get('version')!r}")
        if doc.get("alphabet") != AMINO_ACIDS:
            raise ValidationError("model alphabet differs from this toolkit")
        model = cls(**doc["params"])
        model.matrices_ = {a: np.array(v["matrix"], dtype=float) for a, v in doc["alleles"].items()}
        model.offsets_ = {a: float(v["offset"]) for a, v in doc["alleles"].items()}
        model.alleles_ = sorted(model.matrices_)
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PSSMPredictor":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_pssm(peptides: Sequence[str], alleles: Sequence[str],
             cores: Optional[Sequence[Optional[int]]] = None,
             pseudocount: float = 1.0) -> PSSMPredictor:
    """Fit a :class:`PSSMPredictor` on positive peptides."""
    return PSSMPredictor(pseudocount=pseudocount).fit(list(zip(peptides, alleles)), cores=cores)


def score_peptide(model: PSSMPredictor, peptide: str, allele: str) -> float:
    return float(model.predict([(peptide, allele)])[0])
