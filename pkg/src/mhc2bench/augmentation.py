"""Antigen-aware augmentation: neighbor negatives, perturbed positives, windows."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from ._random import as_generator, substream
from .core import AssayRecord, Antigen, EpitopeAnnotation
from .exceptions import FewNegativesWarning, NoValidPerturbation, NoValidWindow, ValidationError
from .metrics.antigen import residue_labels

logger = logging.getLogger(__name__)

WINDOW_SIZES = (64, 128, 256, 512, 1024)
PERTURBATIONS = ("extend_left", "extend_right", "extend_both", "shift_left", "shift_right")


def forbidden_regions(positives: Iterable[EpitopeAnnotation]) -> list[tuple[int, int]]:
    """Spans a negative may not fully contain: each positive's core, or the
    whole positive span when it has no core."""
    out = {p.core if p.core is not None else p.span for p in positives}
    return sorted(out)


def eligible_negative_starts(antigen_length: int, length: int,
                             positives: Iterable[EpitopeAnnotation]) -> np.ndarray:
    """Starts of length-``length`` windows usable as negatives.

    A window is ineligible when it coincides with a known positive span or
    fully contains a forbidden region (see :func:`forbidden_regions`).
    """
    positives = list(positives)
    n = antigen_length - length + 1
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    ok = np.ones(n, dtype=bool)
    for p in positives:
        if p.end - p.start == length and p.start < n:
            ok[p.start] = False
    for a, b in forbidden_regions(positives):
        # [s, s + length) contains [a, b)  <=>  b - length <= s <= a
        lo, hi = max(b - length, 0), min(a, n - 1)
        if lo <= hi:
            ok[lo:hi + 1] = False
    return np.flatnonzero(ok)


def generate_negatives(anchor: AssayRecord, antigen: Antigen,
                       positives: Sequence[EpitopeAnnotation] = (), n: int = 4,
                       seed: int = 0, length_jitter: int = 0) -> list[AssayRecord]:
    """Sample up to ``n`` neighbor windows of ``antigen`` as negatives for ``anchor``.

    ``positives`` are the known positives of the anchor's allele on this
    antigen (with cores when available); the anchor itself is always
    treated as one. Windows keep the anchor length unless
    ``length_jitter`` > 0 widens the candidate lengths.
    """
    if anchor.antigen_id != antigen.id or not anchor.is_linked:
        raise ValidationError("anchor is not aligned to this antigen")
    positives = [p for p in positives if p.antigen_id == antigen.id and p.allele == anchor.allele]
    if not any(p.span == (anchor.start, anchor.end) for p in positives):
        positives.append(EpitopeAnnotation(antigen.id, anchor.allele, anchor.start, anchor.end))

    L = len(anchor.peptide)
    candidates = []
    for length in range(max(L - length_jitter, 1), L + length_jitter + 1):
        candidates.extend((int(s), length)
                          for s in eligible_negative_starts(len(antigen), length, positives))
    rng = substream(seed, antigen.id, anchor.start, anchor.allele, L)
    take = min(n, len(candidates))
    if take < n:
        warnings.warn(f"{anchor.peptide}@{antigen.id}:{anchor.start}: only {len(candidates)} "
                      f"eligible negatives", FewNegativesWarning, stacklevel=2)
    picks = sorted(candidates[i] for i in rng.choice(len(candidates), size=take, replace=False))
    return [AssayRecord(antigen.sequence[s:s + length], anchor.allele, "EL", 0.0, anchor.year,
                        antigen.id, s, "aug:neg")
            for s, length in picks]


def perturbation_space(start: int, end: int, antigen_length: int) -> list[str]:
    """Perturbations that keep the window inside the antigen."""
    left, right = start > 0, end < antigen_length
    allowed = {
        "extend_left": left,
        "extend_right": right,
        "extend_both": left and right,
        "shift_left": left,
        "shift_right": right,
    }
    return [op for op in PERTURBATIONS if allowed[op]]


def apply_perturbation(op: str, start: int, end: int) -> tuple[int, int]:
    return {
        "extend_left": (start - 1, end),
        "extend_right": (start, end + 1),
        "extend_both": (start - 1, end + 1),
        "shift_left": (start - 1, end - 1),
        "shift_right": (start + 1, end + 1),
    }[op]


def perturb_positive(anchor: AssayRecord, antigen: Antigen, rng=0) -> AssayRecord:
    """Extend by one residue at either or both ends, or shift by one.

    The transform is drawn uniformly from those that stay inside the
    antigen; the label is copied from ``anchor``.
    """
    if anchor.antigen_id != antigen.id or not anchor.is_linked:
        raise ValidationError("anchor is not aligned to this antigen")
    ops = perturbation_space(anchor.start, anchor.end, len(antigen))
    if not ops:
        raise NoValidPerturbation(f"{anchor.peptide} spans all of antigen {antigen.id!r}")
    op = ops[int(as_generator(rng).integers(len(ops)))]
    s, e = apply_perturbation(op, anchor.start, anchor.end)
    return replace(anchor, peptide=antigen.sequence[s:e], start=s, provenance=f"aug:pos:{op}")


@dataclass(frozen=True)
class AugmentationSet:
    anchor: AssayRecord
    positives: tuple = ()
    negatives: tuple = ()


def augment(records: Iterable[AssayRecord], antigens: Mapping[str, Antigen],
            annotations: Iterable[EpitopeAnnotation] = (), n_negatives: int = 4,
            n_positives: int = 2, seed: int = 0, length_jitter: int = 0) -> list[AugmentationSet]:
    """Build augmentation sets for every linked EL positive in ``records``."""
    by_key: dict[tuple, list[EpitopeAnnotation]] = {}
    for a in annotations:
        by_key.setdefault((a.antigen_id, a.allele), []).append(a)
    anchors = sorted({r for r in records
                      if r.assay == "EL" and r.label == 1.0 and r.is_linked and r.antigen_id in antigens},
                     key=lambda r: (r.antigen_id, r.allele, r.start, r.peptide))
    # positives without annotations still forbid their own span
    for r in anchors:
        group = by_key.setdefault((r.antigen_id, r.allele), [])
        if not any(a.span == (r.start, r.end) for a in group):
            group.append(EpitopeAnnotation(r.antigen_id, r.allele, r.start, r.end))

    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FewNegativesWarning)
        for r in anchors:
            antigen = antigens[r.antigen_id]
            negs = generate_negatives(r, antigen, by_key[(r.antigen_id, r.allele)],
                                      n_negatives, seed, length_jitter)
            if len(negs) < n_negatives:
                logger.warning("%s@%s:%d: %d of %d negatives", r.peptide, r.antigen_id,
                               r.start, len(negs), n_negatives)
            pos = []
            if perturbation_space(r.start, r.end, len(antigen)):
                rng = substream(seed, "pos", r.antigen_id, r.start, r.allele, len(r.peptide))
                seen = set()
                for _ in range(n_positives):
                    v = perturb_positive(r, antigen, rng)
                    if (v.start, v.end) not in seen:
                        seen.add((v.start, v.end))
                        pos.append(v)
            out.append(AugmentationSet(r, tuple(pos), tuple(negs)))
    return out


class TrainingItem(NamedTuple):
    record: AssayRecord
    positive: bool
    anchor: AssayRecord


def balanced_sampling_plan(sets: Sequence[AugmentationSet], seed: int = 0,
                           epochs: int = 1) -> Iterator[TrainingItem]:
    """Per anchor and epoch, emit a negative with probability 0.5, else a positive.

    Positive items come from the perturbed variants (the anchor itself when
    there are none). Anchors without negatives always emit positives.
    """
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for aug in sets:
            coin = rng.random() < 0.5
            if coin and aug.negatives:
                yield TrainingItem(aug.negatives[int(rng.integers(len(aug.negatives)))], False,
                                   aug.anchor)
            else:
                pool = aug.positives or (aug.anchor,)
                yield TrainingItem(pool[int(rng.integers(len(pool)))], True, aug.anchor)


# ---------------------------------------------------------------------------
# Antigen windows


@dataclass(frozen=True)
class AntigenWindow:
    antigen_id: str
    start: int
    end: int
    labels: tuple

    @property
    def positive(self) -> bool:
        return any(self.labels)

    @property
    def size(self) -> int:
        return self.end - self.start


def valid_window_starts(antigen_length: int, epitopes: Iterable[tuple], k: int) -> np.ndarray:
    """Starts ``s`` where ``[s, s + k)`` leaves every epitope whole or untouched.

    An antigen no longer than ``k`` admits only the whole-antigen window.
    """
    if antigen_length <= k:
        return np.zeros(1, dtype=np.int64)
    s = np.arange(antigen_length - k + 1)
    ok = np.ones(s.size, dtype=bool)
    for a, b in epitopes:
        overlaps = (s < b) & (s + k > a)
        contains = (s <= a) & (s + k >= b)
        ok &= ~overlaps | contains
    return s[ok]


def sample_antigen_windows(antigen: Antigen, epitopes: Sequence[tuple], n_draws: int = 1,
                           sizes: Sequence[int] = WINDOW_SIZES, seed: int = 0,
                           allele: str = "") -> list[AntigenWindow]:
    """Draw truncation windows that never cut through a known epitope.

    Each draw picks a size uniformly from ``sizes`` and then a valid start
    uniformly. Sizes without any valid placement are skipped for this
    antigen; NoValidWindow is raised only if no size works.
    """
    n = len(antigen)
    labels = residue_labels(n, epitopes)
    starts = {}
    for k in sorted(set(sizes)):
        v = valid_window_starts(n, epitopes, k)
        if v.size:
            starts[k] = v
        else:
            logger.debug("antigen %s: no valid window of size %d", antigen.id, k)
    if not starts:
        raise NoValidWindow(min(sizes), antigen.id)
    usable = sorted(starts)
    rng = substream(seed, "windows", antigen.id, allele)
    out = []
    for _ in range(n_draws):
        k = usable[int(rng.integers(len(usable)))]
        s = int(starts[k][int(rng.integers(starts[k].size))])
        e = min(s + k, n)
        out.append(AntigenWindow(antigen.id, s, e, tuple(int(x) for x in labels[s:e])))
    return out


def group_windows(windows: Iterable[AntigenWindow]) -> tuple[list, list]:
    """Split windows into (containing an epitope, epitope free)."""
    pos, neg = [], []
    for w in windows:
        (pos if w.positive else neg).append(w)
    return pos, neg


def balanced_window_draws(windows: Sequence[AntigenWindow], n: int, seed: int = 0
                          ) -> list[AntigenWindow]:
    """Draw ``n`` windows choosing the positive or negative group with probability 0.5."""
    pos, neg = group_windows(windows)
    if not pos and not neg:
        return []
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        group = pos if (rng.random() < 0.5 and pos) or not neg else neg
        out.append(group[int(rng.integers(len(group)))])
    return out
