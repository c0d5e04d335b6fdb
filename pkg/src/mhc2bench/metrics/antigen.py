"""Antigen-level coverage/redundancy evaluation and CR-AUC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from ..exceptions import LengthMismatch, NoCases, NoGroundTruth, ValidationError

Span = tuple  # (start, end), 0-based half-open


def residue_labels(antigen_length: int, epitopes: Iterable[Span]) -> np.ndarray:
    """Per-residue count of epitopes covering each position."""
    diff = np.zeros(antigen_length + 1, dtype=np.int64)
    for s, e in epitopes:
        if not 0 <= s < e <= antigen_length:
            raise ValidationError(f"epitope [{s}, {e}) outside antigen of length {antigen_length}")
        diff[s] += 1
        diff[e] -= 1
    return np.cumsum(diff[:-1])


def regions(mask) -> list[Span]:
    """Maximal runs of True in a boolean vector, as ``(start, end)`` spans."""
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return []
    padded = np.concatenate(([False], m, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def ground_truth_regions(labels) -> list[Span]:
    return regions(np.asarray(labels) > 0)


def predicted_regions(scores, threshold: float) -> list[Span]:
    """Runs of residues scoring strictly above ``threshold``."""
    return regions(np.asarray(scores, dtype=float) > threshold)


def sliding_window_scores(window_scores: Union[Sequence[float], Mapping[int, float]],
                          antigen_length: int, window_length: int = 9,
                          mode: str = "max") -> np.ndarray:
    """Spread window scores onto residues.

    ``window_scores`` is either a dense sequence holding one score per start
    (``antigen_length - window_length + 1`` entries) or a mapping from start
    to score where absent windows count as 0. Each residue receives the max
    (or mean, with ``mode="mean"``) over the windows covering it.
    """
    L = window_length
    n_windows = max(antigen_length - L + 1, 0)
    w = np.zeros(n_windows)
    if isinstance(window_scores, Mapping):
        for s, v in window_scores.items():
            if not 0 <= s < n_windows:
                raise LengthMismatch(f"window start {s} outside [0, {n_windows})")
            w[s] = v
    else:
        dense = np.asarray(window_scores, dtype=float)
        if dense.shape != (n_windows,):
            raise LengthMismatch(
                f"expected {n_windows} windows of length {L} for antigen length "
                f"{antigen_length}, got {dense.size}")
        w = dense
    out = np.zeros(antigen_length)
    if n_windows == 0:
        return out
    if mode == "max":
        for off in range(L):
            np.maximum(out[off:off + n_windows], w, out=out[off:off + n_windows])
    elif mode == "mean":
        counts = np.zeros(antigen_length)
        for off in range(L):
            out[off:off + n_windows] += w
            counts[off:off + n_windows] += 1
        out /= counts
    else:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    return out


def region_weights(labels, gt: Sequence[Span]) -> np.ndarray:
    """Normalized region weights: mean of ``log(1 + label)`` per region, summing to 1."""
    labels = np.asarray(labels, dtype=float)
    w = np.array([np.log1p(labels[s:e]).sum() / (e - s) for s, e in gt])
    return w / w.sum()


def _intersection_length(span: Span, pred: Sequence[Span]) -> int:
    s, e = span
    total = 0
    for ps, pe in pred:
        if pe <= s:
            continue
        if ps >= e:
            break
        total += min(e, pe) - max(s, ps)
    return total


def coverage(labels, pred: Sequence[Span]) -> float:
    """Weighted fraction of ground-truth residues inside predicted regions.

    Raises NoGroundTruth when every label is zero.
    """
    gt = ground_truth_regions(labels)
    if not gt:
        raise NoGroundTruth("antigen has no ground-truth region")
    weights = region_weights(labels, gt)
    pred = sorted(pred)
    ratios = np.array([_intersection_length(g, pred) / (g[1] - g[0]) for g in gt])
    return float(np.dot(weights, ratios))


def redundancy(pred: Sequence[Span], antigen_length: int) -> float:
    """Fraction of antigen residues inside predicted regions."""
    if antigen_length < 1:
        raise ValidationError("antigen length must be >= 1")
    return sum(e - s for s, e in pred) / antigen_length


@dataclass(frozen=True)
class CRCurve:
    redundancy: np.ndarray
    coverage: np.ndarray
    thresholds: np.ndarray
    cr_auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.redundancy.tolist(), self.coverage.tolist()))


def cr_curve(scores, labels, grid: Optional[Union[str, Sequence[float]]] = None) -> CRCurve:
    """Coverage-redundancy curve and its area.

    Thresholds default to every distinct residue score together with 0,
    visited from high to low; residues strictly above the threshold form the
    predicted regions. ``grid="fixed"`` uses 101 evenly spaced thresholds
    instead, or pass explicit thresholds. The curve starts at (0, 0) and is
    extended horizontally to redundancy 1 before trapezoidal integration.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n = scores.size
    if labels.shape != scores.shape:
        raise LengthMismatch(f"{scores.size} scores for {labels.size} labels")
    if n == 0:
        raise NoGroundTruth("empty antigen")
    if np.any(scores < 0) or np.any(scores > 1) or np.any(np.isnan(scores)):
        raise ValidationError("residue scores must lie in [0, 1]")
    gt = ground_truth_regions(labels)
    if not gt:
        raise NoGroundTruth("antigen has no ground-truth region")

    # per-residue contribution to coverage: w_i / |G_i| inside region i
    contrib = np.zeros(n)
    for w, (s, e) in zip(region_weights(labels, gt), gt):
        contrib[s:e] = w / (e - s)

    if grid is None:
        thresholds = np.unique(np.concatenate((scores, [0.0])))[::-1]
    elif isinstance(grid, str):
        if grid != "fixed":
            raise ValueError(f"unknown grid {grid!r}")
        thresholds = np.linspace(1.0, 0.0, 101)
    else:
        thresholds = np.sort(np.asarray(grid, dtype=float))[::-1]

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    cum_cov = np.concatenate(([0.0], np.cumsum(contrib[order])))
    # number of residues with score > t, for descending sorted scores
    passed = np.searchsorted(-sorted_scores, -thresholds, side="left")
    red = passed / n
    cov = np.minimum(cum_cov[passed], 1.0)

    red = np.concatenate(([0.0], red))
    cov = np.concatenate(([0.0], cov))
    thr = np.concatenate(([np.inf], thresholds))
    if red[-1] < 1.0:
        red = np.append(red, 1.0)
        cov = np.append(cov, cov[-1])
        thr = np.append(thr, -np.inf)
    keep = np.ones(red.size, dtype=bool)
    keep[1:] = (np.diff(red) != 0) | (np.diff(cov) != 0)
    red, cov, thr = red[keep], cov[keep], thr[keep]
    auc = float(np.trapezoid(cov, red))
    return CRCurve(red, cov, thr, min(max(auc, 0.0), 1.0))


class CaseResult(NamedTuple):
    key: tuple
    cr_auc: float


class AggregateResult(NamedTuple):
    cr_auc: float
    cases: list
    skipped: list


def cr_auc_aggregate(cases: Iterable[tuple]) -> AggregateResult:
    """Unweighted mean CR-AUC over ``(key, scores, labels)`` cases.

    Cases without ground truth are skipped and listed in ``skipped``.
    """
    results, skipped = [], []
    for key, scores, labels in cases:
        try:
            results.append(CaseResult(key, cr_curve(scores, labels).cr_auc))
        except NoGroundTruth:
            skipped.append(key)
    if not results:
        raise NoCases("no case with ground truth")
    return AggregateResult(float(np.mean([r.cr_auc for r in results])), results, skipped)
