"""Task-level evaluation: join records with predictions and compute metric blocks.

Every ``evaluate_*`` function returns a JSON-ready dict with an ``overall``
block, ``per_allele`` and ``per_locus`` breakdowns and bookkeeping counts.
Per-case work runs on an optional thread pool; results are folded in key
order so the output does not depend on the number of workers.
"""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import AssayRecord, Antigen, allele_locus
from .curation import ba_binder_threshold
from .exceptions import DegenerateMetricError, NoCases
from .io import Predictions
from .metrics.antigen import cr_curve, residue_labels, sliding_window_scores
from .metrics.peptide import (EpitopeEvalCase, accuracy, auc_epitope, el_filter_mixmhc2, frank,
                              rmse, roc_auc)


def _pmap(fn: Callable, items: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _safe(metric: Callable, *args) -> Optional[float]:
    try:
        return metric(*args)
    except DegenerateMetricError:
        return None


def _grouped(keys: Sequence[str]) -> dict[str, dict[str, list[int]]]:
    groups = {"per_allele": defaultdict(list), "per_locus": defaultdict(list)}
    for i, allele in enumerate(keys):
        groups["per_allele"][allele].append(i)
        groups["per_locus"][allele_locus(allele)].append(i)
    return groups


def _breakdown(alleles: Sequence[str], block: Callable[[list[int]], dict]) -> dict:
    out = {"overall": block(list(range(len(alleles))))}
    for name, groups in _grouped(alleles).items():
        out[name] = {k: block(idx) for k, idx in sorted(groups.items())}
    return out


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


# ---------------------------------------------------------------------------
# peptide level


def _join(records: Iterable[AssayRecord], preds: Predictions):
    rows, missing = [], 0
    for r in records:
        s = preds.peptide_score(r)
        if s is None:
            missing += 1
        else:
            rows.append((r, s))
    return rows, missing


def evaluate_ba(records: Iterable[AssayRecord], preds: Predictions) -> dict:
    """RMSE against normalized labels and ROC-AUC at the 500 nM binder level."""
    rows, missing = _join((r for r in records if r.assay == "BA"), preds)
    alleles = [r.allele for r, _ in rows]
    y = np.array([r.label for r, _ in rows])
    s = np.array([v for _, v in rows])
    thr = ba_binder_threshold()

    def block(idx):
        return {"n": len(idx), "rmse": _safe(rmse, y[idx], s[idx]),
                "roc_auc": _safe(roc_auc, y[idx] > thr, s[idx])}

    return {"task": "ba", "missing_predictions": missing, "binder_threshold": thr,
            **_breakdown(alleles, block)}


def evaluate_el(records: Iterable[AssayRecord], preds: Predictions, threshold: float = 0.5,
                mixmhc2_filter: bool = False) -> dict:
    """Accuracy (success rate) of EL predictions at ``threshold``."""
    records = [r for r in records if r.assay == "EL"]
    filt = None
    if mixmhc2_filter:
        records, filt = el_filter_mixmhc2(records)
    rows, missing = _join(records, preds)
    alleles = [r.allele for r, _ in rows]
    y = np.array([r.label for r, _ in rows])
    s = np.array([v for _, v in rows])

    def block(idx):
        out = {"n": len(idx), "accuracy": _safe(accuracy, y[idx], s[idx], threshold)}
        if len(idx) and 0 < y[idx].sum() < len(idx):
            out["roc_auc"] = _safe(roc_auc, y[idx], s[idx])
        return out

    doc = {"task": "el", "missing_predictions": missing, "threshold": threshold,
           **_breakdown(alleles, block)}
    if filt is not None:
        doc["mixmhc2_filter"] = filt
    return doc


# ---------------------------------------------------------------------------
# epitope level


def _is_positive(r: AssayRecord) -> bool:
    if r.assay == "BA":
        return r.label > ba_binder_threshold()
    return r.label == 1.0


def epitope_cases(records: Iterable[AssayRecord], antigens: Mapping[str, Antigen],
                  preds: Predictions) -> tuple[list[EpitopeEvalCase], dict]:
    """One case per distinct linked positive; absent windows score 0.

    Cases whose ``(antigen, allele, length)`` has no prediction at all are
    skipped and counted.
    """
    positives = sorted({(r.antigen_id, r.allele, r.start, len(r.peptide))
                        for r in records if r.is_linked and _is_positive(r)
                        and r.antigen_id in antigens})
    starts_by_key = defaultdict(set)
    for g, a, s, n in positives:
        starts_by_key[(g, a, n)].add(s)
    cases, counts = [], {"no_predictions": 0, "missing_windows": 0, "too_short": 0}
    for g, a, s, n in positives:
        windows = preds.windows.get((g, a, n))
        if not windows:
            counts["no_predictions"] += 1
            continue
        n_windows = len(antigens[g]) - n + 1
        if n_windows < 2:
            counts["too_short"] += 1
            continue
        scores = np.zeros(n_windows)
        present = [x for x in windows if 0 <= x < n_windows]
        scores[present] = [windows[x] for x in present]
        counts["missing_windows"] += n_windows - len(present)
        cases.append(EpitopeEvalCase.from_scores(g, a, s, n, scores, starts_by_key[(g, a, n)]))
    return cases, counts


def evaluate_epitope(records: Iterable[AssayRecord], antigens: Mapping[str, Antigen],
                     preds: Predictions, exclude_other_epitopes: bool = False,
                     workers: int = 1) -> dict:
    """Mean FRANK and AUC_epitope; AUC is reported with and without other
    known epitopes counted as negatives."""
    cases, counts = epitope_cases(records, antigens, preds)

    def one(case):
        return (_safe(frank, case), _safe(auc_epitope, case, False),
                _safe(auc_epitope, case, True))

    values = _pmap(one, cases, workers)
    primary = 2 if exclude_other_epitopes else 1

    def block(idx):
        return {"n": len(idx),
                "frank": _mean(values[i][0] for i in idx),
                "auc_epitope": _mean(values[i][primary] for i in idx),
                "auc_epitope_all_negatives": _mean(values[i][1] for i in idx),
                "auc_epitope_exclude_known": _mean(values[i][2] for i in idx)}

    return {"task": "epitope", "exclude_other_epitopes": exclude_other_epitopes, **counts,
            **_breakdown([c.allele for c in cases], block)}


# ---------------------------------------------------------------------------
# antigen level


def antigen_cases(records: Iterable[AssayRecord], antigens: Mapping[str, Antigen],
                  preds: Predictions, window_length: int = 9, aggregation: str = "max"
                  ) -> tuple[list[tuple], dict]:
    """``((antigen_id, allele), scores, labels)`` per antigen-allele pair with positives.

    Residue tracks are used when supplied; otherwise window scores of
    ``window_length`` are spread onto residues.
    """
    spans = defaultdict(set)
    for r in records:
        if r.is_linked and _is_positive(r) and r.antigen_id in antigens:
            spans[(r.antigen_id, r.allele)].add((r.start, r.end))
    cases, counts = [], {"no_predictions": 0}
    for key in sorted(spans):
        g, a = key
        n = len(antigens[g])
        labels = residue_labels(n, sorted(spans[key]))
        if key in preds.residues:
            scores = np.zeros(n)
            for pos, v in preds.residues[key].items():
                if 0 <= pos < n:
                    scores[pos] = v
        elif (g, a, window_length) in preds.windows:
            w = {s: v for s, v in preds.windows[(g, a, window_length)].items()
                 if 0 <= s <= n - window_length}
            scores = sliding_window_scores(w, n, window_length, aggregation)
        else:
            counts["no_predictions"] += 1
            continue
        cases.append((key, scores, labels))
    return cases, counts


def evaluate_antigen(records: Iterable[AssayRecord], antigens: Mapping[str, Antigen],
                     preds: Predictions, window_length: int = 9, aggregation: str = "max",
                     grid: Optional[str] = None, workers: int = 1,
                     curves: Optional[list] = None) -> dict:
    """Mean CR-AUC over antigen-allele pairs plus the per-case table.

    When ``curves`` is a list, curve points are appended to it as
    ``(antigen_id, allele, threshold, redundancy, coverage)`` rows.
    """
    cases, counts = antigen_cases(records, antigens, preds, window_length, aggregation)
    if not cases:
        raise NoCases("no antigen-allele pair has both ground truth and predictions")
    results = _pmap(lambda c: cr_curve(c[1], c[2], None if grid in (None, "exact") else grid),
                    cases, workers)
    if curves is not None:
        for (key, _, _), cv in zip(cases, results):
            curves.extend((key[0], key[1], float(t), float(r), float(c))
                          for t, r, c in zip(cv.thresholds, cv.redundancy, cv.coverage))
    aucs = [cv.cr_auc for cv in results]

    def block(idx):
        return {"n": len(idx), "cr_auc": _mean(aucs[i] for i in idx)}

    doc = {"task": "antigen", "window_length": window_length, "aggregation": aggregation, **counts,
           **_breakdown([c[0][1] for c in cases], block)}
    doc["cases"] = [{"antigen_id": c[0][0], "allele": c[0][1], "cr_auc": a,
                     "length": int(c[1].size), "n_regions": _n_regions(c[2])}
                    for c, a in zip(cases, aucs)]
    return doc


def _n_regions(labels) -> int:
    m = np.asarray(labels) > 0
    return int(np.count_nonzero(m[1:] & ~m[:-1]) + int(m[0]))
