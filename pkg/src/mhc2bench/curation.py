"""Label normalization, deduplication, antigen alignment, clustering and splits."""

from __future__ import annotations

import logging
import math
import statistics
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from ._random import substream
from .core import AssayRecord, Antigen, DatasetSplit
from .exceptions import InsufficientStratumWarning, NonPositiveIC50, ValidationError
from .kmer import repair_split

logger = logging.getLogger(__name__)

IC50_MAX = 50000.0
BINDER_IC50 = 500.0


def normalize_ba(ic50_nM: float) -> float:
    """Map IC50 (nM) to ``1 - log(ic50) / log(50000)``, clamped to [0, 1]."""
    if not ic50_nM > 0:
        raise NonPositiveIC50(f"IC50 must be positive, got {ic50_nM}")
    if ic50_nM <= 1.0:
        return 1.0
    if ic50_nM >= IC50_MAX:
        return 0.0
    return 1.0 - math.log(ic50_nM) / math.log(IC50_MAX)


def ba_binder_threshold() -> float:
    """Normalized label of a 500 nM measurement; labels above it are binders."""
    return normalize_ba(BINDER_IC50)


# ---------------------------------------------------------------------------
# Raw BA ingestion


@dataclass(frozen=True)
class RawBAEntry:
    """A BA measurement before normalization.

    ``measurement`` is either a float (point IC50) or a string such as
    ``"250"``, ``">1000"`` or ``"<=50"``.
    """

    peptide: str
    allele: str
    measurement: Union[float, str]
    year: Optional[int] = None
    antigen_hint: Optional[str] = None

    @property
    def ic50(self) -> Optional[float]:
        """Point value in nM, or None for a qualitative bound."""
        m = self.measurement
        if isinstance(m, (int, float)):
            return float(m)
        m = m.strip()
        if m[:1] in "<>=~":
            return None
        try:
            return float(m)
        except ValueError:
            return None


def filter_ambiguous_ba(entries: Iterable[RawBAEntry]) -> list[RawBAEntry]:
    """Keep entries with a point IC50; drop qualitative bounds like ``>1000``."""
    kept, dropped = [], 0
    for e in entries:
        if e.ic50 is None:
            dropped += 1
        else:
            kept.append(e)
    logger.info("ambiguous BA filter: kept %d, dropped %d", len(kept), dropped)
    return kept


def ba_entries_to_records(entries: Iterable[RawBAEntry]) -> list[AssayRecord]:
    return [AssayRecord(e.peptide, e.allele, "BA", normalize_ba(e.ic50), e.year, e.antigen_hint)
            for e in entries]


# ---------------------------------------------------------------------------
# Deduplication


def _merge_metadata(group: Sequence[AssayRecord], label: float) -> AssayRecord:
    years = [r.year for r in group if r.year is not None]
    links = sorted((r.antigen_id, -1 if r.start is None else r.start)
                   for r in group if r.antigen_id is not None)
    antigen_id, start = (links[0] if links else (None, -1))
    prov = ",".join(sorted({r.provenance for r in group if r.provenance}))
    first = group[0]
    return AssayRecord(first.peptide, first.allele, first.assay, label,
                       min(years) if years else None, antigen_id,
                       None if start < 0 else start, prov)


def dedup_records(records: Iterable[AssayRecord]) -> list[AssayRecord]:
    """Collapse records sharing ``(peptide, allele, assay)``.

    BA duplicates become one record carrying the median label. EL duplicates
    are kept once when labels agree and dropped entirely when they conflict.
    Metadata merges order-independently (earliest year, smallest antigen
    link, union of provenance tags); output is sorted by key.
    """
    groups: dict[tuple, list[AssayRecord]] = defaultdict(list)
    for r in records:
        groups[r.key].append(r)
    out, conflicts = [], 0
    for key in sorted(groups):
        group = groups[key]
        if key[2] == "BA":
            label = float(statistics.median(sorted(r.label for r in group)))
        else:
            labels = {r.label for r in group}
            if len(labels) > 1:
                conflicts += 1
                continue
            label = labels.pop()
        out.append(group[0] if len(group) == 1 else _merge_metadata(group, label))
    if conflicts:
        logger.info("dedup removed %d conflicting EL keys", conflicts)
    return out


# ---------------------------------------------------------------------------
# Antigen alignment


class AlignmentResult(NamedTuple):
    records: list
    unaligned: list
    occurrences: dict


def _find_all(haystack: str, needle: str) -> list[int]:
    hits, i = [], haystack.find(needle)
    while i >= 0:
        hits.append(i)
        i = haystack.find(needle, i + 1)
    return hits


def align_antigens(records: Iterable[AssayRecord], antigens: Iterable[Antigen],
                   seed_k: int = 9) -> AlignmentResult:
    """Attach ``(antigen_id, start)`` to records whose peptide is an antigen substring.

    Primary hit resolution: the record's own antigen hint if it contains the
    peptide, else the unique containing antigen, else the longest containing
    antigen (ties by id); always the leftmost offset. ``occurrences`` maps
    each aligned peptide to every ``(antigen_id, start)`` hit.
    """
    antigens = sorted(antigens, key=lambda a: a.id)
    by_id = {a.id: a for a in antigens}
    seed_index: dict[str, set[str]] = defaultdict(set)
    for a in antigens:
        s = a.sequence
        for i in range(len(s) - seed_k + 1):
            seed_index[s[i:i + seed_k]].add(a.id)

    cache: dict[str, list[tuple[str, int]]] = {}

    def hits_for(peptide: str) -> list[tuple[str, int]]:
        if peptide in cache:
            return cache[peptide]
        if len(peptide) >= seed_k:
            cands = sorted(seed_index.get(peptide[:seed_k], ()))
        else:
            cands = [a.id for a in antigens]
        hits = [(aid, i) for aid in cands for i in _find_all(by_id[aid].sequence, peptide)]
        cache[peptide] = hits
        return hits

    out, unaligned, occurrences = [], [], {}
    for r in records:
        hits = hits_for(r.peptide)
        if not hits:
            unaligned.append(r)
            continue
        occurrences[r.peptide] = hits
        hinted = [h for h in hits if h[0] == r.antigen_id]
        if hinted:
            if r.start is not None and (r.antigen_id, r.start) in hinted:
                chosen = (r.antigen_id, r.start)
            else:
                chosen = hinted[0]
        else:
            containing = sorted({aid for aid, _ in hits},
                                key=lambda aid: (-len(by_id[aid]), aid))
            aid = containing[0]
            chosen = next(h for h in hits if h[0] == aid)
        out.append(replace(r, antigen_id=chosen[0], start=chosen[1]))
    return AlignmentResult(out, unaligned, occurrences)


# ---------------------------------------------------------------------------
# Greedy clustering


def ungapped_identity(a: str, b: str) -> float:
    """Best ungapped identity: matches over the shorter length, sliding the
    shorter sequence along the longer one without overhang."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    n = len(short)
    best = 0
    for off in range(len(long_) - n + 1):
        m = sum(1 for x, y in zip(short, long_[off:off + n]) if x == y)
        if m > best:
            best = m
            if best == n:
                break
    return best / n


@dataclass(frozen=True)
class ClusterAssignment:
    labels: dict
    representatives: list
    identity_threshold: float

    @property
    def n_clusters(self) -> int:
        return len(self.representatives)

    def members(self, cluster_id: int) -> list[str]:
        return sorted(p for p, c in self.labels.items() if c == cluster_id)


def cluster_peptides(peptides: Iterable[str], identity_threshold: float = 0.8) -> ClusterAssignment:
    """CD-HIT style greedy incremental clustering.

    Peptides are visited longest first (ties lexicographic); each joins the
    earliest representative it matches at ``identity_threshold`` or founds a
    new cluster.
    """
    if not 0.0 < identity_threshold <= 1.0:
        raise ValidationError(f"identity threshold must be in (0, 1], got {identity_threshold}")
    order = sorted(set(peptides), key=lambda p: (-len(p), p))
    reps: list[str] = []
    rep_comp: list[Counter] = []
    labels: dict[str, int] = {}
    for p in order:
        comp = Counter(p)
        need = identity_threshold * len(p)
        for cid, (rep, rc) in enumerate(zip(reps, rep_comp)):
            # composition overlap bounds the number of matched positions
            if sum((comp & rc).values()) < need - 1e-9:
                continue
            if ungapped_identity(p, rep) >= identity_threshold - 1e-12:
                labels[p] = cid
                break
        else:
            labels[p] = len(reps)
            reps.append(p)
            rep_comp.append(comp)
    return ClusterAssignment(labels, reps, identity_threshold)


# ---------------------------------------------------------------------------
# Split construction


def build_test_split(records: Iterable[AssayRecord], year_cutoff: int = 2020
                     ) -> tuple[list[AssayRecord], list[AssayRecord]]:
    """Return ``(train, test_candidates)``; candidates have ``year >= year_cutoff``.

    Records without a year stay in train.
    """
    train, test = [], []
    for r in records:
        (test if r.year is not None and r.year >= year_cutoff else train).append(r)
    return train, test


def _move(train: list, test: list, predicate) -> tuple[list, list, int]:
    keep, moved = [], 0
    for r in test:
        if predicate(r):
            train.append(r)
            moved += 1
        else:
            keep.append(r)
    return train, keep, moved


def apply_split_repairs(ba: DatasetSplit, el: DatasetSplit, k: int = 9,
                        strict_cross_task: bool = False) -> tuple[DatasetSplit, DatasetSplit]:
    """Repair candidate BA/EL splits so the test sets are leakage free.

    Rules, applied in order and repeated until a full round moves nothing:

    1. a test peptide present in the *other* task's train set moves to train;
    2. a test record without an antigen link moves to train;
    3. k-mer repair within the task (across tasks too when
       ``strict_cross_task``).

    Each returned split's ``audit`` counts moved records per rule plus the
    number of productive k-mer passes.
    """
    tasks = {"BA": ba, "EL": el}
    train = {t: list(s.train) for t, s in tasks.items()}
    test = {t: list(s.test) for t, s in tasks.items()}
    audit = {t: {"cross_task": 0, "no_antigen": 0, "kmer": 0, "kmer_iterations": 0, "rounds": 0}
             for t in tasks}

    while True:
        round_moves = 0
        for t, other in (("BA", "EL"), ("EL", "BA")):
            other_train = {r.peptide for r in train[other]}
            train[t], test[t], n = _move(train[t], test[t], lambda r: r.peptide in other_train)
            audit[t]["cross_task"] += n
            round_moves += n
        for t in tasks:
            train[t], test[t], n = _move(train[t], test[t], lambda r: not r.is_linked)
            audit[t]["no_antigen"] += n
            round_moves += n
        for t, other in (("BA", "EL"), ("EL", "BA")):
            extra = {r.peptide for r in train[other]} if strict_cross_task else ()
            res = repair_split(train[t], test[t], k, extra_train_peptides=extra)
            train[t], test[t] = res.train, res.test
            audit[t]["kmer"] += res.moved
            audit[t]["kmer_iterations"] += res.iterations
            round_moves += res.moved
        for t in tasks:
            audit[t]["rounds"] += 1
        if round_moves == 0:
            break

    return tuple(
        DatasetSplit(tuple(train[t]), tasks[t].validation, tuple(test[t]),
                     {**tasks[t].audit, **audit[t]}, tasks[t].overlap_ratio)
        for t in ("BA", "EL"))


def peptide_overlap_ratio(validation: Iterable[AssayRecord], train: Iterable[AssayRecord]) -> float:
    """Fraction of validation records whose peptide also occurs in train."""
    train_peps = {r.peptide for r in train}
    val = list(validation)
    if not val:
        return 0.0
    return sum(r.peptide in train_peps for r in val) / len(val)


def _largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    w = np.asarray(weights, dtype=float)
    if total <= 0 or w.sum() == 0:
        return [0] * len(w)
    exact = w / w.sum() * total
    base = np.floor(exact).astype(int)
    rem = total - base.sum()
    order = sorted(range(len(w)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rem]:
        base[i] += 1
    return base.tolist()


def sample_validation(train: Sequence[AssayRecord], target_fraction: float = 0.05,
                      overlap_ratio: float = 0.25, seed: int = 0
                      ) -> tuple[list[AssayRecord], list[AssayRecord]]:
    """Draw an allele-stratified validation set out of ``train``.

    Each allele stratum contributes ``round(target_fraction * size)``
    records. Of the whole validation set, ``round(overlap_ratio * n)``
    records are drawn from peptides that keep at least one record in train
    (overlapping) and the rest from peptides with a single train record,
    which leave train entirely. Strata are processed in allele order with a
    per-allele random substream, so the result depends only on the input
    and ``seed``.
    """
    if not 0.0 <= target_fraction < 1.0:
        raise ValidationError(f"target_fraction must be in [0, 1), got {target_fraction}")
    if not 0.0 <= overlap_ratio <= 1.0:
        raise ValidationError(f"overlap_ratio must be in [0, 1], got {overlap_ratio}")
    train = list(train)
    strata: dict[str, list[int]] = defaultdict(list)
    for i, r in enumerate(train):
        strata[r.allele].append(i)
    alleles = sorted(strata)

    quotas = {}
    for a in alleles:
        q = int(round(len(strata[a]) * target_fraction))
        if q == 0 and target_fraction > 0:
            warnings.warn(f"allele {a} ({len(strata[a])} records) too small to stratify",
                          InsufficientStratumWarning, stacklevel=2)
        quotas[a] = q
    n_val = sum(quotas.values())
    over_alloc = dict(zip(alleles, _largest_remainder(int(round(overlap_ratio * n_val)),
                                                      [quotas[a] for a in alleles])))

    pep_count = Counter(r.peptide for r in train)
    remaining = dict(pep_count)
    chosen: list[int] = []
    for a in alleles:
        rng = substream(seed, a)
        idx = strata[a]
        perm = [idx[j] for j in rng.permutation(len(idx))]
        want_over = min(over_alloc[a], quotas[a])
        want_non = quotas[a] - want_over
        picked_over, picked_non = [], []
        for i in perm:
            p = train[i].peptide
            if pep_count[p] == 1:
                if len(picked_non) < want_non:
                    picked_non.append(i)
                    remaining[p] -= 1
            elif len(picked_over) < want_over and remaining[p] > 1:
                picked_over.append(i)
                remaining[p] -= 1
            if len(picked_over) == want_over and len(picked_non) == want_non:
                break
        if len(picked_over) + len(picked_non) < quotas[a]:
            logger.warning("allele %s: only %d of %d validation records available",
                           a, len(picked_over) + len(picked_non), quotas[a])
        chosen.extend(picked_over)
        chosen.extend(picked_non)

    chosen_set = set(chosen)
    validation = [train[i] for i in sorted(chosen_set)]
    new_train = [r for i, r in enumerate(train) if i not in chosen_set]
    return new_train, validation


def sample_cluster_validation(train: Sequence[AssayRecord], clusters: ClusterAssignment,
                              target_fraction: float = 0.05, k: int = 9, seed: int = 0
                              ) -> tuple[list[AssayRecord], list[AssayRecord]]:
    """Validation from whole randomly chosen peptide clusters.

    Clusters are drawn until ``target_fraction`` of records is reached;
    validation records lacking an antigen link or sharing a k-mer with the
    remaining train set are then returned to train.
    """
    train = list(train)
    target = int(round(target_fraction * len(train)))
    by_cluster: dict[int, list[int]] = defaultdict(list)
    for i, r in enumerate(train):
        by_cluster[clusters.labels[r.peptide]].append(i)
    cids = sorted(by_cluster)
    rng = substream(seed, "clusters")
    picked: set[int] = set()
    for j in rng.permutation(len(cids)):
        if len(picked) >= target:
            break
        picked.update(by_cluster[cids[j]])
    val = [train[i] for i in sorted(picked)]
    rest = [r for i, r in enumerate(train) if i not in picked]
    rest, val, _ = _move(rest, val, lambda r: not r.is_linked)
    res = repair_split(rest, val, k)
    return res.train, res.test


# ---------------------------------------------------------------------------
# Neighbor statistic


def neighbor_positive_rate(positives: Iterable[AssayRecord], distance: int = 15) -> Optional[float]:
    """Fraction of positive pairs (same antigen and allele) starting < ``distance`` apart.

    Returns None when there are no pairs.
    """
    groups: dict[tuple, list[int]] = defaultdict(list)
    for r in positives:
        if r.is_linked:
            groups[(r.antigen_id, r.allele)].append(r.start)
    total = close = 0
    for starts in groups.values():
        starts.sort()
        n = len(starts)
        total += n * (n - 1) // 2
        lo = 0
        for hi in range(n):
            while starts[hi] - starts[lo] >= distance:
                lo += 1
            close += hi - lo
    if total == 0:
        return None
    return close / total
