import random

import numpy as np
import pytest

from mhc2bench.exceptions import DegenerateClasses, EmptyInput, NoCandidates
from mhc2bench.metrics.peptide import (EpitopeEvalCase, accuracy, auc_epitope, ba_roc_auc,
                                       el_filter_mixmhc2, frank, rmse, roc_auc)

from conftest import el


def pairwise_auc(pos, neg):
    """Oracle: count ordered pairs, ties worth one half."""
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_rmse_examples():
    assert rmse([0.1, 0.5], [0.1, 0.5]) == 0.0
    y = np.array([0.1, 0.4, 0.8])
    assert rmse(y, y + 0.1) == pytest.approx(0.1, abs=1e-12)
    rng = random.Random(1)
    a = [rng.random() for _ in range(5)]
    b = [rng.random() for _ in range(5)]
    direct = (sum((x - z) ** 2 for x, z in zip(a, b)) / 5) ** 0.5
    assert abs(rmse(a, b) - direct) < 1e-12
    with pytest.raises(EmptyInput):
        rmse([], [])


def test_roc_auc_examples():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert roc_auc([1, 1, 0, 0], [0.1, 0.2, 0.8, 0.9]) == 0.0
    assert roc_auc([0, 1], [0.5, 0.5]) == 0.5
    with pytest.raises(DegenerateClasses):
        roc_auc([1, 1], [0.1, 0.2])


def test_roc_auc_pairwise_with_ties():
    rng = random.Random(5)
    for _ in range(200):
        n = rng.randint(2, 200)
        y = [rng.random() < 0.3 for _ in range(n)]
        y[0], y[1] = True, False
        s = [rng.randint(0, 10) / 10 for _ in range(n)]
        pos = [v for v, t in zip(s, y) if t]
        neg = [v for v, t in zip(s, y) if not t]
        assert roc_auc(y, s) == pairwise_auc(pos, neg)


def test_ba_roc_auc_threshold():
    # 0.42 is a non-binder, 0.43 a binder at the 500 nM level
    assert ba_roc_auc([0.42, 0.43], [0.1, 0.9]) == 1.0


def test_accuracy():
    assert accuracy([1, 0, 1, 0], [0.9, 0.1, 0.4, 0.6]) == 0.5
    assert accuracy([1], [0.5]) == 0.0


def _case(scores, start=0, others=()):
    return EpitopeEvalCase.from_scores("g", "DRB1_0101", start, 9, scores, others)


def test_frank_examples():
    assert frank(_case([0.9, 0.1, 0.2])) == 0.0
    assert frank(_case([0.0, 0.1, 0.2], 0)) == 1.0
    # length 20, epitope length 12: 9 windows, 8 others, 2 above
    scores = [0.5, 0.9, 0.8, 0.1, 0.2, 0.3, 0.4, 0.5, 0.0]
    assert frank(EpitopeEvalCase.from_scores("g", "a", 0, 12, scores)) == 0.25


def test_frank_ties_and_exclusion():
    c = _case([0.5, 0.5, 0.9, 0.1], 0, others=[2])
    assert frank(c) == 0.0  # tie does not count, other epitope excluded
    assert frank(c, exclude_others=False) == pytest.approx(1 / 3)
    with pytest.raises(NoCandidates):
        frank(_case([0.5]))


def test_auc_epitope_examples():
    assert auc_epitope(_case([0.9, 0.1, 0.2])) == 1.0
    # 9 candidates, epitope ranked 3rd
    scores = [0.7, 0.9, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]
    assert auc_epitope(_case(scores, 0)) == 0.75
    c = _case([0.5, 0.9, 0.1], 0, others=[1])
    assert auc_epitope(c) == 0.5
    assert auc_epitope(c, exclude_others=True) == 1.0


def test_auc_epitope_random_is_half():
    rng = np.random.default_rng(0)
    vals = [auc_epitope(_case(rng.random(50), int(rng.integers(50)))) for _ in range(1000)]
    assert abs(np.mean(vals) - 0.5) <= 0.03


def test_mixmhc2_filter():
    recs = [el("A" * n) for n in (11, 12, 15, 21, 22)]
    kept, counts = el_filter_mixmhc2(recs)
    assert [len(r.peptide) for r in kept] == [12, 15, 21]
    assert counts == {"kept": 3, "dropped": 2}
