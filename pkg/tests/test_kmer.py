import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from mhc2bench.exceptions import EmptyTestWarning
from mhc2bench.kmer import build_index, kmers, leakage_report, repair_split, shares_kmer

from conftest import el, rand_peptide


def naive_shares(p: str, peptides, k: int) -> bool:
    """Oracle: compare every window of p with every window of every peptide."""
    for q in peptides:
        for i in range(len(p) - k + 1):
            for j in range(len(q) - k + 1):
                if p[i:i + k] == q[j:j + k]:
                    return True
    return False


def test_build_index_examples():
    assert len(build_index({"ACDEFGHIK"}, 9)) == 1
    assert len(build_index({"ACDEFGH"}, 9)) == 0
    idx = build_index({"ACDEFGHIKL", "CDEFGHIKLM"}, 9)
    assert sorted(idx) == ["ACDEFGHIK", "CDEFGHIKL", "DEFGHIKLM"]
    assert "ACDEFGHIK" in idx
    assert "ACDEFGHI" not in idx


def test_build_index_rejects_bad_k():
    with pytest.raises(ValueError):
        build_index({"ACDEF"}, 0)


def test_shares_kmer_examples():
    idx = build_index({"ACDEFGHIK"}, 9)
    assert shares_kmer("ACDEFGHIKL", idx)
    assert not shares_kmer("ACDEFGHI", idx)
    a, b = "ACDEFGHIKLMNPQR", "RQPNMLKIHGFEDCA"
    assert not naive_shares(a, [b], 9)
    assert not shares_kmer(a, build_index({b}, 9))


_peps = st.text(alphabet="ACD", min_size=0, max_size=50)


@settings(max_examples=300, deadline=None)
@given(p=_peps, others=st.lists(_peps, max_size=5), k=st.integers(1, 9))
def test_shares_kmer_matches_naive_oracle(p, others, k):
    assert shares_kmer(p, build_index(set(others), k)) == naive_shares(p, others, k)


def test_repair_single_iteration():
    train = [el("ACDEFGHIK")]
    test = [el("ACDEFGHIKL"), el("WWWWWWWWWW")]
    res = repair_split(train, test)
    assert [r.peptide for r in res.test] == ["WWWWWWWWWW"]
    assert res.moved == 1
    assert res.iterations == 1
    assert {r.peptide for r in res.train} == {"ACDEFGHIK", "ACDEFGHIKL"}


def test_repair_disjoint_alphabets():
    res = repair_split([el("ACDEFGHIKL")], [el("MNPQRSTVWY")])
    assert res.moved == 0 and res.iterations == 0


def test_repair_chain_needs_later_iteration():
    # t1 leaks into train directly; t2 only via t1; t3 only via t2
    train = [el("WACDEFGHIK")]
    t1 = el("ACDEFGHIKLM")
    t2 = el("DEFGHIKLMNPQ")
    t3 = el("GHIKLMNPQRS")
    with pytest.warns(EmptyTestWarning):
        res = repair_split(train, [t3, t2, t1])
    assert res.test == []
    assert res.iterations == 3
    assert res.moved == 3


def test_repair_moves_all_records_of_peptide():
    train = [el("ACDEFGHIK")]
    test = [el("ACDEFGHIKL", "DRB1_0101"), el("ACDEFGHIKL", "DRB1_0401"), el("YYYYYYYYYY")]
    res = repair_split(train, test)
    assert res.moved == 2
    assert [r.peptide for r in res.test] == ["YYYYYYYYYY"]


def test_repair_warns_when_test_emptied():
    with pytest.warns(EmptyTestWarning):
        repair_split([el("ACDEFGHIK")], [el("ACDEFGHIKL")])


def _random_split(seed, n_train=60, n_test=60):
    rng = random.Random(seed)
    pool = [rand_peptide(rng, rng.randint(8, 20), "ACDE") for _ in range(n_train + n_test)]
    return [el(p) for p in pool[:n_train]], [el(p, "DRB1_0401") for p in pool[n_train:]]


@pytest.mark.parametrize("seed", range(5))
def test_repair_invariants(seed):
    train, test = _random_split(seed)
    res = repair_split(train, test)
    # zero residual leakage by brute force
    train_peps = {r.peptide for r in res.train}
    assert not any(naive_shares(r.peptide, train_peps, 9) for r in res.test)
    # nothing invented or lost; original train untouched
    assert Counter(res.train + res.test) == Counter(train + test)
    assert res.train[:len(train)] == train
    # fixpoint
    again = repair_split(res.train, res.test)
    assert again.moved == 0


def brute_force_leak_count(train, test, k=9):
    train_peps = sorted({r.peptide for r in train})
    return sum(naive_shares(p, train_peps, k) for p in sorted({r.peptide for r in test}))


def test_leakage_report_examples():
    assert leakage_report([el("ACDEFGHIK")], [el("ACDEFGHIK")]).count == 1
    train, test = _random_split(7)
    res = repair_split(train, test)
    assert leakage_report(res.train, res.test).count == 0
    rep = leakage_report(train, test)
    assert rep.count == brute_force_leak_count(train, test)
    for t, tr, m in rep.pairs:
        assert m in kmers(t, 9) and m in kmers(tr, 9)


def test_leakage_report_matches_oracle_1k():
    rng = random.Random(99)
    peps = [rand_peptide(rng, rng.randint(9, 15), "ACDEF") for _ in range(1000)]
    train, test = peps[:500], peps[500:]
    expected = sum(naive_shares(p, set(train), 9) for p in set(test))
    assert leakage_report(train, test).count == expected
    assert expected > 0
