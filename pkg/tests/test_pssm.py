import itertools
import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mhc2bench.core import AMINO_ACIDS
from mhc2bench.exceptions import NoPositives, PeptideTooShort, UnknownAllele, ValidationError
from mhc2bench.pssm import PSSMPredictor, fit_pssm, score_peptide

A = "DRB1_0101"


def hand_matrix(cores, pc=1.0):
    """Oracle: per position count, add pseudocount, normalize, log-odds vs 1/20."""
    rows = []
    for pos in range(9):
        col = [c[pos] for c in cores]
        total = len(col) + 20 * pc
        rows.append([math.log(((col.count(a) + pc) / total) / 0.05) for a in AMINO_ACIDS])
    return np.array(rows)


def test_matrix_matches_hand_computation():
    cores = ["ACDEFGHIK", "ACDEFGHIL", "WCDEFGHIK"]
    m = fit_pssm(cores, [A] * 3)
    assert np.allclose(m.matrices_[A], hand_matrix(cores), rtol=0, atol=1e-12)


def test_cores_offsets_used():
    peps = ["MMACDEFGHIKMM", "ACDEFGHIKWW"]
    m = fit_pssm(peps, [A, A], cores=[2, 0])
    assert np.allclose(m.matrices_[A], hand_matrix(["ACDEFGHIK"] * 2), atol=1e-12)


def test_uniform_position_is_zero():
    cores = [a * 9 for a in AMINO_ACIDS]
    m = fit_pssm(cores, [A] * 20)
    assert np.allclose(m.matrices_[A], 0.0, atol=1e-12)


def test_consensus_maximizes():
    m = fit_pssm(["ACDEFGHIK"] * 5, [A] * 5)
    best = m.decision_function([("ACDEFGHIK", A)])[0]
    rng = np.random.default_rng(0)
    others = ["".join(rng.choice(list(AMINO_ACIDS), 9)) for _ in range(500)]
    assert all(m.decision_function([(p, A)])[0] <= best for p in others)


def test_all_zero_matrix_constant():
    m = fit_pssm([a * 9 for a in AMINO_ACIDS], [A] * 20)
    vals = m.predict([(p, A) for p in ("ACDEFGHIKLM", "WWWWWWWWW", "KKKKKKKKKKKKK")])
    assert len(set(vals.tolist())) == 1


def test_median_positive_lands_on_target():
    peps = ["ACDEFGHIK", "ACDEFGHIL", "WCDEFGHIK", "ACDEFGHYY", "ACDMMGHIK"]
    m = fit_pssm(peps, [A] * 5)
    assert np.median(m.predict([(p, A) for p in peps])) == pytest.approx(0.7, abs=1e-12)


def test_errors():
    m = fit_pssm(["ACDEFGHIK"], [A])
    with pytest.raises(PeptideTooShort):
        m.predict([("ACDEFGHI", A)])
    with pytest.raises(UnknownAllele):
        m.predict([("ACDEFGHIK", "DRB1_0401")])
    with pytest.raises(NoPositives):
        PSSMPredictor().fit([("ACDEFGHIK", A), ("ACDEFGHIK", "DRB1_0401")], y=[1, 0])
    with pytest.raises(NotFittedError):
        PSSMPredictor().predict([("ACDEFGHIK", A)])
    with pytest.raises(ValidationError):
        PSSMPredictor(pseudocount=0).fit([("ACDEFGHIK", A)])


def test_labels_filter_positives():
    X = [("ACDEFGHIK", A), ("WWWWWWWWW", A)]
    m = PSSMPredictor().fit(X, y=[1, 0])
    assert np.allclose(m.matrices_[A], hand_matrix(["ACDEFGHIK"]), atol=1e-12)


def test_sklearn_params_and_clone():
    m = PSSMPredictor(pseudocount=0.5)
    assert m.get_params() == {"k": 9, "pseudocount": 0.5, "median_target": 0.7}
    c = clone(m).set_params(pseudocount=2.0)
    assert c.pseudocount == 2.0 and m.pseudocount == 0.5


def test_score_windows_matches_predict():
    m = fit_pssm(["ACDEFGHIK", "ACDEFGHIL"], [A, A])
    seq = "MMACDEFGHIKLLWWACDEFGHILP"
    w = m.score_windows(seq, A, 13)
    direct = m.predict([(seq[s:s + 13], A) for s in range(len(seq) - 12)])
    assert np.allclose(w, direct, rtol=0, atol=1e-15)
    assert score_peptide(m, seq[:13], A) == direct[0]


def test_json_round_trip_bit_identical(tmp_path):
    peps = ["ACDEFGHIKLM", "WCDEFGHIKQQ", "ACDEFGHYYRR"]
    m = fit_pssm(peps, ["DRB1_0101", "DRB1_0101", "DPA10103-DPB10401"])
    path = tmp_path / "m.json"
    m.save(path)
    m2 = PSSMPredictor.load(path)
    X = [(p, a) for p, a in itertools.product(peps, m.alleles_)]
    assert m.predict(X).tobytes() == m2.predict(X).tobytes()
    m2.save(tmp_path / "m2.json")
    assert path.read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_from_dict_rejects_foreign():
    with pytest.raises(ValidationError):
        PSSMPredictor.from_dict({"format": "other", "version": 1})
