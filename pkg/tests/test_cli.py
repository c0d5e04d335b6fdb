import numpy as np
import pytest

from mhc2bench import io
from mhc2bench.cli import main
from mhc2bench.kmer import leakage_report
from mhc2bench.metrics.antigen import cr_curve, residue_labels, sliding_window_scores

import random

from conftest import ba, build_workspace, el, rand_peptide


@pytest.fixture(scope="module")
def split_records(tmp_path_factory):
    """Random excised peptides without shared motifs; a few planted leaks."""
    rng = random.Random(3)
    antigens = [rand_peptide(rng, 300) for _ in range(40)]
    recs = []
    for i, seq in enumerate(antigens):
        for _ in range(6):
            s, n = rng.randrange(0, 280), rng.randint(12, 18)
            year = 2021 if i % 3 == 0 else 2015
            allele = rng.choice(["DRB1_0101", "DRB1_0401", "DQA10501-DQB10201"])
            recs.append(el(seq[s:s + n], allele, year=year, antigen_id=f"g{i}", start=s))
        recs.append(ba(seq[10:25], "DRB1_0101", label=round(rng.random(), 3), year=2021))
    path = tmp_path_factory.mktemp("split") / "records.tsv"
    io.write_records(path, recs)
    return path


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    paths = build_workspace(root)
    paths["root"] = root
    return paths


def run(*argv):
    return main([str(a) for a in argv])


def test_curate(ws, tmp_path):
    out, audit = tmp_path / "cur.tsv", tmp_path / "audit.json"
    assert run("curate", "--records", ws["records"], "--antigens", ws["antigens"],
               "--out", out, "--audit", audit, "--occurrences", tmp_path / "occ.tsv") == 0
    doc = io.read_json(audit)
    assert doc["stage"] == "curate" and doc["audit"]["unaligned"] == 0
    # BA rows arrive unlinked and are aligned by substring search
    assert all(r.antigen_id for r in io.read_records(out))
    assert doc["audit"]["aligned"] == doc["audit"]["records_out"]


def test_curate_raw_ba(tmp_path):
    raw = tmp_path / "raw.tsv"
    raw.write_text("peptide\tallele\tic50\nACDEFGHIK\tDRB1*01:01\t500\n"
                   "ACDEFGHIK\tDRB1*01:01\t>1000\nMNPQRSTVW\tDRB1*04:01\t<50\n")
    out, audit = tmp_path / "o.tsv", tmp_path / "a.json"
    assert run("curate", "--ba-raw", raw, "--out", out, "--audit", audit) == 0
    (r,) = io.read_records(out)
    assert abs(r.label - 0.4256251898085073) < 1e-15
    assert io.read_json(audit)["audit"]["ba_ambiguous_dropped"] == 2


def test_curate_empty_file(tmp_path, caplog):
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    out = tmp_path / "o.tsv"
    assert run("curate", "--records", empty, "--out", out) == 0
    assert io.read_records(out) == []
    assert "no input records" in caplog.text


def test_split_leak_free(split_records, tmp_path):
    d = tmp_path / "split"
    assert run("split", "--records", split_records, "--out-dir", d) == 0
    audit = io.read_json(d / "split_audit.json")
    for task in ("ba", "el"):
        train = io.read_records(d / f"{task}_train.tsv")
        test = io.read_records(d / f"{task}_test.tsv")
        assert leakage_report(train, test).count == 0
        assert audit["tasks"][task.upper()]["leakage_test"] == 0
    el_test = io.read_records(d / "el_test.tsv")
    assert el_test and all(r.year == 2021 for r in el_test)
    # unlinked BA test candidates were moved back to train
    assert audit["tasks"]["BA"]["repairs"]["no_antigen"] > 0


def test_split_leaked_fixture(tmp_path):
    recs = tmp_path / "r.tsv"
    recs.write_text("peptide\tallele\tassay\tlabel\tyear\tantigen_id\tstart\n"
                    "ACDEFGHIKLM\tDRB1_0101\tEL\t1\t2015\tg\t0\n"
                    "CDEFGHIKLMN\tDRB1_0101\tEL\t1\t2021\tg\t1\n"
                    "WWWWYYYYWWW\tDRB1_0101\tEL\t1\t2021\tg\t20\n")
    d = tmp_path / "s"
    assert run("split", "--records", recs, "--out-dir", d, "--validation-fraction", 0) == 0
    audit = io.read_json(d / "split_audit.json")["tasks"]["EL"]
    assert audit["repairs"]["kmer"] == 1 and audit["leakage_test"] == 0


def test_split_cluster_mode(split_records, tmp_path):
    d = tmp_path / "s"
    assert run("split", "--records", split_records, "--out-dir", d, "--validation-mode",
               "cluster", "--validation-fraction", 0.2) == 0
    val = io.read_records(d / "el_validation.tsv")
    train = io.read_records(d / "el_train.tsv")
    assert val and leakage_report(train, val).count == 0


def test_augment_and_windows(ws, tmp_path):
    out, audit = tmp_path / "aug.tsv", tmp_path / "aug.json"
    assert run("augment", "--records", ws["train_records"], "--antigens", ws["antigens"],
               "--cores", ws["cores"], "--out", out, "--audit", audit) == 0
    recs = io.read_records(out)
    assert sum(r.provenance == "aug:neg" for r in recs) > 0
    assert io.read_json(audit)["audit"]["neighbor_positive_rate"] is not None
    wout = tmp_path / "win.tsv"
    assert run("windows", "--records", ws["train_records"], "--antigens", ws["antigens"],
               "--out", wout, "--window-sizes", "64,128") == 0
    rows = io.read_windows(wout)
    assert rows and all(e - s in (64, 128) for _, _, s, e, _ in rows)


@pytest.fixture(scope="module")
def predictions(ws):
    root = ws["root"]
    model, preds = root / "model.json", root / "preds.tsv"
    assert run("baseline", "fit", "--records", ws["train_records"], "--cores", ws["cores"],
               "--model", model) == 0
    assert run("baseline", "predict", "--model", model, "--antigens", ws["antigens"],
               "--records", ws["held_records"], "--out", preds) == 0
    return preds


def test_eval_epitope_and_antigen(ws, predictions, tmp_path):
    ep = tmp_path / "ep.json"
    assert run("eval", "epitope", "--records", ws["held_records"], "--predictions", predictions,
               "--antigens", ws["antigens"], "--out", ep) == 0
    m = io.read_json(ep)["metrics"]
    assert m["overall"]["auc_epitope"] > 0.65
    an, curves = tmp_path / "an.json", tmp_path / "curves.tsv"
    assert run("eval", "antigen", "--records", ws["held_records"], "--predictions", predictions,
               "--antigens", ws["antigens"], "--out", an, "--curves", curves) == 0
    m = io.read_json(an)["metrics"]
    assert m["overall"]["cr_auc"] > 0.6
    assert io.read_curves(curves)


def test_eval_antigen_matches_oracle(ws, predictions, tmp_path):
    an = tmp_path / "an.json"
    run("eval", "antigen", "--records", ws["held_records"], "--predictions", predictions,
        "--antigens", ws["antigens"], "--out", an)
    cases = io.read_json(an)["metrics"]["cases"]
    antigens = io.read_fasta(ws["antigens"])
    preds = io.read_predictions(predictions)
    recs = io.read_records(ws["held_records"])
    for c in cases[:10]:
        g, a = c["antigen_id"], c["allele"]
        n = len(antigens[g])
        lab = residue_labels(n, sorted({(r.start, r.end) for r in recs
                                        if r.antigen_id == g and r.allele == a}))
        w = preds.windows[(g, a, 9)]
        scores = sliding_window_scores([w[s] for s in range(n - 8)], n, 9)
        assert c["cr_auc"] == cr_curve(scores, lab).cr_auc


def test_eval_peptide_tasks(ws, predictions, tmp_path):
    out = tmp_path / "el.json"
    assert run("eval", "el", "--records", ws["held_records"], "--predictions", predictions,
               "--out", out) == 0
    assert io.read_json(out)["metrics"]["overall"]["n"] > 0
    pp = tmp_path / "pp.tsv"
    pp.write_text("peptide\tallele\tscore\nACDEFGHIK\tDRB1_0101\t0.9\nMNPQRSTVW\tDRB1_0101\t0.1\n")
    recs = tmp_path / "ba.tsv"
    recs.write_text("peptide\tallele\tassay\tlabel\nACDEFGHIK\tDRB1_0101\tBA\t0.8\n"
                    "MNPQRSTVW\tDRB1_0101\tBA\t0.1\n")
    out = tmp_path / "ba.json"
    assert run("eval", "ba", "--records", recs, "--predictions", pp, "--out", out) == 0
    o = io.read_json(out)["metrics"]["overall"]
    assert o["roc_auc"] == 1.0 and o["rmse"] == pytest.approx(np.sqrt(0.005))


def test_report(ws, predictions, tmp_path):
    ep = tmp_path / "ep.json"
    run("eval", "epitope", "--records", ws["held_records"], "--predictions", predictions,
        "--antigens", ws["antigens"], "--out", ep)
    rep = tmp_path / "rep.json"
    assert run("report", ep, "--out", rep) == 0
    assert "epitope" in io.read_json(rep)["metrics"]


def test_exit_codes(ws, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["split"])
    assert e.value.code == 1
    bad = tmp_path / "bad.tsv"
    bad.write_text("peptide\tallele\tassay\tlabel\nACDEFGHIK\tDRB1_0101\tEL\tx\n")
    assert run("curate", "--records", bad, "--out", tmp_path / "o.tsv") == 2
    bad.write_text("peptide\tallele\tassay\tlabel\nACDEFGHIK\tDRB1_0101\tEL\t1\n")
    assert run("split", "--records", bad, "--out-dir", tmp_path / "s", "--overlap-ratio", 2) == 3
    empty_preds = tmp_path / "p.tsv"
    empty_preds.write_text("antigen_id\tallele\tstart\tlength\tscore\n")
    assert run("eval", "antigen", "--records", ws["held_records"], "--predictions", empty_preds,
               "--antigens", ws["antigens"], "--out", tmp_path / "x.json") == 4
    assert run("eval", "antigen", "--records", ws["held_records"], "--predictions", empty_preds,
               "--out", tmp_path / "x.json") == 1


@pytest.mark.filterwarnings("ignore::mhc2bench.exceptions.EmptyTestWarning")
def test_reports_byte_identical(ws, split_records, predictions, tmp_path):
    outs = []
    for i, workers in enumerate((1, 1, 4)):
        d = tmp_path / f"run{i}"
        d.mkdir()
        run("split", "--records", split_records, "--out-dir", d / "split", "--seed", 3)
        run("eval", "antigen", "--records", ws["held_records"], "--predictions", predictions,
            "--antigens", ws["antigens"], "--out", d / "an.json", "--workers", workers)
        run("eval", "epitope", "--records", ws["held_records"], "--predictions", predictions,
            "--antigens", ws["antigens"], "--out", d / "ep.json", "--workers", workers)
        outs.append({p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()})
    assert outs[0] == outs[1] == outs[2]
