import random

import pytest

from mhc2bench.core import AMINO_ACIDS, AssayRecord


def rand_peptide(rng: random.Random, n: int, alphabet: str = AMINO_ACIDS) -> str:
    return "".join(rng.choice(alphabet) for _ in range(n))


def el(peptide, allele="DRB1_0101", label=1.0, **kw):
    return AssayRecord(peptide, allele, "EL", label, **kw)


def ba(peptide, allele="DRB1_0101", label=0.5, **kw):
    return AssayRecord(peptide, allele, "BA", label, **kw)


@pytest.fixture
def rng():
    return random.Random(12345)


def build_workspace(root, n_train=30, n_heldout=15):
    """Write a synthetic corpus to ``root``: train antigens dated 2015, held-out
    antigens dated 2021, a few BA records and the matching cores file."""
    from dataclasses import replace

    from mhc2bench import io
    from mhc2bench.synthetic import make_corpus

    train = make_corpus(n_train, seed=1, id_prefix="tr")
    held = make_corpus(n_heldout, seed=2, id_prefix="ho")
    records = train.records + [replace(r, year=2021) for r in held.records]
    rng = random.Random(0)
    records += [AssayRecord(r.peptide, r.allele, "BA", round(rng.random(), 3), r.year)
                for r in records[::7]]
    antigens = {**train.antigens, **held.antigens}
    paths = {
        "records": root / "records.tsv",
        "train_records": root / "train_records.tsv",
        "held_records": root / "held_records.tsv",
        "antigens": root / "antigens.fa",
        "cores": root / "cores.tsv",
    }
    io.write_records(paths["records"], records)
    io.write_records(paths["train_records"], train.records)
    io.write_records(paths["held_records"], [replace(r, year=2021) for r in held.records])
    io.write_fasta(paths["antigens"], antigens.values())
    io.write_cores(paths["cores"], {**train.cores, **held.cores})
    return paths
