"""Line-oriented file formats: records/cores/predictions TSV and FASTA.

All files are UTF-8 with LF line endings and ``.`` as decimal separator.
Empty optional TSV fields are written as empty strings. Floats are written
with ``repr`` so a write/read cycle reproduces them bit for bit.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .core import AssayRecord, Antigen, normalize_allele, validate_sequence
from .curation import RawBAEntry
from .exceptions import FormatError, ValidationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RECORD_COLUMNS = ("peptide", "allele", "assay", "label", "year", "antigen_id", "start", "provenance")
RAW_BA_COLUMNS = ("peptide", "allele", "ic50", "year", "antigen_id")
CORE_COLUMNS = ("peptide", "allele", "antigen_id", "core_start")
WINDOW_PRED_COLUMNS = ("antigen_id", "allele", "start", "length", "score")
RESIDUE_PRED_COLUMNS = ("antigen_id", "allele", "position", "score")
PEPTIDE_PRED_COLUMNS = ("peptide", "allele", "score")
WINDOW_COLUMNS = ("antigen_id", "allele", "start", "end", "positive")
CURVE_COLUMNS = ("antigen_id", "allele", "threshold", "redundancy", "coverage")
OCCURRENCE_COLUMNS = ("peptide", "antigen_id", "start")


@lru_cache(maxsize=4096)
def canonical_allele(raw: str) -> str:
    return normalize_allele(raw).name


def fmt_float(x: float) -> str:
    return repr(float(x))


def _opt(x) -> str:
    return "" if x is None else str(x)


@contextmanager
def _open(path: PathLike, mode: str = "r"):
    if str(path) == "-":
        import sys
        yield sys.stdout if "w" in mode else sys.stdin
        return
    with open(path, mode, encoding="utf-8", newline="\n") as fh:
        yield fh


# ---------------------------------------------------------------------------
# generic TSV


def iter_tsv(path: PathLike, columns: tuple, required: Optional[tuple] = None
             ) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, row_dict)``; the header must name ``columns``.

    Extra columns are ignored; missing optional columns read as "".
    An empty file yields nothing.
    """
    required = columns if required is None else required
    with _open(path) as fh:
        header = None
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if header is None:
                header = fields
                missing = [c for c in required if c not in header]
                if missing:
                    raise FormatError(f"missing columns {missing}", path, lineno)
                pos = {c: header.index(c) for c in columns if c in header}
                continue
            if len(fields) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(fields)}", path, lineno)
            yield lineno, {c: fields[i] for c, i in pos.items()}


def read_header(path: PathLike) -> list[str]:
    with _open(path) as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                return line.rstrip("\n").split("\t")
    return []


def write_tsv(path: PathLike, columns: tuple, rows: Iterable[Iterable]) -> int:
    n = 0
    with _open(path, "w") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")
            n += 1
    return n


def _int(value: str, name: str, path, lineno, optional=False) -> Optional[int]:
    if value == "" and optional:
        return None
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"{name}: not an integer: {value!r}", path, lineno) from None


def _float(value: str, name: str, path, lineno) -> float:
    try:
        return float(value)
    except ValueError:
        raise FormatError(f"{name}: not a number: {value!r}", path, lineno) from None


# ---------------------------------------------------------------------------
# records


def record_sort_key(r: AssayRecord) -> tuple:
    return (r.antigen_id or "", r.allele, -1 if r.start is None else r.start,
            r.peptide, r.assay, r.label, r.year or 0, r.provenance)


def iter_records(path: PathLike, quarantine: Optional[list] = None) -> Iterator[AssayRecord]:
    """Stream records from a records TSV.

    Rows violating a domain rule (bad residue, unknown allele, label out of
    range) raise ValidationError, unless ``quarantine`` is a list, in which
    case ``(line_number, row, reason)`` is appended and the row skipped.
    """
    for lineno, row in iter_tsv(path, RECORD_COLUMNS, RECORD_COLUMNS[:4]):
        label = _float(row["label"], "label", path, lineno)
        year = _int(row.get("year", ""), "year", path, lineno, optional=True)
        start = _int(row.get("start", ""), "start", path, lineno, optional=True)
        try:
            rec = AssayRecord(validate_sequence(row["peptide"]), canonical_allele(row["allele"]),
                              row["assay"].upper(), label, year, row.get("antigen_id") or None,
                              start, row.get("provenance", ""))
        except ValidationError as e:
            if quarantine is None:
                raise ValidationError(f"{path}:{lineno}: {e}") from e
            quarantine.append((lineno, row, str(e)))
            logger.info("%s:%d rejected: %s", path, lineno, e)
            continue
        yield rec


def read_records(path: PathLike, quarantine: Optional[list] = None) -> list[AssayRecord]:
    return list(iter_records(path, quarantine))


def record_row(r: AssayRecord) -> list[str]:
    return [r.peptide, r.allele, r.assay, fmt_float(r.label), _opt(r.year), _opt(r.antigen_id),
            _opt(r.start), r.provenance]


def write_records(path: PathLike, records: Iterable[AssayRecord], sort: bool = True) -> int:
    records = sorted(records, key=record_sort_key) if sort else records
    return write_tsv(path, RECORD_COLUMNS, (record_row(r) for r in records))


def iter_raw_ba(path: PathLike, quarantine: Optional[list] = None) -> Iterator[RawBAEntry]:
    """Raw BA measurements: ``ic50`` is a number or a bound such as ``>1000``."""
    for lineno, row in iter_tsv(path, RAW_BA_COLUMNS, RAW_BA_COLUMNS[:3]):
        year = _int(row.get("year", ""), "year", path, lineno, optional=True)
        try:
            entry = RawBAEntry(validate_sequence(row["peptide"]), canonical_allele(row["allele"]),
                               row["ic50"].strip(), year, row.get("antigen_id") or None)
            ic50 = entry.ic50
            if ic50 is not None and not ic50 > 0:
                raise ValidationError(f"IC50 must be positive, got {ic50}")
        except ValidationError as e:
            if quarantine is None:
                raise ValidationError(f"{path}:{lineno}: {e}") from e
            quarantine.append((lineno, row, str(e)))
            continue
        yield entry


# ---------------------------------------------------------------------------
# FASTA


def iter_fasta(path: PathLike) -> Iterator[Antigen]:
    """Antigens from FASTA; the id is the header up to the first whitespace."""
    seen = set()
    ident, chunks, start_line = None, [], 0

    def emit():
        if not chunks:
            raise FormatError(f"empty sequence for {ident!r}", path, start_line)
        try:
            return Antigen(ident, "".join(chunks))
        except ValidationError as e:
            raise ValidationError(f"{path}:{start_line}: antigen {ident!r}: {e}") from e

    with _open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if ident is not None:
                    yield emit()
                parts = line[1:].split()
                if not parts:
                    raise FormatError("empty FASTA header", path, lineno)
                ident, chunks, start_line = parts[0], [], lineno
                if ident in seen:
                    raise FormatError(f"duplicate antigen id {ident!r}", path, lineno)
                seen.add(ident)
            elif ident is None:
                raise FormatError("sequence data before first header", path, lineno)
            else:
                chunks.append(line)
    if ident is not None:
        yield emit()


def read_fasta(path: PathLike) -> dict[str, Antigen]:
    return {a.id: a for a in iter_fasta(path)}


def write_fasta(path: PathLike, antigens: Iterable[Antigen], width: int = 60) -> None:
    with _open(path, "w") as fh:
        for a in sorted(antigens, key=lambda a: a.id):
            fh.write(f">{a.id}\n")
            for i in range(0, len(a.sequence), width):
                fh.write(a.sequence[i:i + width] + "\n")


# ---------------------------------------------------------------------------
# cores


def read_cores(path: PathLike) -> dict[tuple, int]:
    """Map ``(peptide, allele, antigen_id)`` to the absolute core start in the antigen."""
    cores = {}
    for lineno, row in iter_tsv(path, CORE_COLUMNS):
        key = (validate_sequence(row["peptide"]), canonical_allele(row["allele"]), row["antigen_id"])
        start = _int(row["core_start"], "core_start", path, lineno)
        if key in cores and cores[key] != start:
            raise FormatError(f"conflicting cores for {key}", path, lineno)
        cores[key] = start
    return cores


def write_cores(path: PathLike, cores: dict) -> int:
    items = sorted(cores.items(), key=lambda kv: (kv[0][2], kv[0][1], kv[1], kv[0][0]))
    rows = ([p, a, g, str(s)] for (p, a, g), s in items)
    return write_tsv(path, CORE_COLUMNS, rows)


# ---------------------------------------------------------------------------
# predictions


class Predictions:
    """Scores from an external predictor.

    ``windows[(antigen_id, allele, length)][start]``,
    ``residues[(antigen_id, allele)][position]`` and
    ``peptides[(peptide, allele)]`` hold whichever kinds were supplied.
    """

    def __init__(self):
        self.windows: dict[tuple, dict[int, float]] = defaultdict(dict)
        self.residues: dict[tuple, dict[int, float]] = defaultdict(dict)
        self.peptides: dict[tuple, float] = {}

    def peptide_score(self, r: AssayRecord) -> Optional[float]:
        s = self.peptides.get((r.peptide, r.allele))
        if s is None and r.is_linked:
            s = self.windows.get((r.antigen_id, r.allele, len(r.peptide)), {}).get(r.start)
        return s

    def __len__(self):
        return (sum(map(len, self.windows.values())) + sum(map(len, self.residues.values()))
                + len(self.peptides))


def _check_score(score: float, path, lineno) -> float:
    if not 0.0 <= score <= 1.0:
        raise FormatError(f"score {score} outside [0, 1]", path, lineno)
    return score


def read_predictions(path: PathLike, preds: Optional[Predictions] = None) -> Predictions:
    """Read one predictions TSV; the header selects window, residue or peptide format."""
    if preds is None:
        preds = Predictions()
    header = read_header(path)
    if not header:
        return preds
    if "length" in header:
        for lineno, row in iter_tsv(path, WINDOW_PRED_COLUMNS):
            key = (row["antigen_id"], canonical_allele(row["allele"]),
                   _int(row["length"], "length", path, lineno))
            start = _int(row["start"], "start", path, lineno)
            if start in preds.windows[key]:
                raise FormatError(f"duplicate window {key} start {start}", path, lineno)
            preds.windows[key][start] = _check_score(_float(row["score"], "score", path, lineno),
                                                     path, lineno)
    elif "position" in header:
        for lineno, row in iter_tsv(path, RESIDUE_PRED_COLUMNS):
            key = (row["antigen_id"], canonical_allele(row["allele"]))
            pos = _int(row["position"], "position", path, lineno)
            if pos in preds.residues[key]:
                raise FormatError(f"duplicate residue {key} position {pos}", path, lineno)
            preds.residues[key][pos] = _check_score(_float(row["score"], "score", path, lineno),
                                                    path, lineno)
    elif "peptide" in header:
        for lineno, row in iter_tsv(path, PEPTIDE_PRED_COLUMNS):
            key = (validate_sequence(row["peptide"]), canonical_allele(row["allele"]))
            if key in preds.peptides:
                raise FormatError(f"duplicate prediction for {key}", path, lineno)
            preds.peptides[key] = _check_score(_float(row["score"], "score", path, lineno),
                                               path, lineno)
    else:
        raise FormatError("unrecognized predictions header", path, 1)
    return preds


def write_window_predictions(path: PathLike, rows: Iterable[tuple]) -> int:
    """Rows are ``(antigen_id, allele, start, length, score)``."""
    rows = sorted(rows, key=lambda r: (r[0], r[1], r[2], r[3]))
    return write_tsv(path, WINDOW_PRED_COLUMNS,
                     ([g, a, str(s), str(n), fmt_float(v)] for g, a, s, n, v in rows))


def write_residue_predictions(path: PathLike, rows: Iterable[tuple]) -> int:
    rows = sorted(rows, key=lambda r: (r[0], r[1], r[2]))
    return write_tsv(path, RESIDUE_PRED_COLUMNS,
                     ([g, a, str(p), fmt_float(v)] for g, a, p, v in rows))


# ---------------------------------------------------------------------------
# windows, curves, occurrences


def write_windows(path: PathLike, rows: Iterable[tuple]) -> int:
    """Rows are ``(antigen_id, allele, start, end, positive)``."""
    return write_tsv(path, WINDOW_COLUMNS,
                     ([g, a, str(s), str(e), str(int(p))] for g, a, s, e, p in rows))


def read_windows(path: PathLike) -> list[tuple]:
    out = []
    for lineno, row in iter_tsv(path, WINDOW_COLUMNS):
        out.append((row["antigen_id"], row["allele"], _int(row["start"], "start", path, lineno),
                    _int(row["end"], "end", path, lineno), row["positive"] == "1"))
    return out


def write_curves(path: PathLike, rows: Iterable[tuple]) -> int:
    """Rows are ``(antigen_id, allele, threshold, redundancy, coverage)``."""
    return write_tsv(path, CURVE_COLUMNS,
                     ([g, a, fmt_float(t), fmt_float(r), fmt_float(c)] for g, a, t, r, c in rows))


def read_curves(path: PathLike) -> list[tuple]:
    return [(row["antigen_id"], row["allele"], _float(row["threshold"], "threshold", path, n),
             _float(row["redundancy"], "redundancy", path, n),
             _float(row["coverage"], "coverage", path, n))
            for n, row in iter_tsv(path, CURVE_COLUMNS)]


def write_occurrences(path: PathLike, occurrences: dict) -> int:
    rows = sorted((p, g, s) for p, hits in occurrences.items() for g, s in hits)
    return write_tsv(path, OCCURRENCE_COLUMNS, ([p, g, str(s)] for p, g, s in rows))


def write_json(path: PathLike, doc) -> None:
    with _open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path: PathLike):
    with _open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from None
