"""Command line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage, 2 format, 3 validation, 4 degenerate metric.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter, defaultdict
from pathlib import Path

from . import __version__
from .augmentation import augment, sample_antigen_windows
from .config import RunConfig
from .core import DatasetSplit, allele_locus, annotations_from_records, check_antigen_link
from .curation import (align_antigens, apply_split_repairs, ba_entries_to_records, build_test_split,
                       cluster_peptides, dedup_records, filter_ambiguous_ba,
                       neighbor_positive_rate, peptide_overlap_ratio, sample_cluster_validation,
                       sample_validation)
from .evaluation import evaluate_antigen, evaluate_ba, evaluate_el, evaluate_epitope
from .exceptions import (DegenerateMetricError, FormatError, Mhc2BenchError, NoValidWindow,
                         ValidationError)
from . import io
from .kmer import leakage_report
from .pssm import PSSMPredictor

logger = logging.getLogger("mhc2bench")

EXIT_USAGE, EXIT_FORMAT, EXIT_VALIDATION, EXIT_DEGENERATE = 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for name in ("seed", "k", "window_length", "year_cutoff", "validation_fraction",
                 "overlap_ratio", "validation_mode", "cluster_identity", "n_negatives",
                 "n_positives", "length_jitter", "window_draws", "threshold_grid", "aggregation",
                 "accuracy_threshold"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    for flag in ("strict_cross_task", "exclude_other_epitopes", "mixmhc2_filter"):
        if getattr(args, flag, False):
            overrides[flag] = True
    if getattr(args, "window_sizes", None):
        overrides["window_sizes"] = [int(x) for x in args.window_sizes.split(",")]
    return cfg.replace(**overrides)


def _doc(stage: str, cfg: RunConfig, **body) -> dict:
    return {"stage": stage, "version": __version__, "config": cfg.to_dict(), **body}


# ---------------------------------------------------------------------------
# commands


def cmd_curate(args) -> int:
    cfg = _config(args)
    quarantine = []
    records, audit = [], Counter()
    for path in args.records or ():
        before = len(quarantine)
        recs = list(io.iter_records(path, quarantine))
        audit["records_in"] += len(recs)
        audit["rejected_invalid"] += len(quarantine) - before
        records.extend(recs)
    for path in args.ba_raw or ():
        before = len(quarantine)
        entries = list(io.iter_raw_ba(path, quarantine))
        audit["rejected_invalid"] += len(quarantine) - before
        kept = filter_ambiguous_ba(entries)
        audit["ba_raw_in"] += len(entries)
        audit["ba_ambiguous_dropped"] += len(entries) - len(kept)
        records.extend(ba_entries_to_records(kept))
    if quarantine:
        logger.warning("curate: rejected %d invalid rows", len(quarantine))
    if not records:
        logger.warning("curate: no input records")
    n_before = len(records)
    records = dedup_records(records)
    audit["dedup_removed"] = n_before - len(records)
    occurrences = {}
    if args.antigens:
        antigens = io.read_fasta(args.antigens)
        res = align_antigens(records, antigens.values())
        records = res.records + res.unaligned
        occurrences = res.occurrences
        audit["aligned"] = len(res.records)
        audit["unaligned"] = len(res.unaligned)
        audit["multi_hit_peptides"] = sum(len(h) > 1 for h in res.occurrences.values())
        bad = [r for r in res.records if not check_antigen_link(r, antigens)]
        if bad:
            raise ValidationError(f"{len(bad)} records fail the antigen link check")
    audit["records_out"] = len(records)
    io.write_records(args.out, records)
    if args.occurrences:
        io.write_occurrences(args.occurrences, occurrences)
    if args.quarantine:
        io.write_tsv(args.quarantine, ("line", "reason", "row"),
                     ([str(n), reason, repr(sorted(row.items()))] for n, row, reason in quarantine))
    if args.audit:
        io.write_json(args.audit, _doc("curate", cfg, audit=dict(sorted(audit.items()))))
    return 0


def _task_stats(split: DatasetSplit, k: int) -> dict:
    def locus_counts(recs):
        return dict(sorted(Counter(allele_locus(r.allele) for r in recs).items()))
    return {
        "sizes": {"train": len(split.train), "validation": len(split.validation),
                  "test": len(split.test)},
        "alleles": {"train": len({r.allele for r in split.train}),
                    "test": len({r.allele for r in split.test})},
        "loci": {"train": locus_counts(split.train), "validation": locus_counts(split.validation),
                 "test": locus_counts(split.test)},
        "leakage_test": leakage_report(split.train, split.test, k).count,
        "leakage_validation": leakage_report(split.train, split.validation, k).count,
        "overlap_ratio": split.overlap_ratio,
        "repairs": split.audit,
    }


def cmd_split(args) -> int:
    cfg = _config(args)
    records = io.read_records(args.records)
    by_task = {"BA": [], "EL": []}
    for r in records:
        by_task[r.assay].append(r)
    cands = {t: build_test_split(recs, cfg.year_cutoff) for t, recs in by_task.items()}
    ba, el = apply_split_repairs(DatasetSplit(tuple(cands["BA"][0]), (), tuple(cands["BA"][1])),
                                 DatasetSplit(tuple(cands["EL"][0]), (), tuple(cands["EL"][1])),
                                 k=cfg.k, strict_cross_task=cfg.strict_cross_task)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats = {}
    for task, split in (("BA", ba), ("EL", el)):
        if cfg.validation_mode == "cluster":
            clusters = cluster_peptides({r.peptide for r in split.train}, cfg.cluster_identity)
            train, val = sample_cluster_validation(split.train, clusters, cfg.validation_fraction,
                                                   cfg.k, cfg.seed)
        else:
            train, val = sample_validation(split.train, cfg.validation_fraction,
                                           cfg.overlap_ratio, cfg.seed)
        split = DatasetSplit(tuple(train), tuple(val), split.test, split.audit,
                             peptide_overlap_ratio(val, train))
        split.check_disjoint()
        name = task.lower()
        io.write_records(out / f"{name}_train.tsv", split.train)
        io.write_records(out / f"{name}_validation.tsv", split.validation)
        io.write_records(out / f"{name}_test.tsv", split.test)
        stats[task] = _task_stats(split, cfg.k)
    io.write_json(args.audit or out / "split_audit.json", _doc("split", cfg, tasks=stats))
    return 0


def cmd_augment(args) -> int:
    cfg = _config(args)
    records = io.read_records(args.records)
    antigens = io.read_fasta(args.antigens)
    cores = io.read_cores(args.cores) if args.cores else {}
    anns = annotations_from_records(records, cores)
    sets = augment(records, antigens, anns, cfg.n_negatives, cfg.n_positives, cfg.seed,
                   cfg.length_jitter)
    out = []
    for s in sets:
        out.append(s.anchor)
        out.extend(s.positives)
        out.extend(s.negatives)
    io.write_records(args.out, out)
    if args.audit:
        positives = [r for r in records if r.assay == "EL" and r.label == 1.0]
        rate = neighbor_positive_rate(positives, cfg.neighbor_distance)
        io.write_json(args.audit, _doc("augment", cfg, audit={
            "anchors": len(sets),
            "positive_variants": sum(len(s.positives) for s in sets),
            "negatives": sum(len(s.negatives) for s in sets),
            "anchors_short_of_negatives": sum(len(s.negatives) < cfg.n_negatives for s in sets),
            "neighbor_positive_rate": rate,
        }))
    return 0


def cmd_windows(args) -> int:
    cfg = _config(args)
    records = io.read_records(args.records)
    antigens = io.read_fasta(args.antigens)
    spans = defaultdict(set)
    for a in annotations_from_records(records):
        spans[(a.antigen_id, a.allele)].add(a.span)
    rows, skipped = [], 0
    for (g, allele) in sorted(spans):
        if g not in antigens:
            continue
        try:
            wins = sample_antigen_windows(antigens[g], sorted(spans[(g, allele)]),
                                          cfg.window_draws, cfg.window_sizes, cfg.seed,
                                          allele=allele)
        except NoValidWindow:
            skipped += 1
            continue
        rows.extend((w.antigen_id, allele, w.start, w.end, w.positive) for w in wins)
    io.write_windows(args.out, rows)
    if skipped:
        logger.warning("windows: %d antigen-allele pairs admit no uncut window", skipped)
    return 0


def _read_predictions(paths):
    preds = io.Predictions()
    for p in paths:
        io.read_predictions(p, preds)
    return preds


def cmd_eval(args) -> int:
    cfg = _config(args)
    records = io.read_records(args.records)
    preds = _read_predictions(args.predictions)
    if args.task == "ba":
        metrics = evaluate_ba(records, preds)
    elif args.task == "el":
        metrics = evaluate_el(records, preds, cfg.accuracy_threshold, cfg.mixmhc2_filter)
    else:
        if not args.antigens:
            raise _UsageError(f"eval {args.task} requires --antigens")
        antigens = io.read_fasta(args.antigens)
        if args.task == "epitope":
            metrics = evaluate_epitope(records, antigens, preds, cfg.exclude_other_epitopes,
                                       args.workers)
        else:
            if cfg.mixmhc2_filter:
                from .metrics.peptide import el_filter_mixmhc2
                records, _ = el_filter_mixmhc2(records)
            curves = [] if args.curves else None
            metrics = evaluate_antigen(records, antigens, preds, cfg.window_length, cfg.aggregation,
                                       cfg.threshold_grid, args.workers, curves)
            if args.curves:
                io.write_curves(args.curves, curves)
    io.write_json(args.out, _doc("eval", cfg, metrics=metrics))
    return 0


def cmd_baseline_fit(args) -> int:
    cfg = _config(args)
    records = [r for r in io.read_records(args.records) if r.label >= 0.5]
    cores = io.read_cores(args.cores) if args.cores else {}
    offsets = []
    for r in records:
        c = cores.get((r.peptide, r.allele, r.antigen_id)) if r.antigen_id else None
        offsets.append(None if c is None or r.start is None else c - r.start)
    model = PSSMPredictor(k=cfg.k, pseudocount=args.pseudocount)
    keep = [i for i, r in enumerate(records) if len(r.peptide) >= cfg.k]
    model.fit([(records[i].peptide, records[i].allele) for i in keep],
              cores=[offsets[i] for i in keep])
    model.save(args.model)
    return 0


def cmd_baseline_predict(args) -> int:
    cfg = _config(args)
    model = PSSMPredictor.load(args.model)
    antigens = io.read_fasta(args.antigens)
    records = io.read_records(args.records)
    lengths = defaultdict(set)
    for r in records:
        if r.is_linked and r.antigen_id in antigens and r.allele in model.matrices_:
            key = (r.antigen_id, r.allele)
            lengths[key].add(len(r.peptide))
            lengths[key].add(cfg.window_length)
    rows = []
    for (g, allele), lens in sorted(lengths.items()):
        for n in sorted(lens):
            if n < model.k:
                continue
            scores = model.score_windows(antigens[g].sequence, allele, n)
            rows.extend((g, allele, s, n, float(v)) for s, v in enumerate(scores))
    io.write_window_predictions(args.out, rows)
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    report = {"version": __version__, "config": cfg.to_dict(), "metrics": {}, "audit": {}}
    for path in args.inputs:
        doc = io.read_json(path)
        stage = doc.get("stage")
        if stage == "eval":
            report["metrics"][doc["metrics"]["task"]] = doc["metrics"]
        elif stage in ("curate", "split", "augment"):
            report["audit"][stage] = doc.get("audit", doc.get("tasks"))
        else:
            raise FormatError(f"not a mhc2bench stage document (stage={stage!r})", path)
        if doc.get("config") != cfg.to_dict():
            report.setdefault("config_mismatch", []).append(str(Path(path).name))
    io.write_json(args.out, report)
    return 0


class _UsageError(Mhc2BenchError):
    pass


# ---------------------------------------------------------------------------
# parser


def _common(p, seed=True):
    p.add_argument("--config", help="RunConfig JSON file")
    if seed:
        p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mhc2bench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("curate", help="normalize, deduplicate and align records")
    _common(p)
    p.add_argument("--records", action="append", help="records TSV (repeatable)")
    p.add_argument("--ba-raw", action="append", help="raw BA TSV with ic50 column (repeatable)")
    p.add_argument("--antigens", help="antigen FASTA for peptide alignment")
    p.add_argument("--out", required=True)
    p.add_argument("--audit")
    p.add_argument("--occurrences", help="write every antigen hit per peptide")
    p.add_argument("--quarantine", help="write rejected rows here")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="build leakage-free train/validation/test splits")
    _common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--audit")
    p.add_argument("--k", type=int)
    p.add_argument("--year-cutoff", type=int)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--overlap-ratio", type=float)
    p.add_argument("--validation-mode", choices=("stratified", "cluster"))
    p.add_argument("--cluster-identity", type=float)
    p.add_argument("--strict-cross-task", action="store_true")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="antigen-aware negatives and perturbed positives")
    _common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--antigens", required=True)
    p.add_argument("--cores")
    p.add_argument("--out", required=True)
    p.add_argument("--audit")
    p.add_argument("--n-negatives", type=int)
    p.add_argument("--n-positives", type=int)
    p.add_argument("--length-jitter", type=int)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("windows", help="sample uncut antigen windows")
    _common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--antigens", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window-draws", type=int)
    p.add_argument("--window-sizes", help="comma separated, default 64,128,256,512,1024")
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("eval", help="evaluate external predictions")
    _common(p)
    p.add_argument("task", choices=("ba", "el", "epitope", "antigen"))
    p.add_argument("--records", required=True)
    p.add_argument("--predictions", required=True, action="append")
    p.add_argument("--antigens")
    p.add_argument("--out", required=True)
    p.add_argument("--curves", help="antigen task: write curve points TSV")
    p.add_argument("--window-length", type=int)
    p.add_argument("--aggregation", choices=("max", "mean"))
    p.add_argument("--threshold-grid", choices=("exact", "fixed"))
    p.add_argument("--accuracy-threshold", type=float)
    p.add_argument("--exclude-other-epitopes", action="store_true")
    p.add_argument("--mixmhc2-filter", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="PSSM baseline predictor")
    bsub = p.add_subparsers(dest="baseline_command", required=True, parser_class=_Parser)
    q = bsub.add_parser("fit")
    _common(q)
    q.add_argument("--records", required=True)
    q.add_argument("--cores")
    q.add_argument("--model", required=True)
    q.add_argument("--pseudocount", type=float, default=1.0)
    q.set_defaults(func=cmd_baseline_fit)
    q = bsub.add_parser("predict")
    _common(q)
    q.add_argument("--model", required=True)
    q.add_argument("--antigens", required=True)
    q.add_argument("--records", required=True, help="records whose antigen-allele pairs to score")
    q.add_argument("--out", required=True)
    q.add_argument("--window-length", type=int)
    q.set_defaults(func=cmd_baseline_predict)

    p = sub.add_parser("report", help="merge stage outputs into one report")
    _common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"mhc2bench: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as e:
        print(f"mhc2bench: format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except ValidationError as e:
        print(f"mhc2bench: validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegenerateMetricError as e:
        print(f"mhc2bench: degenerate metric: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as e:
        print(f"mhc2bench: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
