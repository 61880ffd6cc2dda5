"""Command-line entry point.

Usage:
    overlap-lab validate  --manifest m.json [--pred DIR ...]
    overlap-lab overlap   --manifest m.json --pred DIR [DIR ...] [--split test] --out part.json
    overlap-lab subsets   --manifest m.json --pred DIR [DIR ...] [--split test] --out table.json
    overlap-lab ensemble  --manifest m.json --pred DIR [DIR ...] [--mode avg|vote] --out ens.json
    overlap-lab sweep     --manifest m.json --pred DIR [DIR ...] --replicates R --out sweep.json
    overlap-lab remap     --manifest m.json --corrections fix.json --out-manifest new.json [--report drops.json]
    overlap-lab prevalence --annotations log.jsonl --partition part.json [--out prev.json]
    overlap-lab report    --out-dir DIR [--partition L=PATH ...] [--subset-table L=PATH ...]
                          [--ensemble L=PATH ...] [--annotations log.jsonl] [--title T]
    overlap-lab export-hard --partition part.json [--which O] [--out ids.txt]
    overlap-lab serve     --manifest m.json --pred DIR [DIR ...] --images-root DIR
                          --annotations log.jsonl [--port 8710] [--assets-dir DIR]

Exit codes: 0 success, 1 validation error, 2 usage error.  Diagnostics go
to stderr; data goes to files or stdout.  The environment variable
OVERLAP_LAB_LOG (error|warn|info|debug) controls verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from overlap_lab import corrections as corrections_mod
from overlap_lab import ensemble as ensemble_mod
from overlap_lab import overlap as overlap_mod
from overlap_lab import report as report_mod
from overlap_lab import store
from overlap_lab.errors import EmptyImageSet, OverlapLabError

log = logging.getLogger("overlap_lab")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_MODES = {"avg": "cp_avg", "vote": "vote"}


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("OVERLAP_LAB_LOG", "warn"), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overlap-lab",
        description="Prediction-overlap analysis, ensembling, and hard-image triage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_manifest(p: argparse.ArgumentParser) -> None:
        p.add_argument("--manifest", required=True, help="dataset manifest.json")

    def add_preds(p: argparse.ArgumentParser, required: bool = True) -> None:
        p.add_argument(
            "--pred",
            nargs="+",
            action="extend",
            default=[],
            required=required,
            metavar="DIR",
            help="prediction-set directory (repeatable, order preserved)",
        )

    def add_split(p: argparse.ArgumentParser) -> None:
        p.add_argument("--split", choices=["train", "test", "extra"], default="test")

    p = sub.add_parser("validate", help="validate a manifest and prediction sets")
    add_manifest(p)
    add_preds(p, required=False)

    p = sub.add_parser("overlap", help="compute the per-image overlap partition")
    add_manifest(p)
    add_preds(p)
    add_split(p)
    p.add_argument("--out", help="partition JSON output (default: stdout)")

    p = sub.add_parser("subsets", help="per-subset correctness counts, one run per method")
    add_manifest(p)
    add_preds(p)
    add_split(p)
    p.add_argument("--out", help="subset table JSON output (default: stdout)")

    p = sub.add_parser("ensemble", help="build a vote or probability-average ensemble")
    add_manifest(p)
    add_preds(p)
    add_split(p)
    p.add_argument("--mode", choices=sorted(_MODES), default="avg")
    p.add_argument("--out", help="ensemble JSON output (default: stdout)")

    p = sub.add_parser("sweep", help="mean accuracy of every method subset over R disjoint ensembles")
    add_manifest(p)
    add_preds(p)
    add_split(p)
    p.add_argument("--mode", choices=sorted(_MODES), default="avg")
    p.add_argument("--replicates", type=int, required=True, metavar="R")
    p.add_argument("--out", help="sweep JSON output (default: stdout)")

    p = sub.add_parser("remap", help="apply a label-correction table to a manifest")
    add_manifest(p)
    p.add_argument("--corrections", required=True, help="corrections.json")
    p.add_argument("--out-manifest", required=True, help="corrected manifest output")
    p.add_argument("--report", help="JSON report of dropped/relabeled image ids")

    p = sub.add_parser("prevalence", help="error-class prevalence over the hard subset")
    p.add_argument("--annotations", required=True, help="annotations.jsonl journal")
    p.add_argument("--partition", required=True, help="partition JSON defining the hard set")
    p.add_argument("--out", help="prevalence JSON output (default: stdout)")

    p = sub.add_parser("report", help="emit report.json, tables.csv, and charts")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--title", default="Prediction analysis report")
    p.add_argument("--partition", action="append", default=[], metavar="LABEL=PATH")
    p.add_argument("--subset-table", action="append", default=[], metavar="LABEL=PATH")
    p.add_argument("--ensemble", action="append", default=[], metavar="LABEL=PATH")
    p.add_argument("--annotations", help="annotations journal for a prevalence section")
    p.add_argument(
        "--hard-from",
        metavar="LABEL",
        help="partition label defining the hard set (default: first --partition)",
    )

    p = sub.add_parser("export-hard", help="write the image ids of one overlap group")
    p.add_argument("--partition", required=True)
    p.add_argument("--which", type=int, default=0, metavar="O", help="overlap value (default 0)")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("serve", help="run the hard-image triage server")
    add_manifest(p)
    add_preds(p)
    add_split(p)
    p.add_argument("--images-root", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--port", type=int, default=8710)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--assets-dir", help="built UI bundle directory (index.html + assets/)")

    return parser


def _emit(payload_writer, out: str | None) -> None:
    """Write an artifact to a file, or print its JSON to stdout."""
    if out is not None:
        payload_writer(out)
        return
    import tempfile

    with tempfile.TemporaryDirectory(prefix="overlap-lab-") as tmp:
        path = Path(tmp) / "artifact.json"
        payload_writer(path)
        sys.stdout.write(path.read_text(encoding="utf-8"))


def _split_ids(manifest, split: str) -> list[str]:
    ids = manifest.ids_for_split(split)
    if not ids:
        raise EmptyImageSet(f"manifest {manifest.dataset_id!r} has no images in split {split!r}")
    return ids


def _load_runs(args, manifest) -> list:
    runs = [store.load_prediction_set(d, manifest) for d in args.pred]
    log.info("loaded %d prediction sets", len(runs))
    return runs


def _cmd_validate(args) -> int:
    manifest = store.load_manifest(args.manifest)
    counts = manifest.split_counts()
    print(
        f"manifest {manifest.dataset_id}: {manifest.vocabulary.size} classes, "
        f"{manifest.num_images} images "
        f"(train {counts['train']}, test {counts['test']}, extra {counts['extra']})"
    )
    for directory in args.pred:
        ps = store.load_prediction_set(directory, manifest)
        print(
            f"prediction set {directory}: {ps.model_id} "
            f"({ps.method_id} r{ps.replicate_index}), "
            f"{ps.num_images} x {ps.num_classes} scores ok"
        )
    return 0


def _cmd_overlap(args) -> int:
    manifest = store.load_manifest(args.manifest)
    runs = _load_runs(args, manifest)
    partition = overlap_mod.overlap_labels(manifest, runs, _split_ids(manifest, args.split))
    _emit(lambda path: store.write_partition(partition, path), args.out)
    log.info(
        "overlap over %d images: hard=%d easy=%d",
        partition.num_images,
        partition.group_sizes[0],
        partition.group_sizes[-1],
    )
    return 0


def _cmd_subsets(args) -> int:
    manifest = store.load_manifest(args.manifest)
    runs = _load_runs(args, manifest)
    ids = _split_ids(manifest, args.split)
    correct_sets: dict[str, set[str]] = {}
    for run in runs:
        if run.method_id in correct_sets:
            raise ValueError(
                f"two runs share method id {run.method_id!r}; "
                "subsets expects one run per method"
            )
        correct_sets[run.method_id] = overlap_mod.correct_set(run, manifest, ids)
    table = overlap_mod.subset_correctness(correct_sets, ids)
    _emit(lambda path: store.write_subset_table(table, path), args.out)
    return 0


def _cmd_ensemble(args) -> int:
    manifest = store.load_manifest(args.manifest)
    runs = _load_runs(args, manifest)
    ids = _split_ids(manifest, args.split)
    build = ensemble_mod.ENSEMBLE_FUNCTIONS[_MODES[args.mode]]
    result = build(runs, manifest, ids)
    _emit(lambda path: store.write_ensemble_result(result, path), args.out)
    log.info("%s ensemble accuracy: %s%%", result.rule, report_mod.format_percent(result.accuracy))
    return 0


def _cmd_sweep(args) -> int:
    manifest = store.load_manifest(args.manifest)
    runs = _load_runs(args, manifest)
    ids = _split_ids(manifest, args.split)
    runs_by_method: dict[str, list] = {}
    for run in runs:
        runs_by_method.setdefault(run.method_id, []).append(run)
    for method, method_runs in runs_by_method.items():
        if len(method_runs) != args.replicates:
            from overlap_lab.errors import ReplicateCountMismatch

            raise ReplicateCountMismatch(method, args.replicates, len(method_runs))
    rule = _MODES[args.mode]
    means = ensemble_mod.sweep_subsets(runs_by_method, manifest, ids, rule)
    methods = list(runs_by_method)
    payload = {
        "format_version": 1,
        "rule": rule,
        "replicates": args.replicates,
        "methods": methods,
        "subsets": [
            {
                "mask": mask,
                "methods": [m for j, m in enumerate(methods) if mask >> j & 1],
                "mean_accuracy": {
                    "numerator": means[mask].numerator,
                    "denominator": means[mask].denominator,
                    "percent": report_mod.format_percent(means[mask]),
                },
            }
            for mask in sorted(means)
        ],
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_remap(args) -> int:
    manifest = store.load_manifest(args.manifest)
    table = store.load_corrections(args.corrections)
    corrected, dropped, relabeled = corrections_mod.apply_corrections(manifest, table)
    store.write_manifest(corrected, args.out_manifest)
    payload = {
        "dataset_id": corrected.dataset_id,
        "num_images": corrected.num_images,
        "dropped": dropped,
        "relabeled": relabeled,
    }
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    log.info("remap: %d relabeled, %d dropped", len(relabeled), len(dropped))
    return 0


def _cmd_prevalence(args) -> int:
    entries = store.read_annotations(args.annotations)
    partition = store.load_partition(args.partition)
    resolved = report_mod.resolve_annotations(entries)
    prev = report_mod.prevalence(resolved, partition.hard_ids)
    payload = report_mod.prevalence_payload(
        prev, report_mod.conflicting_annotations(entries)
    )
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _parse_labeled(values: list[str], flag: str) -> list[tuple[str, str]]:
    pairs = []
    for value in values:
        label, sep, path = value.partition("=")
        if not sep or not label or not path:
            raise ValueError(f"{flag} expects LABEL=PATH, got {value!r}")
        pairs.append((label, path))
    return pairs


def _cmd_report(args) -> int:
    overlaps = [
        (label, store.load_partition(path))
        for label, path in _parse_labeled(args.partition, "--partition")
    ]
    subset_tables = [
        (label, store.load_subset_table(path))
        for label, path in _parse_labeled(args.subset_table, "--subset-table")
    ]
    ensembles = [
        (label, store.load_ensemble_result(path))
        for label, path in _parse_labeled(args.ensemble, "--ensemble")
    ]
    prev = None
    disagreements = None
    if args.annotations:
        if not overlaps:
            raise ValueError("--annotations needs at least one --partition for the hard set")
        by_label = dict(overlaps)
        if args.hard_from is not None:
            if args.hard_from not in by_label:
                raise ValueError(f"--hard-from {args.hard_from!r} matches no --partition label")
            hard_partition = by_label[args.hard_from]
        else:
            hard_partition = overlaps[0][1]
        entries = store.read_annotations(args.annotations)
        resolved = report_mod.resolve_annotations(entries)
        prev = report_mod.prevalence(resolved, hard_partition.hard_ids)
        disagreements = report_mod.conflicting_annotations(entries)
    written = report_mod.emit_report(
        args.out_dir,
        title=args.title,
        overlaps=overlaps,
        subset_tables=subset_tables,
        ensembles=ensembles,
        prevalence_report=prev,
        disagreements=disagreements,
    )
    for path in written:
        log.info("wrote %s", path)
    return 0


def _cmd_export_hard(args) -> int:
    partition = store.load_partition(args.partition)
    ids = overlap_mod.export_subset(partition, args.which)
    text = "".join(image_id + "\n" for image_id in ids)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_serve(args) -> int:
    from overlap_lab.server import TriageServer

    manifest = store.load_manifest(args.manifest)
    runs = _load_runs(args, manifest)
    partition = overlap_mod.overlap_labels(manifest, runs, _split_ids(manifest, args.split))
    server = TriageServer(
        manifest=manifest,
        partition=partition,
        runs=runs,
        images_root=args.images_root,
        annotations_path=args.annotations,
        port=args.port,
        host=args.host,
        assets_dir=args.assets_dir,
    )
    print(f"serving on http://{args.host}:{server.port}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "overlap": _cmd_overlap,
    "subsets": _cmd_subsets,
    "ensemble": _cmd_ensemble,
    "sweep": _cmd_sweep,
    "remap": _cmd_remap,
    "prevalence": _cmd_prevalence,
    "report": _cmd_report,
    "export-hard": _cmd_export_hard,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _HANDLERS[args.command](args)
    except (OverlapLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
