"""Command-line entry point: ``crashsev <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .diagnostics import DataError
from .ingest import (CrashSchema, SegmentSchema, build_dataset_views, linear_join,
                     parse_crash_csv, parse_segments_csv, read_joined_csv, write_join_diagnostics,
                     write_joined_csv)
from .metrics import IssRecord, iss_validate
from .prep import screen_view
from .records import Severity

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
log = logging.getLogger("crashsev")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def cmd_synth(args) -> int:
    from .harness.synth import SynthParams, generate_synthetic

    try:
        params = SynthParams.from_dict(_load_json(args.params)) if args.params else SynthParams()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad synthetic parameters: {exc}") from exc
    data = generate_synthetic(params, args.seed)
    paths = data.write(args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return EXIT_OK


def cmd_ingest(args) -> int:
    crash_schema, seg_schema = CrashSchema(), SegmentSchema()
    if args.schema:
        doc = _load_json(args.schema)
        try:
            crash_schema = CrashSchema.from_dict(doc.get("crash", {}))
            seg_schema = SegmentSchema.from_dict(doc.get("segments", {}))
        except TypeError as exc:
            raise UsageError(f"bad schema file: {exc}") from exc
    crashes = parse_crash_csv(args.crashes, crash_schema)
    segments = parse_segments_csv(args.segments, seg_schema)
    joined = linear_join(crashes.records, segments.records, crash_schema.police_speed_field,
                         seg_schema.freeway_classes)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_joined_csv(joined.records, out)
    diag_path = out.with_suffix(".diagnostics.json")
    write_join_diagnostics(joined, diag_path, crash_rows_dropped=crashes.dropped,
                           crash_parse=crashes.diagnostics.to_dict(),
                           segment_parse=segments.diagnostics.to_dict())
    print(json.dumps(joined.summary(), sort_keys=True))
    return EXIT_OK


def _load_data(path, min_per_class):
    from .harness.pipeline import ExperimentData

    records = read_joined_csv(path)
    if not records:
        raise DataError(f"{path} holds no records")
    return ExperimentData.from_records(records, min_per_class)


def cmd_views(args) -> int:
    records = read_joined_csv(args.data)
    labels = {r.record_id: int(r.severity) for r in records}
    views = [screen_view(v, labels, args.min_per_class) for v in build_dataset_views(records)]
    doc = json.dumps([v.to_dict() for v in views], indent=2)
    if args.out:
        Path(args.out).write_text(doc)
    else:
        print(doc)
    return EXIT_OK


def _write_predictions(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config_id", "record_id", "true", "predicted"])
        for r in results:
            for rid, t, p in zip(r.test_row_ids, r.test_true, r.test_pred):
                w.writerow([r.config.config_id, rid, int(t), int(p)])


def cmd_run_matrix(args) -> int:
    from .harness.config import Settings
    from .harness.pipeline import enumerate_experiments
    from .harness.plots import render_figures
    from .harness.report import FORMATS, emit_report
    from .harness.runner import run_matrix

    if args.config:
        try:
            settings = Settings.from_dict(_load_json(args.config))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config file: {exc}") from exc
    else:
        settings = Settings()
    data = _load_data(args.data, settings.split.min_per_class)
    configs = enumerate_experiments(list(data.views.values()), args.baseline, args.seed)
    if args.only:
        wanted = set(args.only)
        configs = [c for c in configs if c.view_id in wanted]
        if not configs:
            raise UsageError(f"--only matched no views: {sorted(wanted)}")
    matrix = run_matrix(data, configs, settings, args.jobs)

    out = Path(args.out_dir)
    man_dir = out / "manifests"
    man_dir.mkdir(parents=True, exist_ok=True)
    timings = {}
    for r in matrix.results:
        name = r.config.config_id.replace("|", "__")
        (man_dir / f"{name}.json").write_text(r.manifest.to_json())
        (man_dir / f"{name}.report.json").write_text(r.report.to_json())
        timings[r.config.config_id] = r.manifest.timings
    (out / "timings.json").write_text(json.dumps(
        {"wall_seconds": matrix.wall_seconds, "jobs": args.jobs, "per_view": matrix.task_seconds,
         "per_config": timings},
        indent=2, sort_keys=True))
    (out / "settings.json").write_text(json.dumps(settings.to_dict(), indent=2, sort_keys=True))
    _write_predictions(matrix.results, out / "predictions.csv")
    pairs = [(r.config, r.report) for r in matrix.results]
    if pairs:
        for fmt in FORMATS:
            emit_report(pairs, None, fmt, out, matrix.skipped)
        if not args.no_figures:
            render_figures(pairs, out / "figures")
    if matrix.failures:
        (out / "failures.json").write_text(json.dumps(
            {cfg.config_id: msg for cfg, msg in matrix.failures}, indent=2))
    print(json.dumps({"configs": len(configs), "evaluated": len(matrix.results),
                      "skipped": len(matrix.skipped), "failed": len(matrix.failures),
                      "wall_seconds": round(matrix.wall_seconds, 1)}))
    return EXIT_INTERNAL if matrix.failures else EXIT_OK


def cmd_rank(args) -> int:
    from .harness.report import compute_rankings, emit_report, results_from_csv

    try:
        text = Path(args.results).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {args.results}: {exc}") from exc
    try:
        results = results_from_csv(text)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{args.results} is not a results CSV: {exc}") from exc
    if not results:
        raise DataError(f"{args.results} holds no results")
    rankings = compute_rankings(results)
    for path in emit_report(results, rankings, args.format, args.out_dir):
        print(path)
    return EXIT_OK


def _read_csv(path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def cmd_validate_iss(args) -> int:
    preds = _read_csv(args.predictions)
    iss_rows = _read_csv(args.iss_file)
    try:
        iss = {row["record_id"]: int(row["iss"]) for row in iss_rows}
    except (KeyError, ValueError) as exc:
        raise DataError(f"{args.iss_file}: expected record_id,iss columns ({exc})") from exc
    configs = sorted({row["config_id"] for row in preds if "config_id" in row})
    config_id = args.config_id
    if config_id is None:
        if len(configs) > 1:
            raise UsageError(f"predictions hold {len(configs)} configs; pick one with "
                             "--config-id")
        config_id = configs[0] if configs else None
    records = []
    for row in preds:
        if config_id is not None and row.get("config_id") != config_id:
            continue
        if row["record_id"] in iss:
            try:
                records.append(IssRecord(Severity(int(row["predicted"])), iss[row["record_id"]]))
            except ValueError as exc:
                raise DataError(f"record {row['record_id']}: {exc}") from exc
    if not records:
        raise DataError("no predicted record has a linked ISS value")
    result = iss_validate(records)
    doc = {"config_id": config_id, "linked_records": len(records), **result.to_dict()}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        if args.figure:
            from .harness.plots import plot_iss
            plot_iss(result, Path(args.out).with_suffix(".png"))
    print(text)
    return EXIT_OK


def cmd_defaults(args) -> int:
    from .harness.config import Settings

    print(json.dumps(Settings().to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crashsev", description="Crash severity modeling with narrative features.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic crash, segment and ISS dataset")
    s.add_argument("--params", help="JSON file of generator parameters")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="join crash and segment CSVs by route and milepoint")
    s.add_argument("--crashes", required=True)
    s.add_argument("--segments", required=True)
    s.add_argument("--schema", help="JSON with 'crash' and 'segments' column mappings")
    s.add_argument("--out", required=True, help="joined dataset CSV")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("views", help="emit the 17-view manifest for a joined dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--min-per-class", type=int, default=10)
    s.add_argument("--out")
    s.set_defaults(func=cmd_views)

    s = sub.add_parser("run-matrix", help="run every (view, featurizer, model) config")
    s.add_argument("--data", required=True, help="joined dataset CSV")
    s.add_argument("--config", help="settings JSON (see 'crashsev defaults')")
    s.add_argument("--seed", type=int, default=0, help="master seed")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--baseline", action="store_true",
                   help="also run structured-only (featurizer None) configs")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--only", nargs="+", metavar="VIEW_ID", help="restrict to these views")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_run_matrix)

    s = sub.add_parser("rank", help="rank views per road class from a results CSV")
    s.add_argument("--results", required=True)
    s.add_argument("--format", default="markdown", choices=["csv", "json", "markdown"])
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("validate-iss", help="cross-tabulate predictions against ISS bands")
    s.add_argument("--predictions", required=True)
    s.add_argument("--iss-file", required=True)
    s.add_argument("--config-id")
    s.add_argument("--out")
    s.add_argument("--figure", action="store_true", help="also render a PNG next to --out")
    s.set_defaults(func=cmd_validate_iss)

    s = sub.add_parser("defaults", help="print the default settings JSON")
    s.set_defaults(func=cmd_defaults)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"crashsev: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("crashsev: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"crashsev: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"crashsev: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        from .harness.pipeline import StageError

        if isinstance(exc, StageError) and isinstance(exc.cause, DataError):
            print(f"crashsev: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        log.exception("internal error")
        print(f"crashsev: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
