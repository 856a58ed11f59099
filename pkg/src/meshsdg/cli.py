"""Command-line entry point.

Exit codes:
    0  success
    1  input error (missing logs directory, unreadable file, bad report/topology)
    2  malformed-line ratio above --failure-ratio-limit
    3  usage or configuration error
    4  report schema mismatch (diff / scale-plan)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .access_log import InvalidWindow, parse_timestamp
from .antipatterns import DEFAULT_DB_PATTERNS, DEFAULT_VERSION_PATTERN, DatastoreClassifier, InvalidPattern, rank_bottlenecks
from .evolution import diff_graphs, summarize_diff
from .loggen import generate_logs, load_topology
from .pipeline import AnalyzeOptions, analyze_directory
from .report import (
    ReportSchemaError,
    RenderOptions,
    emit_cycles_text,
    emit_dot,
    emit_metrics_csv,
    emit_report_json,
    emit_summary_text,
    load_report,
)
from .scaling import build_scaling_plan

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILURE_RATIO = 2
EXIT_USAGE = 3
EXIT_SCHEMA = 4

FORMATS = ("dot", "csv", "json", "text")

log = logging.getLogger("meshsdg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for the failure-ratio breach
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _timestamp(text: str):
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _status_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split("-", 1))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LOW-HIGH, e.g. 200-399") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meshsdg", description="Service dependency graphs from mesh access logs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="build the SDG and metrics from a log directory")
    a.add_argument("--config", type=Path, help="JSON file with defaults for any flag below")
    a.add_argument("--logs", type=Path)
    a.add_argument("--manifest", type=Path)
    a.add_argument("--from", dest="start", type=_timestamp)
    a.add_argument("--to", dest="end", type=_timestamp)
    a.add_argument("--out-dir", type=Path)
    a.add_argument("--format", dest="formats", action="append", choices=FORMATS)
    a.add_argument("--db-pattern", dest="db_patterns", action="append")
    a.add_argument("--version-pattern")
    a.add_argument("--collapse-ids", action="store_true", default=None)
    a.add_argument("--failure-ratio-limit", type=float)
    a.add_argument("--status-range", type=_status_range, help="only count these response codes")
    a.add_argument("--top-k", type=int)
    a.add_argument("--jobs", type=int)

    d = sub.add_parser("diff", help="compare two report.json files")
    d.add_argument("old", type=Path)
    d.add_argument("new", type=Path)
    d.add_argument("--out", type=Path, default=Path("diff.json"))
    d.add_argument("--top-k", type=int, default=5)
    d.add_argument("--relative", action="store_true")

    s = sub.add_parser("scale-plan", help="print the scaling plan of a report")
    s.add_argument("report", type=Path)
    s.add_argument("--top-k", type=int)
    s.add_argument("--db-pattern", dest="db_patterns", action="append")
    s.add_argument("--json", action="store_true", help="print JSON instead of a table")

    g = sub.add_parser("gen", help="render a topology into synthetic access logs")
    g.add_argument("--topology", type=Path, required=True)
    g.add_argument("--out-dir", type=Path, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--no-inbound", action="store_true")
    return parser


_ANALYZE_DEFAULTS = {
    "logs": None,
    "manifest": None,
    "start": None,
    "end": None,
    "out_dir": Path("sdg-out"),
    "formats": list(FORMATS),
    "db_patterns": list(DEFAULT_DB_PATTERNS),
    "version_pattern": DEFAULT_VERSION_PATTERN,
    "collapse_ids": False,
    "failure_ratio_limit": 0.25,
    "status_range": None,
    "top_k": None,
    "jobs": None,
}
_CONFIG_KEYS = {
    "logs": Path,
    "manifest": Path,
    "from": parse_timestamp,
    "to": parse_timestamp,
    "out_dir": Path,
    "formats": list,
    "db_patterns": list,
    "version_pattern": str,
    "collapse_ids": bool,
    "failure_ratio_limit": float,
    "status_range": tuple,
    "top_k": int,
    "jobs": int,
}


def resolve_analyze_config(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags."""
    cfg = dict(_ANALYZE_DEFAULTS)
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        for key, value in data.items():
            norm = key.replace("-", "_")
            if norm not in _CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            dest = {"from": "start", "to": "end"}.get(norm, norm)
            cfg[dest] = _CONFIG_KEYS[norm](value) if value is not None else None
    for key in _ANALYZE_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["logs"] is None:
        raise UsageError("--logs is required")
    if not cfg["formats"]:
        raise UsageError("at least one --format is required")
    if not 0 <= cfg["failure_ratio_limit"] <= 1:
        raise UsageError("--failure-ratio-limit must be within [0, 1]")
    if cfg["start"] and cfg["end"] and cfg["start"] > cfg["end"]:
        raise UsageError("--from must not be after --to")
    return cfg


def run_analyze(args: argparse.Namespace) -> int:
    try:
        cfg = resolve_analyze_config(args)
        DatastoreClassifier(tuple(cfg["db_patterns"]))
    except (UsageError, InvalidPattern) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logs_dir: Path = cfg["logs"]
    if not logs_dir.is_dir():
        print(f"error: logs directory not found: {logs_dir}", file=sys.stderr)
        return EXIT_INPUT
    if cfg["manifest"] is not None and not cfg["manifest"].is_file():
        print(f"error: manifest not found: {cfg['manifest']}", file=sys.stderr)
        return EXIT_INPUT

    opts = AnalyzeOptions(
        start=cfg["start"],
        end=cfg["end"],
        db_patterns=tuple(cfg["db_patterns"]),
        version_pattern=cfg["version_pattern"],
        collapse_ids=bool(cfg["collapse_ids"]),
        status_range=cfg["status_range"],
        top_k=cfg["top_k"],
        jobs=cfg["jobs"],
    )
    try:
        report, stats = analyze_directory(logs_dir, cfg["manifest"], opts)
    except InvalidPattern as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidWindow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        return EXIT_INPUT

    if stats.failures:
        print(f"skipped {stats.failures} of {stats.lines} lines as malformed ({stats.failure_ratio:.1%})")
    if stats.failure_ratio > cfg["failure_ratio_limit"]:
        print(
            f"error: malformed-line ratio {stats.failure_ratio:.3f} exceeds limit "
            f"{cfg['failure_ratio_limit']:.3f}",
            file=sys.stderr,
        )
        return EXIT_FAILURE_RATIO
    if stats.files == 0 or not report.graph.nodes:
        print(f"warning: no service calls found under {logs_dir}", file=sys.stderr)

    g = report.graph
    out_dir: Path = cfg["out_dir"]
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = set(cfg["formats"])
    if "dot" in formats:
        (out_dir / "sdg.dot").write_text(emit_dot(g, report.cycles, RenderOptions()), encoding="utf-8")
    if "csv" in formats:
        (out_dir / "metrics.csv").write_text(emit_metrics_csv(report.metrics), encoding="utf-8")
    if "json" in formats:
        (out_dir / "report.json").write_text(
            emit_report_json(
                g,
                report.metrics,
                report.cycles,
                report.persistency,
                report.versioning,
                report.plan,
                config=report.config,
                diagnostics=report.diagnostics,
            ),
            encoding="utf-8",
        )
    lines = emit_cycles_text(report.cycles)
    if "text" in formats:
        lines = lines + emit_summary_text(
            report.metrics, report.cycles, report.persistency, report.versioning,
            rank_bottlenecks(report.metrics),
        )
        (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


def _read_report(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read report {path}: {exc}", file=sys.stderr)
        return None, EXIT_INPUT
    try:
        return load_report(text), EXIT_OK
    except ReportSchemaError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return None, EXIT_SCHEMA


def run_diff(args: argparse.Namespace) -> int:
    old, code = _read_report(args.old)
    if old is None:
        return code
    new, code = _read_report(args.new)
    if new is None:
        return code
    d = diff_graphs(old.graph, new.graph)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(d.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print("\n".join(summarize_diff(d, args.top_k, args.relative, old.graph, new.graph)))
    return EXIT_OK


def run_scale(args: argparse.Namespace) -> int:
    report, code = _read_report(args.report)
    if report is None:
        return code
    patterns = args.db_patterns or report.config.get("db_patterns") or list(DEFAULT_DB_PATTERNS)
    try:
        classifier = DatastoreClassifier(tuple(patterns))
    except InvalidPattern as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    plan = build_scaling_plan(report.graph, report.metrics, classifier, args.top_k)
    if args.json:
        print(json.dumps(plan.to_list(), sort_keys=True, indent=2))
    else:
        sys.stdout.write(plan.format_table())
    return EXIT_OK


def run_gen(args: argparse.Namespace) -> int:
    try:
        spec = load_topology(args.topology)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot load topology {args.topology}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.no_inbound:
        spec = type(spec)(**{**spec.__dict__, "mirror_inbound": False})
    try:
        ledger = generate_logs(spec, args.out_dir, args.seed)
    except OSError as exc:
        print(f"error: cannot write logs to {args.out_dir}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wrote {len(ledger.files)} files, {ledger.total} outbound calls to {args.out_dir}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"analyze": run_analyze, "diff": run_diff, "scale-plan": run_scale, "gen": run_gen}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
