"""Log directory -> graph -> metrics, shared by the CLI and library callers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from functools import reduce
from pathlib import Path
from typing import Sequence

from .access_log import LogSource, ParsedLog, discover_sources, filter_window, read_log_file
from .antipatterns import (
    DEFAULT_DB_PATTERNS,
    DEFAULT_VERSION_PATTERN,
    DatastoreClassifier,
    check_api_versioning,
    compile_version_pattern,
    compute_metrics,
    detect_cycles,
    detect_shared_persistency,
)
from .report import AnalysisReport
from .scaling import build_scaling_plan
from .sdg import ServiceDependencyGraph, build_graph, merge


@dataclass
class AnalyzeOptions:
    start: datetime | None = None
    end: datetime | None = None
    db_patterns: Sequence[str] = DEFAULT_DB_PATTERNS
    version_pattern: str = DEFAULT_VERSION_PATTERN
    collapse_ids: bool = False
    status_range: tuple[int, int] | None = None
    top_k: int | None = None
    jobs: int | None = None
    declared: Sequence[str] = field(default_factory=tuple)


@dataclass
class ParseStats:
    files: int = 0
    lines: int = 0
    failures: int = 0
    windowed_out: int = 0

    @property
    def failure_ratio(self) -> float:
        return self.failures / self.lines if self.lines else 0.0


def _graph_for_file(source: LogSource, opts: AnalyzeOptions) -> tuple[ParsedLog, ServiceDependencyGraph, int]:
    parsed = read_log_file(source.file, source)
    kept = filter_window(parsed.entries, opts.start, opts.end)
    window = (opts.start, opts.end) if opts.start or opts.end else None
    g = build_graph(
        ((source, e) for e in kept),
        collapse_ids=opts.collapse_ids,
        status_range=opts.status_range,
        window=window,
    )
    return parsed, g, len(parsed.entries) - len(kept)


def build_from_sources(
    sources: Sequence[LogSource], opts: AnalyzeOptions
) -> tuple[ServiceDependencyGraph, ParseStats]:
    """Parse every file (concurrently), build one partial graph each, merge."""
    jobs = opts.jobs or os.cpu_count() or 1
    stats = ParseStats(files=len(sources))
    if jobs > 1 and len(sources) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: _graph_for_file(s, opts), sources))
    else:
        results = [_graph_for_file(s, opts) for s in sources]
    graphs = []
    for parsed, g, dropped in results:
        stats.lines += parsed.total_lines
        stats.failures += len(parsed.failures)
        stats.windowed_out += dropped
        graphs.append(g)
    window = (opts.start, opts.end) if opts.start or opts.end else None
    base = build_graph((), window=window, declared=opts.declared)
    return reduce(merge, graphs, base), stats


def analyze_graph(
    g: ServiceDependencyGraph,
    opts: AnalyzeOptions | None = None,
    diagnostics: dict | None = None,
) -> AnalysisReport:
    opts = opts or AnalyzeOptions()
    classifier = DatastoreClassifier(tuple(opts.db_patterns))
    version_re = compile_version_pattern(opts.version_pattern)
    rows = compute_metrics(g)
    return AnalysisReport(
        graph=g,
        metrics=rows,
        cycles=detect_cycles(g),
        persistency=detect_shared_persistency(g, classifier),
        versioning=check_api_versioning(g, version_re),
        plan=build_scaling_plan(g, rows, classifier, opts.top_k),
        config={"db_patterns": list(opts.db_patterns), "version_pattern": opts.version_pattern},
        diagnostics=dict(diagnostics or {}),
    )


def analyze_directory(
    logs_dir: str | Path, manifest: str | Path | None = None, opts: AnalyzeOptions | None = None
) -> tuple[AnalysisReport, ParseStats]:
    opts = opts or AnalyzeOptions()
    sources = discover_sources(logs_dir, manifest)
    if manifest is not None and not opts.declared:
        opts = AnalyzeOptions(**{**opts.__dict__, "declared": tuple(s.service for s in sources)})
    g, stats = build_from_sources(sources, opts)
    diag = g.diagnostics
    report = analyze_graph(
        g,
        opts,
        {
            "files": stats.files,
            "lines": stats.lines,
            "skipped_lines": stats.failures,
            "outside_window": stats.windowed_out,
            "inbound_records": diag.inbound,
            "unknown_direction": diag.unknown,
            "unresolved_destination": diag.unresolved,
            "filtered_status": diag.filtered_status,
        },
    )
    return report, stats
