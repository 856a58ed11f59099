"""Deterministic DOT, CSV, JSON and text emitters."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .antipatterns import (
    CycleReport,
    MetricsRow,
    PersistencyFinding,
    VersioningFinding,
)
from .scaling import ScalingPlan
from .sdg import ServiceDependencyGraph

SCHEMA_VERSION = "1"
CSV_HEADER = ("service_name", "in_degree", "out_degree", "ais", "ads", "acs")
CYCLE_COLOR = "red"


class ReportSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class RenderOptions:
    min_penwidth: float = 1.0
    max_penwidth: float = 5.0
    weight_labels: bool = True
    endpoint_labels: bool = True
    highlight_cycles: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.min_penwidth <= self.max_penwidth:
            raise ValueError("need 0 < min_penwidth <= max_penwidth")


def penwidth(weight: int, max_weight: int, opts: RenderOptions) -> float:
    """Log-scaled stroke width; a graph of equal weights draws everything thin."""
    lo, hi = opts.min_penwidth, opts.max_penwidth
    if max_weight <= 1 or hi == lo:
        return lo
    return lo + (hi - lo) * math.log1p(weight) / math.log1p(max_weight)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(
    g: ServiceDependencyGraph,
    cycles: CycleReport | None = None,
    opts: RenderOptions | None = None,
) -> str:
    opts = opts or RenderOptions()
    if not g.nodes:
        return "digraph sdg { }\n"
    edges = g.edges
    weights = [e.weight for e in edges]
    max_w = max(weights, default=0)
    uniform = len(set(weights)) <= 1
    member = {}
    if cycles is not None and opts.highlight_cycles:
        for i, comp in enumerate(cycles.components):
            for s in comp:
                member[s] = i

    lines = ["digraph sdg {", "  node [shape=box];"]
    for node in sorted(g.nodes):
        lines.append(f"  {_quote(node)};")
    for e in edges:
        attrs = []
        label_parts = []
        if opts.endpoint_labels:
            label_parts.append(e.endpoint)
        if opts.weight_labels:
            label_parts.append(f"({e.weight})")
        if label_parts:
            attrs.append(f"label={_quote(' '.join(label_parts))}")
        width = opts.min_penwidth if uniform else penwidth(e.weight, max_w, opts)
        attrs.append(f"penwidth={width:.3f}")
        if e.source in member and member.get(e.destination) == member[e.source] and e.source != e.destination:
            attrs.append(f"color={CYCLE_COLOR}")
        lines.append(f"  {_quote(e.source)} -> {_quote(e.destination)} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_metrics_csv(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow((r.service, r.in_degree, r.out_degree, r.ais, r.ads, r.acs))
    return buf.getvalue()


def parse_metrics_csv(text: str) -> list[MetricsRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ReportSchemaError(f"unexpected metrics header: {header}")
    return [MetricsRow(r[0], *(int(x) for x in r[1:])) for r in reader if r]


def _row_dict(r: MetricsRow) -> dict:
    return {
        "service_name": r.service,
        "in_degree": r.in_degree,
        "out_degree": r.out_degree,
        "ais": r.ais,
        "ads": r.ads,
        "acs": r.acs,
    }


@dataclass
class AnalysisReport:
    """In-memory form of ``report.json``."""

    graph: ServiceDependencyGraph
    metrics: list[MetricsRow]
    cycles: CycleReport
    persistency: list[PersistencyFinding] = field(default_factory=list)
    versioning: list[VersioningFinding] = field(default_factory=list)
    plan: ScalingPlan = field(default_factory=lambda: ScalingPlan(()))
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def report_to_dict(report: AnalysisReport) -> dict:
    versioned = sum(1 for f in report.versioning if f.versioned)
    return {
        "schema_version": SCHEMA_VERSION,
        "config": report.config,
        "diagnostics": report.diagnostics,
        "graph": report.graph.to_dict(),
        "metrics": [_row_dict(r) for r in report.metrics],
        "cycles": report.cycles.to_dict(),
        "findings": {
            "shared_persistency": [
                {"datastore": f.datastore, "sharers": list(f.sharers)} for f in report.persistency
            ],
            "api_versioning": {
                "total": len(report.versioning),
                "versioned": versioned,
                "edges": [
                    {
                        "source": f.source,
                        "destination": f.destination,
                        "endpoint": f.endpoint,
                        "versioned": f.versioned,
                    }
                    for f in report.versioning
                ],
            },
        },
        "plan": report.plan.to_list(),
    }


def emit_report_json(
    g: ServiceDependencyGraph,
    rows: Sequence[MetricsRow],
    cycles: CycleReport,
    persistency: Sequence[PersistencyFinding],
    versioning: Sequence[VersioningFinding],
    plan: ScalingPlan,
    *,
    config: Mapping | None = None,
    diagnostics: Mapping | None = None,
) -> str:
    report = AnalysisReport(
        g, list(rows), cycles, list(persistency), list(versioning), plan,
        dict(config or {}), dict(diagnostics or {}),
    )
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_report(text: str) -> AnalysisReport:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportSchemaError(f"report is not JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ReportSchemaError("report must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ReportSchemaError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION!r}")
    try:
        findings = data.get("findings", {})
        return AnalysisReport(
            graph=ServiceDependencyGraph.from_dict(data["graph"]),
            metrics=[
                MetricsRow(m["service_name"], m["in_degree"], m["out_degree"], m["ais"], m["ads"], m["acs"])
                for m in data["metrics"]
            ],
            cycles=CycleReport.from_dict(data["cycles"]),
            persistency=[
                PersistencyFinding(f["datastore"], tuple(f["sharers"]))
                for f in findings.get("shared_persistency", [])
            ],
            versioning=[
                VersioningFinding(f["source"], f["destination"], f["endpoint"], f["versioned"])
                for f in findings.get("api_versioning", {}).get("edges", [])
            ],
            plan=ScalingPlan.from_list(data.get("plan", [])),
            config=data.get("config", {}),
            diagnostics=data.get("diagnostics", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportSchemaError(f"malformed report: {exc}") from None


def emit_cycles_text(cycles: CycleReport) -> list[str]:
    if cycles.is_empty:
        return ["no cycles detected"]
    lines = ["cycle: " + " <-> ".join(comp) for comp in cycles.components]
    lines += [f"self-loop: {s}" for s in cycles.self_loops]
    return lines


def emit_summary_text(
    rows: Sequence[MetricsRow],
    cycles: CycleReport,
    persistency: Sequence[PersistencyFinding],
    versioning: Sequence[VersioningFinding],
    bottlenecks: Sequence[tuple[str, int]],
) -> list[str]:
    lines = [f"services: {len(rows)}", f"siy: {cycles.siy}"]
    if bottlenecks and bottlenecks[0][1] > 0:
        top = ", ".join(f"{s} ({acs})" for s, acs in bottlenecks[:3] if acs > 0)
        lines.append(f"highest acs: {top}")
    ingress = [r.service for r in rows if r.note]
    if ingress:
        lines.append("ais 0 (ingress or unconsumed): " + ", ".join(ingress))
    if persistency:
        for f in persistency:
            lines.append(f"shared persistency: {f.datastore} used by {', '.join(f.sharers)}")
    else:
        lines.append("shared persistency: none")
    unversioned = [f for f in versioning if not f.versioned]
    lines.append(f"api versioning: {len(versioning) - len(unversioned)}/{len(versioning)} endpoints versioned")
    for f in unversioned:
        lines.append(f"unversioned: {f.source} -> {f.destination} {f.endpoint}")
    return lines
