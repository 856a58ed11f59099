"""Differences between two dependency-graph snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .antipatterns import compute_metrics
from .sdg import EdgeKey, ServiceDependencyGraph


@dataclass(frozen=True)
class SdgDiff:
    added_nodes: frozenset[str] = frozenset()
    removed_nodes: frozenset[str] = frozenset()
    added_edges: frozenset[EdgeKey] = frozenset()
    removed_edges: frozenset[EdgeKey] = frozenset()
    weight_changes: Mapping[EdgeKey, tuple[int, int]] = field(default_factory=dict)
    metric_deltas: Mapping[str, tuple[int, int, int]] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not (
            self.added_nodes
            or self.removed_nodes
            or self.added_edges
            or self.removed_edges
            or self.weight_changes
            or self.metric_deltas
        )

    def to_dict(self) -> dict:
        def edge(k: EdgeKey) -> dict:
            return {"source": k.source, "destination": k.destination, "endpoint": k.endpoint, "method": k.method}

        return {
            "added_nodes": sorted(self.added_nodes),
            "removed_nodes": sorted(self.removed_nodes),
            "added_edges": [edge(k) for k in sorted(self.added_edges)],
            "removed_edges": [edge(k) for k in sorted(self.removed_edges)],
            "weight_changes": [
                {**edge(k), "old": old, "new": new}
                for k, (old, new) in sorted(self.weight_changes.items())
            ],
            "metric_deltas": [
                {"service": s, "ais": d[0], "ads": d[1], "acs": d[2]}
                for s, d in sorted(self.metric_deltas.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SdgDiff:
        def key(e: Mapping) -> EdgeKey:
            return EdgeKey(e["source"], e["destination"], e["endpoint"], e["method"])

        return cls(
            added_nodes=frozenset(data["added_nodes"]),
            removed_nodes=frozenset(data["removed_nodes"]),
            added_edges=frozenset(key(e) for e in data["added_edges"]),
            removed_edges=frozenset(key(e) for e in data["removed_edges"]),
            weight_changes={key(e): (e["old"], e["new"]) for e in data["weight_changes"]},
            metric_deltas={
                m["service"]: (m["ais"], m["ads"], m["acs"]) for m in data["metric_deltas"]
            },
        )


def diff_graphs(old: ServiceDependencyGraph, new: ServiceDependencyGraph) -> SdgDiff:
    old_keys = set(old.weights)
    new_keys = set(new.weights)
    changes = {
        k: (old.weights[k], new.weights[k])
        for k in old_keys & new_keys
        if old.weights[k] != new.weights[k]
    }
    old_rows = {r.service: r for r in compute_metrics(old)}
    new_rows = {r.service: r for r in compute_metrics(new)}
    deltas = {}
    for service in old_rows.keys() & new_rows.keys():
        a, b = old_rows[service], new_rows[service]
        delta = (b.ais - a.ais, b.ads - a.ads, b.acs - a.acs)
        if delta != (0, 0, 0):
            deltas[service] = delta
    return SdgDiff(
        added_nodes=frozenset(new.nodes - old.nodes),
        removed_nodes=frozenset(old.nodes - new.nodes),
        added_edges=frozenset(new_keys - old_keys),
        removed_edges=frozenset(old_keys - new_keys),
        weight_changes=changes,
        metric_deltas=deltas,
    )


def _edge_text(k: EdgeKey) -> str:
    return f"{k.source} -> {k.destination} {k.method} {k.endpoint}"


def summarize_diff(
    d: SdgDiff,
    top_k: int = 5,
    relative: bool = False,
    old: ServiceDependencyGraph | None = None,
    new: ServiceDependencyGraph | None = None,
) -> list[str]:
    """Human-readable lines, deterministic order.

    Weight swings are ranked by absolute change.  Only metric deltas that
    move ACS are listed; they print as ``old→new`` when both snapshots are
    given, otherwise as signed deltas.
    """
    if d.is_empty:
        return ["no changes"]
    lines = []
    lines += [f"+ node {n}" for n in sorted(d.added_nodes)]
    lines += [f"- node {n}" for n in sorted(d.removed_nodes)]
    lines += [f"+ edge {_edge_text(k)}" for k in sorted(d.added_edges)]
    lines += [f"- edge {_edge_text(k)}" for k in sorted(d.removed_edges)]

    swings = sorted(d.weight_changes.items(), key=lambda kv: (-abs(kv[1][1] - kv[1][0]), kv[0]))
    for k, (a, b) in swings[:top_k]:
        text = f"~ weight {_edge_text(k)}: {a} -> {b}"
        if relative:
            text += f" ({(b - a) / a:+.1%})"
        lines.append(text)

    old_rows = {r.service: r for r in compute_metrics(old)} if old is not None else {}
    new_rows = {r.service: r for r in compute_metrics(new)} if new is not None else {}
    for service, (dais, dads, dacs) in sorted(d.metric_deltas.items()):
        if dacs == 0:
            continue
        if service in old_rows and service in new_rows:
            a, b = old_rows[service], new_rows[service]
            parts = [
                f"{name} {x}→{y}"
                for name, x, y in (("ais", a.ais, b.ais), ("ads", a.ads, b.ads), ("acs", a.acs, b.acs))
                if x != y
            ]
        else:
            parts = [
                f"{name} {v:+d}" for name, v in (("ais", dais), ("ads", dads), ("acs", dacs)) if v
            ]
        lines.append(f"* metrics {service}: " + ", ".join(parts))
    return lines
