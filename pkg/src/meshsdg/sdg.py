"""The weighted, endpoint-labelled service dependency graph."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

from .access_log import (
    AccessLogEntry,
    Direction,
    LogSource,
    classify_direction,
    destination_service,
    format_timestamp,
    normalize_path,
    parse_timestamp,
)

Window = tuple["datetime | None", "datetime | None"]


class UnknownService(KeyError):
    pass


class WindowMismatch(ValueError):
    pass


class EdgeKey(NamedTuple):
    source: str
    destination: str
    endpoint: str
    method: str


@dataclass(frozen=True)
class SdgEdge:
    source: str
    destination: str
    endpoint: str
    method: str
    weight: int

    @property
    def key(self) -> EdgeKey:
        return EdgeKey(self.source, self.destination, self.endpoint, self.method)


@dataclass
class BuildDiagnostics:
    """Counters for records that did not become edge weight."""

    inbound: int = 0
    unknown: int = 0
    unresolved: int = 0
    filtered_status: int = 0
    status_codes: Counter = field(default_factory=Counter)

    def __add__(self, other: BuildDiagnostics) -> BuildDiagnostics:
        return BuildDiagnostics(
            inbound=self.inbound + other.inbound,
            unknown=self.unknown + other.unknown,
            unresolved=self.unresolved + other.unresolved,
            filtered_status=self.filtered_status + other.filtered_status,
            status_codes=self.status_codes + other.status_codes,
        )


@dataclass(frozen=True, eq=False)
class ServiceDependencyGraph:
    nodes: frozenset[str]
    weights: Mapping[EdgeKey, int]
    window: Window | None = None
    diagnostics: BuildDiagnostics = field(default_factory=BuildDiagnostics)

    def __post_init__(self) -> None:
        weights = {EdgeKey(*k): int(w) for k, w in self.weights.items()}
        for key, w in weights.items():
            if w < 1:
                raise ValueError(f"edge {key} has non-positive weight {w}")
            if key.source not in self.nodes or key.destination not in self.nodes:
                raise ValueError(f"edge {key} references a service outside the node set")
        object.__setattr__(self, "weights", MappingProxyType(weights))
        object.__setattr__(self, "nodes", frozenset(self.nodes))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ServiceDependencyGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and dict(self.weights) == dict(other.weights)
            and self.window == other.window
        )

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def empty(cls) -> ServiceDependencyGraph:
        return cls(frozenset(), {})

    @property
    def total_requests(self) -> int:
        return sum(self.weights.values())

    @property
    def edges(self) -> list[SdgEdge]:
        return [SdgEdge(*k, w) for k, w in sorted(self.weights.items())]

    @cached_property
    def _succ(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = defaultdict(set)
        for k in self.weights:
            if k.source != k.destination:
                out[k.source].add(k.destination)
        return {n: frozenset(out.get(n, ())) for n in self.nodes}

    @cached_property
    def _pred(self) -> dict[str, frozenset[str]]:
        inc: dict[str, set[str]] = defaultdict(set)
        for k in self.weights:
            if k.source != k.destination:
                inc[k.destination].add(k.source)
        return {n: frozenset(inc.get(n, ())) for n in self.nodes}

    @cached_property
    def _weight_in(self) -> Counter:
        c: Counter = Counter()
        for k, w in self.weights.items():
            c[k.destination] += w
        return c

    @cached_property
    def _weight_out(self) -> Counter:
        c: Counter = Counter()
        for k, w in self.weights.items():
            c[k.source] += w
        return c

    def _check(self, service: str) -> None:
        if service not in self.nodes:
            raise UnknownService(service)

    def successors(self, service: str) -> frozenset[str]:
        self._check(service)
        return self._succ[service]

    def predecessors(self, service: str) -> frozenset[str]:
        self._check(service)
        return self._pred[service]

    def inbound_weight(self, service: str) -> int:
        self._check(service)
        return self._weight_in[service]

    def outbound_weight(self, service: str) -> int:
        self._check(service)
        return self._weight_out[service]

    def self_loops(self) -> list[str]:
        return sorted({k.source for k in self.weights if k.source == k.destination})

    def service_edges(self) -> dict[tuple[str, str], int]:
        """Service-level adjacency with endpoint weights summed."""
        agg: dict[tuple[str, str], int] = defaultdict(int)
        for k, w in self.weights.items():
            agg[(k.source, k.destination)] += w
        return dict(agg)

    # -- snapshots ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": [
                {
                    "source": e.source,
                    "destination": e.destination,
                    "endpoint": e.endpoint,
                    "method": e.method,
                    "weight": e.weight,
                }
                for e in self.edges
            ],
            "window": _window_to_json(self.window),
            "total_requests": self.total_requests,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> ServiceDependencyGraph:
        weights = {}
        for e in data.get("edges", []):
            key = EdgeKey(e["source"], e["destination"], e["endpoint"], e["method"])
            if key in weights:
                raise ValueError(f"duplicate edge in snapshot: {key}")
            weights[key] = int(e["weight"])
        graph = cls(frozenset(data.get("nodes", [])), weights, _window_from_json(data.get("window")))
        declared = data.get("total_requests")
        if declared is not None and int(declared) != graph.total_requests:
            raise ValueError(
                f"snapshot total_requests {declared} does not match edge weights {graph.total_requests}"
            )
        return graph

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> ServiceDependencyGraph:
        return cls.from_dict(json.loads(text))


def _window_to_json(window: Window | None) -> dict | None:
    if window is None:
        return None
    start, end = window
    return {
        "from": format_timestamp(start) if start else None,
        "to": format_timestamp(end) if end else None,
    }


def _window_from_json(data: Mapping | None) -> Window | None:
    if data is None:
        return None
    start = data.get("from")
    end = data.get("to")
    return (parse_timestamp(start) if start else None, parse_timestamp(end) if end else None)


class GraphBuilder:
    """Accumulates outbound records into edge weights.

    Only outbound records produce edges; the callee's sidecar sees the same
    call as inbound, so counting both would double every weight.
    """

    def __init__(
        self,
        *,
        collapse_ids: bool = False,
        status_range: tuple[int, int] | None = None,
        window: Window | None = None,
    ) -> None:
        self.collapse_ids = collapse_ids
        self.status_range = status_range
        self.window = window
        self.nodes: set[str] = set()
        self.weights: Counter = Counter()
        self.diagnostics = BuildDiagnostics()

    def declare(self, service: str) -> None:
        self.nodes.add(service)

    def add(self, source: LogSource, entry: AccessLogEntry) -> None:
        direction = classify_direction(entry)
        diag = self.diagnostics
        if direction is Direction.INBOUND:
            diag.inbound += 1
            return
        if direction is Direction.UNKNOWN:
            diag.unknown += 1
            return
        dest = destination_service(entry, source.namespace)
        if dest is None:
            diag.unresolved += 1
            return
        diag.status_codes[entry.response_code] += 1
        if self.status_range is not None:
            lo, hi = self.status_range
            if not lo <= entry.response_code <= hi:
                diag.filtered_status += 1
                return
        endpoint = normalize_path(entry.path, self.collapse_ids)
        self.weights[EdgeKey(source.service, dest, endpoint, entry.method)] += 1
        self.nodes.add(source.service)
        self.nodes.add(dest)

    def build(self) -> ServiceDependencyGraph:
        return ServiceDependencyGraph(
            frozenset(self.nodes), dict(self.weights), self.window, self.diagnostics
        )


def build_graph(
    records: Iterable[tuple[LogSource, AccessLogEntry]],
    *,
    collapse_ids: bool = False,
    status_range: tuple[int, int] | None = None,
    window: Window | None = None,
    declared: Iterable[str] = (),
) -> ServiceDependencyGraph:
    """Build an SDG from ``(source, entry)`` pairs.

    Records are expected to be window-filtered already; ``window`` is only
    stamped on the result.  ``declared`` services become nodes even if they
    never appear on an edge.
    """
    builder = GraphBuilder(collapse_ids=collapse_ids, status_range=status_range, window=window)
    for service in declared:
        builder.declare(service)
    for source, entry in records:
        builder.add(source, entry)
    return builder.build()


def _windows_overlap(a: Window, b: Window) -> bool:
    a_start, a_end = a
    b_start, b_end = b
    if a_end is not None and b_start is not None and a_end <= b_start:
        return False
    if b_end is not None and a_start is not None and b_end <= a_start:
        return False
    return True


def _merge_windows(a: Window | None, b: Window | None, strict: bool) -> Window | None:
    # an unset window carries no information and acts as the identity
    if a is None or b is None:
        return a if b is None else b
    if strict and not _windows_overlap(a, b):
        raise WindowMismatch(f"disjoint windows: {a} and {b}")
    starts = [a[0], b[0]]
    ends = [a[1], b[1]]
    start = None if None in starts else min(starts)
    end = None if None in ends else max(ends)
    return (start, end)


def merge(
    g1: ServiceDependencyGraph, g2: ServiceDependencyGraph, *, strict: bool = False
) -> ServiceDependencyGraph:
    """Union of nodes with edge-wise weight addition."""
    weights: Counter = Counter(dict(g1.weights))
    weights.update(dict(g2.weights))
    return ServiceDependencyGraph(
        g1.nodes | g2.nodes,
        dict(weights),
        _merge_windows(g1.window, g2.window, strict),
        g1.diagnostics + g2.diagnostics,
    )
