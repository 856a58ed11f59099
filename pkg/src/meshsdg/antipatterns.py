"""Coupling metrics and anti-pattern checks over a dependency graph.

AIS counts distinct callers, ADS distinct callees, ACS is their product.
Cycles are reported as strongly connected components of the service-level
graph; SIY is the number of unordered service pairs that can reach each
other.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .sdg import ServiceDependencyGraph

DEFAULT_DB_PATTERNS = ("mongo", "mysql", "postgres", "redis", "mariadb", "-db")
DEFAULT_VERSION_PATTERN = r"^/api/v[0-9]+(/|$)"


class InvalidPattern(ValueError):
    pass


@dataclass(frozen=True)
class MetricsRow:
    service: str
    in_degree: int
    out_degree: int
    ais: int
    ads: int
    acs: int

    @property
    def note(self) -> str | None:
        if self.ais == 0:
            return "ingress or unconsumed"
        return None


@dataclass(frozen=True)
class CycleReport:
    siy: int
    components: tuple[tuple[str, ...], ...]
    self_loops: tuple[str, ...]
    # pairs with direct edges both ways, for comparison with the path-based siy
    direct_pairs: tuple[tuple[str, str], ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.components and not self.self_loops

    def to_dict(self) -> dict:
        return {
            "siy": self.siy,
            "components": [list(c) for c in self.components],
            "self_loops": list(self.self_loops),
            "direct_pairs": [list(p) for p in self.direct_pairs],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> CycleReport:
        return cls(
            siy=int(data["siy"]),
            components=tuple(tuple(c) for c in data.get("components", [])),
            self_loops=tuple(data.get("self_loops", [])),
            direct_pairs=tuple(tuple(p) for p in data.get("direct_pairs", [])),
        )


@dataclass(frozen=True)
class PersistencyFinding:
    datastore: str
    sharers: tuple[str, ...]


@dataclass(frozen=True)
class VersioningFinding:
    source: str
    destination: str
    endpoint: str
    versioned: bool


@dataclass(frozen=True)
class DatastoreClassifier:
    """Decides whether a service is a datastore by regex search on its name.

    Only the service part of ``<service>.<namespace>`` is matched, so a
    namespace such as ``redis-system`` does not turn every service into a
    datastore.
    """

    patterns: tuple[str, ...] = DEFAULT_DB_PATTERNS
    _compiled: tuple[re.Pattern, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        compiled = []
        for pat in self.patterns:
            try:
                compiled.append(re.compile(pat))
            except re.error as exc:
                raise InvalidPattern(f"bad datastore pattern {pat!r}: {exc}") from None
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "_compiled", tuple(compiled))

    def __call__(self, service: str) -> bool:
        name = service.split(".", 1)[0]
        return any(p.search(name) for p in self._compiled)


def compute_metrics(g: ServiceDependencyGraph) -> list[MetricsRow]:
    rows = []
    for service in sorted(g.nodes):
        ais = len(g.predecessors(service))
        ads = len(g.successors(service))
        rows.append(MetricsRow(service, ais, ads, ais, ads, ais * ads))
    return rows


def strongly_connected_components(
    nodes: Iterable[Hashable], successors: Mapping[Hashable, Iterable[Hashable]]
) -> list[list]:
    """Tarjan's algorithm with an explicit stack (no recursion limit).

    Components come out in reverse topological order of the condensation.
    """
    index: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    result: list[list] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors.get(root, ())))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack and index[w] < lowlink[v]:
                    lowlink[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if lowlink[v] < lowlink[parent]:
                    lowlink[parent] = lowlink[v]
            if lowlink[v] == index[v]:
                component = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    component.append(w)
                    if w == v:
                        break
                result.append(component)
    return result


def detect_cycles(g: ServiceDependencyGraph) -> CycleReport:
    nodes = sorted(g.nodes)
    succ = {n: sorted(g.successors(n)) for n in nodes}
    components = sorted(
        tuple(sorted(c)) for c in strongly_connected_components(nodes, succ) if len(c) >= 2
    )
    siy = sum(len(c) * (len(c) - 1) // 2 for c in components)
    direct = sorted(
        (a, b) for a in nodes for b in succ[a] if a < b and a in g.successors(b)
    )
    return CycleReport(siy, tuple(components), tuple(g.self_loops()), tuple(direct))


def detect_shared_persistency(
    g: ServiceDependencyGraph, classifier: DatastoreClassifier | None = None
) -> list[PersistencyFinding]:
    classifier = classifier or DatastoreClassifier()
    findings = []
    for service in sorted(g.nodes):
        if not classifier(service):
            continue
        sharers = sorted(p for p in g.predecessors(service) if not classifier(p))
        if len(sharers) >= 2:
            findings.append(PersistencyFinding(service, tuple(sharers)))
    return findings


def compile_version_pattern(pattern: str = DEFAULT_VERSION_PATTERN) -> re.Pattern:
    try:
        return re.compile(pattern)
    except re.error as exc:
        raise InvalidPattern(f"bad version pattern {pattern!r}: {exc}") from None


def check_api_versioning(
    g: ServiceDependencyGraph, pattern: str | re.Pattern = DEFAULT_VERSION_PATTERN
) -> list[VersioningFinding]:
    regex = pattern if isinstance(pattern, re.Pattern) else compile_version_pattern(pattern)
    keys = sorted({(k.source, k.destination, k.endpoint) for k in g.weights})
    return [VersioningFinding(s, d, e, regex.search(e) is not None) for s, d, e in keys]


def rank_bottlenecks(rows: Sequence[MetricsRow]) -> list[tuple[str, int]]:
    ordered = sorted(rows, key=lambda r: (-r.acs, r.service))
    return [(r.service, r.acs) for r in ordered]
