from __future__ import annotations

import itertools
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest
from hypothesis import strategies as st

from meshsdg.access_log import AccessLogEntry
from meshsdg.sdg import EdgeKey, ServiceDependencyGraph

FIXTURES = Path(__file__).parent / "fixtures"
T0 = datetime(2022, 5, 26, 6, 0, tzinfo=timezone.utc)

_ids = itertools.count()


def make_entry(
    cluster: str = "outbound|80||b-service.default.svc.cluster.local",
    path: str = "/api/v1/endpoint/",
    method: str = "GET",
    code: int = 200,
    when: datetime | None = None,
    authority: str = "b-service:80",
) -> AccessLogEntry:
    return AccessLogEntry(
        start_time=when or T0,
        method=method,
        path=path,
        protocol="HTTP/1.1",
        response_code=code,
        duration_ms=5,
        bytes_sent=10,
        bytes_received=0,
        request_id=f"req-{next(_ids)}",
        authority=authority,
        upstream_cluster=cluster,
    )


def outbound(dest: str, path: str = "/api/v1/endpoint/", **kw) -> AccessLogEntry:
    return make_entry(cluster=f"outbound|80||{dest}.svc.cluster.local", path=path, **kw)


def graph_of(edges: dict[tuple, int], extra_nodes=()) -> ServiceDependencyGraph:
    """Graph from ``{(src, dst[, endpoint, method]): weight}``."""
    weights = {}
    nodes = set(extra_nodes)
    for key, w in edges.items():
        src, dst, *rest = key
        endpoint = rest[0] if rest else "/api/v1/x"
        method = rest[1] if len(rest) > 1 else "GET"
        weights[EdgeKey(src, dst, endpoint, method)] = w
        nodes |= {src, dst}
    return ServiceDependencyGraph(frozenset(nodes), weights)


SERVICE_NAMES = [f"s{i}.ns" for i in range(10)]


@st.composite
def small_graphs(draw, max_nodes: int = 8, max_edges: int = 24, self_loops: bool = True):
    n = draw(st.integers(min_value=0, max_value=max_nodes))
    names = SERVICE_NAMES[:n]
    if not names:
        return ServiceDependencyGraph.empty()
    keys = st.tuples(
        st.sampled_from(names),
        st.sampled_from(names),
        st.sampled_from(["/api/v1/a", "/api/v2/b", "/health"]),
        st.sampled_from(["GET", "POST"]),
    )
    if not self_loops:
        keys = keys.filter(lambda k: k[0] != k[1])
    edges = draw(st.dictionaries(keys, st.integers(min_value=1, max_value=50), max_size=max_edges))
    isolated = draw(st.sets(st.sampled_from(names)))
    return ServiceDependencyGraph(
        frozenset(isolated) | {k[0] for k in edges} | {k[1] for k in edges},
        {EdgeKey(*k): w for k, w in edges.items()},
    )


@pytest.fixture
def sample_record() -> str:
    return (FIXTURES / "sample-record.json").read_text(encoding="utf-8").strip()


@pytest.fixture(scope="session")
def trainticket_topologies() -> dict[str, dict]:
    return {
        v: json.loads((FIXTURES / f"trainticket-{v}.json").read_text(encoding="utf-8"))
        for v in ("v0.2.1", "v0.1.0")
    }


def minutes(n: float) -> timedelta:
    return timedelta(minutes=n)


# acceptance criteria register their outcome here; printed in the terminal summary
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
