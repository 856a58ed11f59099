"""Synthetic sidecar logs rendered from a declared call topology.

The generator is the oracle for the whole pipeline: it knows exactly which
calls it wrote, so a parsed-and-rebuilt graph can be checked edge by edge.
"""

from __future__ import annotations

import json
import logging
import random
import uuid
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping

from .access_log import CLUSTER_SUFFIX, AccessLogEntry, format_timestamp, parse_timestamp, serialize_entry
from .sdg import EdgeKey

log = logging.getLogger(__name__)

_USER_AGENTS = (
    "Apache-HttpClient/4.5.9 (Java/1.8.0_111)",
    "Java/1.8.0_111",
    "python-requests/2.27.1",
)


@dataclass(frozen=True)
class CallSpec:
    source: str
    destination: str
    endpoint: str
    method: str = "GET"
    count: int = 1
    status_code: int = 200


@dataclass(frozen=True)
class TopologySpec:
    services: tuple[str, ...]
    calls: tuple[CallSpec, ...]
    time_span: tuple[datetime, datetime]
    seed: int = 0
    port: int = 80
    mirror_inbound: bool = True
    # external calls per service, written with a PassthroughCluster upstream
    passthrough: int = 0

    def __post_init__(self) -> None:
        start, end = self.time_span
        if not start < end:
            raise ValueError("time_span start must precede end")
        known = set(self.services)
        for call in self.calls:
            if not call.endpoint:
                raise ValueError(f"empty endpoint on call {call}")
            if call.count < 1:
                raise ValueError(f"call count must be >= 1: {call}")
            for svc in (call.source, call.destination):
                if svc not in known:
                    raise ValueError(f"call references undeclared service {svc!r}")

    @property
    def self_calls(self) -> list[CallSpec]:
        return [c for c in self.calls if c.source == c.destination]

    def expected_edges(self) -> Counter:
        expected: Counter = Counter()
        for c in self.calls:
            expected[EdgeKey(c.source, c.destination, c.endpoint.split("?", 1)[0], c.method)] += c.count
        return expected

    @classmethod
    def from_dict(cls, data: Mapping) -> TopologySpec:
        span = data["time_span"]
        start, end = (span["start"], span["end"]) if isinstance(span, Mapping) else span
        return cls(
            services=tuple(data["services"]),
            calls=tuple(CallSpec(**c) for c in data["calls"]),
            time_span=(parse_timestamp(start), parse_timestamp(end)),
            seed=int(data.get("seed", 0)),
            port=int(data.get("port", 80)),
            mirror_inbound=bool(data.get("mirror_inbound", True)),
            passthrough=int(data.get("passthrough", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "services": list(self.services),
            "calls": [
                {
                    "source": c.source,
                    "destination": c.destination,
                    "endpoint": c.endpoint,
                    "method": c.method,
                    "count": c.count,
                    "status_code": c.status_code,
                }
                for c in self.calls
            ],
            "time_span": {"start": format_timestamp(self.time_span[0]), "end": format_timestamp(self.time_span[1])},
            "seed": self.seed,
            "port": self.port,
            "mirror_inbound": self.mirror_inbound,
            "passthrough": self.passthrough,
        }


def load_topology(path: str | Path) -> TopologySpec:
    return TopologySpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Ledger:
    """What the generator wrote, for comparison against parsed output."""

    edges: Counter = field(default_factory=Counter)
    timestamps: dict[EdgeKey, list[datetime]] = field(default_factory=lambda: defaultdict(list))
    files: dict[str, Path] = field(default_factory=dict)
    inbound_records: int = 0
    passthrough_records: int = 0

    @property
    def total(self) -> int:
        return sum(self.edges.values())

    def count_in_window(self, start: datetime | None, end: datetime | None) -> int:
        return sum(
            1
            for stamps in self.timestamps.values()
            for t in stamps
            if (start is None or t >= start) and (end is None or t < end)
        )


class _Rng:
    """Seeded helpers for plausible filler values."""

    def __init__(self, seed: int) -> None:
        self.r = random.Random(seed)

    def ip(self) -> str:
        return f"10.244.{self.r.randrange(0, 4)}.{self.r.randrange(2, 250)}"

    def port(self) -> int:
        return self.r.randrange(32768, 61000)

    def request_id(self) -> str:
        return str(uuid.UUID(int=self.r.getrandbits(128), version=4))

    def stamp(self, start: datetime, span_ms: int) -> datetime:
        return start + timedelta(milliseconds=self.r.randrange(span_ms))


def _host(service: str) -> str:
    return f"{service}{CLUSTER_SUFFIX}"


def generate_logs(spec: TopologySpec, out_dir: str | Path, seed: int | None = None) -> Ledger:
    """Write one ``<service>.log`` per service and return the ledger.

    Every call entry yields ``count`` outbound records in the caller's file;
    with ``mirror_inbound`` each also appears as an inbound record in the
    callee's file.  Output bytes depend only on ``spec`` and ``seed``.
    """
    seed = spec.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for call in spec.self_calls:
        log.warning("self-call declared: %s -> %s %s", call.source, call.destination, call.endpoint)

    rng = _Rng(seed)
    start, end = spec.time_span
    span_ms = max(1, int((end - start).total_seconds() * 1000))
    per_file: dict[str, list[tuple[datetime, int, str]]] = {s: [] for s in spec.services}
    ledger = Ledger()
    seq = 0

    def emit(service: str, stamp: datetime, entry: AccessLogEntry) -> None:
        nonlocal seq
        per_file[service].append((stamp, seq, serialize_entry(entry)))
        seq += 1

    for call in spec.calls:
        dest_short = call.destination.split(".", 1)[0]
        key = EdgeKey(call.source, call.destination, call.endpoint.split("?", 1)[0], call.method)
        for _ in range(call.count):
            stamp = rng.stamp(start, span_ms)
            caller_ip, callee_ip = rng.ip(), rng.ip()
            service_ip = f"10.96.{rng.r.randrange(0, 255)}.{rng.r.randrange(1, 255)}"
            duration = rng.r.randrange(1, 80)
            rid = rng.request_id()
            sent = rng.r.randrange(0, 4096)
            received = rng.r.randrange(0, 512) if call.method != "GET" else 0
            agent = rng.r.choice(_USER_AGENTS)
            outbound = AccessLogEntry(
                start_time=stamp,
                method=call.method,
                path=call.endpoint,
                protocol="HTTP/1.1",
                response_code=call.status_code,
                duration_ms=duration,
                bytes_sent=sent,
                bytes_received=received,
                request_id=rid,
                authority=f"{dest_short}:{spec.port}",
                upstream_cluster=f"outbound|{spec.port}||{_host(call.destination)}",
                upstream_host=f"{callee_ip}:{spec.port}",
                upstream_local_address=f"{caller_ip}:{rng.port()}",
                downstream_local_address=f"{service_ip}:{spec.port}",
                downstream_remote_address=f"{caller_ip}:{rng.port()}",
                response_flags="-",
                user_agent=agent,
            )
            emit(call.source, stamp, outbound)
            ledger.edges[key] += 1
            ledger.timestamps[key].append(stamp)
            if spec.mirror_inbound:
                inbound = AccessLogEntry(
                    start_time=stamp,
                    method=call.method,
                    path=call.endpoint,
                    protocol="HTTP/1.1",
                    response_code=call.status_code,
                    duration_ms=max(0, duration - 1),
                    bytes_sent=sent,
                    bytes_received=received,
                    request_id=rid,
                    authority=f"{dest_short}:{spec.port}",
                    upstream_cluster=f"inbound|{spec.port}||",
                    upstream_host=f"{callee_ip}:{spec.port}",
                    upstream_local_address="127.0.0.6:" + str(rng.port()),
                    downstream_local_address=f"{callee_ip}:{spec.port}",
                    downstream_remote_address=f"{caller_ip}:{rng.port()}",
                    response_flags="-",
                    user_agent=agent,
                )
                emit(call.destination, stamp, inbound)
                ledger.inbound_records += 1

    for service in spec.services:
        for _ in range(spec.passthrough):
            stamp = rng.stamp(start, span_ms)
            entry = AccessLogEntry(
                start_time=stamp,
                method="GET",
                path="/",
                protocol="HTTP/1.1",
                response_code=200,
                duration_ms=rng.r.randrange(1, 200),
                bytes_sent=rng.r.randrange(0, 4096),
                bytes_received=0,
                request_id=rng.request_id(),
                authority="example.com",
                upstream_cluster="PassthroughCluster",
                upstream_host=f"93.184.216.34:443",
                response_flags="-",
            )
            emit(service, stamp, entry)
            ledger.passthrough_records += 1

    for service, records in per_file.items():
        records.sort(key=lambda t: (t[0], t[1]))
        path = out / f"{service}.log"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for _, _, line in records:
                fh.write(line + "\n")
        ledger.files[service] = path
    return ledger
