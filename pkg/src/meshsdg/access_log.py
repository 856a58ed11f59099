"""Parsing of Envoy/Istio JSON access-log records.

Each sidecar writes one JSON object per line.  The record never names the
calling service, so the caller's identity comes from where the file was
collected (a :class:`LogSource`).
"""

from __future__ import annotations

import enum
import ipaddress
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

CLUSTER_SUFFIX = ".svc.cluster.local"

_TIMESTAMP_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?"
    r"(Z|z|[+-]\d{2}:?\d{2})$"
)
_UUID_RE = re.compile(
    r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$"
)


class Direction(str, enum.Enum):
    INBOUND = "inbound"
    OUTBOUND = "outbound"
    UNKNOWN = "unknown"


class ParseFailure(ValueError):
    """A line that could not be turned into an :class:`AccessLogEntry`."""

    def __init__(self, reason: str, line_no: int | None = None) -> None:
        super().__init__(reason)
        self.reason = reason
        self.line_no = line_no


class InvalidWindow(ValueError):
    pass


@dataclass(frozen=True)
class LogSource:
    service: str
    file: str = ""

    def __post_init__(self) -> None:
        if not is_service_id(self.service):
            raise ValueError(f"invalid service id for log source: {self.service!r}")

    @property
    def namespace(self) -> str | None:
        _, _, ns = self.service.partition(".")
        return ns or None


@dataclass(frozen=True)
class AccessLogEntry:
    start_time: datetime
    method: str
    path: str
    protocol: str
    response_code: int
    duration_ms: int
    bytes_sent: int
    bytes_received: int
    request_id: str
    authority: str
    upstream_cluster: str
    upstream_host: str | None = None
    upstream_local_address: str | None = None
    downstream_local_address: str | None = None
    downstream_remote_address: str | None = None
    response_flags: str = "-"
    user_agent: str | None = None


@dataclass
class ParsedLog:
    """Everything read from one sidecar file."""

    source: LogSource
    entries: list[AccessLogEntry] = field(default_factory=list)
    failures: list[ParseFailure] = field(default_factory=list)

    @property
    def total_lines(self) -> int:
        return len(self.entries) + len(self.failures)


# -- identities ---------------------------------------------------------------


def is_service_id(name: str) -> bool:
    if not name or "|" in name or ":" in name or "/" in name:
        return False
    return not name.endswith(CLUSTER_SUFFIX)


def normalize_service_name(host: str, default_namespace: str | None = None) -> str | None:
    """Turn a DNS-ish host into ``<service>.<namespace>``.

    Ports, the cluster-local suffix and surrounding whitespace are dropped.
    Bare IP addresses are not service identities and yield ``None``.
    """
    host = host.strip().lower()
    if not host:
        return None
    if host.startswith("["):  # bracketed IPv6 literal
        return None
    if host.count(":") == 1:
        host = host.split(":", 1)[0]
    try:
        ipaddress.ip_address(host)
        return None
    except ValueError:
        pass
    if host.endswith(CLUSTER_SUFFIX):
        host = host[: -len(CLUSTER_SUFFIX)]
    elif host.endswith(".svc"):
        host = host[:-4]
    if not host or "|" in host or ":" in host:
        return None
    if "." not in host:
        if not default_namespace:
            return None
        host = f"{host}.{default_namespace}"
    return host


# -- timestamps ---------------------------------------------------------------


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp (``Z`` or numeric offset) into aware UTC."""
    m = _TIMESTAMP_RE.match(text.strip()) if isinstance(text, str) else None
    if m is None:
        raise ValueError(f"not an RFC3339 timestamp: {text!r}")
    year, month, day, hour, minute, second, frac, tz = m.groups()
    micro = int((frac or "0")[:6].ljust(6, "0"))
    if tz in ("Z", "z"):
        offset = timezone.utc
    else:
        sign = 1 if tz[0] == "+" else -1
        digits = tz[1:].replace(":", "")
        offset = timezone(sign * timedelta(hours=int(digits[:2]), minutes=int(digits[2:])))
    dt = datetime(
        int(year), int(month), int(day), int(hour), int(minute), int(second), micro, offset
    )
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Millisecond-precision UTC timestamp with a trailing ``Z``."""
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


# -- parsing ------------------------------------------------------------------


def _opt_str(record: dict, key: str) -> str | None:
    value = record.get(key)
    if value is None:
        return None
    return str(value)


def _non_negative_int(record: dict, key: str) -> int:
    value = record.get(key, 0)
    if value is None:
        return 0
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ParseFailure(f"field {key!r} is not an integer: {value!r}") from None
    if number < 0:
        raise ParseFailure(f"field {key!r} is negative")
    return number


def parse_line(line: str, source: LogSource | None = None) -> AccessLogEntry:
    """Parse one JSON access-log line.

    Raises :class:`ParseFailure` for blank or non-JSON lines, records without
    an ``upstream_cluster``, and records whose ``start_time`` or
    ``response_code`` is unusable.  Unknown keys are ignored.
    """
    text = line.strip()
    if not text:
        raise ParseFailure("empty line")
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"not JSON: {exc.msg}") from None
    if not isinstance(record, dict):
        raise ParseFailure("JSON value is not an object")

    cluster = record.get("upstream_cluster")
    if not isinstance(cluster, str) or not cluster:
        raise ParseFailure("missing upstream_cluster")
    try:
        start = parse_timestamp(record.get("start_time"))
    except ValueError:
        raise ParseFailure("unparseable start_time") from None

    try:
        code = int(record.get("response_code"))
    except (TypeError, ValueError):
        raise ParseFailure("missing or non-integer response_code") from None
    if not 100 <= code <= 599:
        raise ParseFailure(f"response_code out of range: {code}")

    method = record.get("method")
    path = record.get("path")
    if not isinstance(method, str) or not method:
        raise ParseFailure("missing method")
    if not isinstance(path, str) or not path:
        raise ParseFailure("missing path")

    return AccessLogEntry(
        start_time=start,
        method=method,
        path=path,
        protocol=str(record.get("protocol") or ""),
        response_code=code,
        duration_ms=_non_negative_int(record, "duration"),
        bytes_sent=_non_negative_int(record, "bytes_sent"),
        bytes_received=_non_negative_int(record, "bytes_received"),
        request_id=str(record.get("request_id") or ""),
        authority=str(record.get("authority") or ""),
        upstream_cluster=cluster,
        upstream_host=_opt_str(record, "upstream_host"),
        upstream_local_address=_opt_str(record, "upstream_local_address"),
        downstream_local_address=_opt_str(record, "downstream_local_address"),
        downstream_remote_address=_opt_str(record, "downstream_remote_address"),
        response_flags=str(record.get("response_flags") or "-"),
        user_agent=_opt_str(record, "user_agent"),
    )


def entry_to_record(entry: AccessLogEntry) -> dict:
    return {
        "start_time": format_timestamp(entry.start_time),
        "upstream_host": entry.upstream_host,
        "downstream_local_address": entry.downstream_local_address,
        "protocol": entry.protocol,
        "authority": entry.authority,
        "upstream_local_address": entry.upstream_local_address,
        "downstream_remote_address": entry.downstream_remote_address,
        "path": entry.path,
        "bytes_sent": entry.bytes_sent,
        "request_id": entry.request_id,
        "bytes_received": entry.bytes_received,
        "duration": entry.duration_ms,
        "response_flags": entry.response_flags,
        "response_code": entry.response_code,
        "method": entry.method,
        "upstream_cluster": entry.upstream_cluster,
        "user_agent": entry.user_agent,
    }


def serialize_entry(entry: AccessLogEntry) -> str:
    """Render an entry as a single JSON line (no trailing newline)."""
    return json.dumps(entry_to_record(entry), separators=(", ", ": "))


def iter_lines(lines: Iterable[str], source: LogSource) -> Iterator[AccessLogEntry | ParseFailure]:
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            yield parse_line(line, source)
        except ParseFailure as exc:
            exc.line_no = line_no
            yield exc


def read_log_file(path: str | Path, source: LogSource) -> ParsedLog:
    """Parse a whole file; bad lines are collected, never fatal."""
    parsed = ParsedLog(source=source)
    with open(path, encoding="utf-8", errors="replace") as fh:
        for item in iter_lines(fh, source):
            if isinstance(item, ParseFailure):
                parsed.failures.append(item)
            else:
                parsed.entries.append(item)
    return parsed


# -- classification -----------------------------------------------------------


def classify_direction(entry: AccessLogEntry) -> Direction:
    cluster = entry.upstream_cluster
    if cluster.startswith("outbound|"):
        return Direction.OUTBOUND
    if cluster.startswith("inbound|"):
        return Direction.INBOUND
    return Direction.UNKNOWN


def destination_service(entry: AccessLogEntry, source_namespace: str | None = None) -> str | None:
    """Resolve the called service of an outbound record.

    The fourth ``|``-separated field of ``upstream_cluster`` carries the
    destination's DNS name.  When it is blank we fall back to ``authority``,
    borrowing the caller's namespace for unqualified hosts.
    """
    parts = entry.upstream_cluster.split("|")
    host = parts[3] if len(parts) >= 4 else ""
    if host:
        resolved = normalize_service_name(host, source_namespace)
        if resolved:
            return resolved
    if entry.authority:
        return normalize_service_name(entry.authority, source_namespace)
    return None


def normalize_path(path: str, collapse_ids: bool = False) -> str:
    endpoint = path.split("?", 1)[0]
    if collapse_ids:
        segments = endpoint.split("/")
        endpoint = "/".join(
            "{id}" if seg and (seg.isdigit() or _UUID_RE.match(seg)) else seg
            for seg in segments
        )
    return endpoint


def filter_window(
    entries: Sequence[AccessLogEntry],
    start: datetime | None = None,
    end: datetime | None = None,
) -> list[AccessLogEntry]:
    """Keep entries with ``start <= start_time < end``; ``None`` is unbounded."""
    if start is not None and end is not None and start > end:
        raise InvalidWindow(f"window start {start} is after end {end}")
    return [
        e
        for e in entries
        if (start is None or e.start_time >= start) and (end is None or e.start_time < end)
    ]


# -- discovery ----------------------------------------------------------------


def source_from_filename(path: str | Path) -> LogSource:
    """``ts-order-service.default.log`` -> ``LogSource("ts-order-service.default")``."""
    p = Path(path)
    name = p.name
    for suffix in (".jsonl", ".log", ".json"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    return LogSource(service=name, file=str(p))


def load_manifest(path: str | Path) -> list[LogSource]:
    """Read a manifest: a JSON array of ``{"file": ..., "service": ...}``.

    Relative file paths are resolved against the manifest's directory.
    """
    manifest_path = Path(path)
    data = json.loads(manifest_path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("manifest must be a JSON array")
    sources = []
    for item in data:
        if not isinstance(item, dict) or "file" not in item or "service" not in item:
            raise ValueError(f"manifest entry needs 'file' and 'service': {item!r}")
        file = Path(item["file"])
        if not file.is_absolute():
            file = manifest_path.parent / file
        sources.append(LogSource(service=item["service"], file=str(file)))
    return sources


def discover_sources(logs_dir: str | Path, manifest: str | Path | None = None) -> list[LogSource]:
    if manifest is not None:
        return sorted(load_manifest(manifest), key=lambda s: (s.service, s.file))
    root = Path(logs_dir)
    files = sorted(p for p in root.iterdir() if p.is_file() and p.suffix in (".log", ".jsonl"))
    return [source_from_filename(p) for p in files]
