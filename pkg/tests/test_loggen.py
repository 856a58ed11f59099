import json
import logging

import pytest

from meshsdg.access_log import read_log_file, source_from_filename
from meshsdg.loggen import TopologySpec, generate_logs, load_topology
from meshsdg.pipeline import AnalyzeOptions, build_from_sources

from .conftest import FIXTURES


def small_spec(**overrides) -> TopologySpec:
    data = {
        "services": ["a.default", "b.default", "c.default"],
        "calls": [
            {"source": "a.default", "destination": "b.default", "endpoint": "/api/v1/b", "count": 2},
            {"source": "b.default", "destination": "c.default", "endpoint": "/api/v1/c?x=1", "method": "POST", "count": 5},
            {"source": "a.default", "destination": "c.default", "endpoint": "/api/v1/c", "count": 3, "status_code": 503},
        ],
        "time_span": {"start": "2022-05-26T06:00:00Z", "end": "2022-05-26T06:30:00Z"},
        "seed": 3,
    }
    data.update(overrides)
    return TopologySpec.from_dict(data)


def test_outbound_records_by_construction(tmp_path):
    spec = small_spec(mirror_inbound=False)
    generate_logs(spec, tmp_path)
    records = [json.loads(l) for l in (tmp_path / "a.default.log").read_text().splitlines()]
    to_b = [r for r in records if r["path"] == "/api/v1/b"]
    assert len(to_b) == 2
    assert {r["upstream_cluster"] for r in to_b} == {"outbound|80||b.default.svc.cluster.local"}
    assert (tmp_path / "c.default.log").read_text() == ""


def test_inbound_mirror(tmp_path):
    ledger = generate_logs(small_spec(), tmp_path)
    c_records = [json.loads(l) for l in (tmp_path / "c.default.log").read_text().splitlines()]
    assert len(c_records) == 8
    assert all(r["upstream_cluster"].startswith("inbound|") for r in c_records)
    assert ledger.inbound_records == 10


def test_same_seed_byte_identical(tmp_path):
    spec = load_topology(FIXTURES / "trainticket-v0.2.1.json")
    generate_logs(spec, tmp_path / "one")
    generate_logs(spec, tmp_path / "two")
    names = sorted(p.name for p in (tmp_path / "one").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "two").iterdir())
    for name in names:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    generate_logs(spec, tmp_path / "three", seed=spec.seed + 1)
    assert (tmp_path / "three" / names[0]).read_bytes() != (tmp_path / "one" / names[0]).read_bytes()


def test_pipeline_reproduces_declared_edges(tmp_path):
    spec = small_spec()
    ledger = generate_logs(spec, tmp_path)
    sources = [source_from_filename(p) for p in sorted(tmp_path.glob("*.log"))]
    g, stats = build_from_sources(sources, AnalyzeOptions(jobs=2))
    assert stats.failures == 0
    assert dict(g.weights) == dict(spec.expected_edges())
    assert g.total_requests == ledger.total == sum(c.count for c in spec.calls)
    assert g.diagnostics.inbound == ledger.inbound_records


def test_timestamps_inside_span(tmp_path):
    spec = small_spec()
    generate_logs(spec, tmp_path)
    start, end = spec.time_span
    for p in tmp_path.glob("*.log"):
        for e in read_log_file(p, source_from_filename(p)).entries:
            assert start <= e.start_time < end


@pytest.mark.parametrize(
    "patch, message",
    [
        ({"calls": [{"source": "a.default", "destination": "b.default", "endpoint": "", "count": 1}]}, "endpoint"),
        ({"calls": [{"source": "a.default", "destination": "b.default", "endpoint": "/x", "count": 0}]}, "count"),
        ({"calls": [{"source": "a.default", "destination": "zz.default", "endpoint": "/x", "count": 1}]}, "undeclared"),
        ({"time_span": {"start": "2022-05-26T06:30:00Z", "end": "2022-05-26T06:00:00Z"}}, "time_span"),
    ],
)
def test_invalid_specs(patch, message):
    with pytest.raises(ValueError, match=message):
        small_spec(**patch)


def test_self_call_flagged(tmp_path, caplog):
    spec = small_spec(
        calls=[{"source": "a.default", "destination": "a.default", "endpoint": "/api/v1/a", "count": 1}]
    )
    assert len(spec.self_calls) == 1
    with caplog.at_level(logging.WARNING):
        generate_logs(spec, tmp_path)
    assert "self-call" in caplog.text


def test_spec_dict_round_trip():
    spec = load_topology(FIXTURES / "trainticket-v0.1.0.json")
    assert TopologySpec.from_dict(spec.to_dict()) == spec
