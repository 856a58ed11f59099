import json
import math
import re

import pytest
from hypothesis import given, settings

from meshsdg.antipatterns import (
    CycleReport,
    MetricsRow,
    check_api_versioning,
    compute_metrics,
    detect_cycles,
    detect_shared_persistency,
)
from meshsdg.report import (
    CSV_HEADER,
    RenderOptions,
    ReportSchemaError,
    emit_cycles_text,
    emit_dot,
    emit_metrics_csv,
    emit_report_json,
    load_report,
    parse_metrics_csv,
    penwidth,
)
from meshsdg.scaling import build_scaling_plan
from meshsdg.sdg import ServiceDependencyGraph

from .conftest import graph_of, small_graphs

_NODE = re.compile(r'^  "(?:[^"\\]|\\.)+";$')
_EDGE = re.compile(r'^  "(?:[^"\\]|\\.)+" -> "(?:[^"\\]|\\.)+" \[(?P<attrs>.*)\];$')


def assert_valid_dot(text: str) -> list[dict]:
    lines = text.splitlines()
    assert lines[0] == "digraph sdg {" and lines[-1] == "}"
    assert text.count("{") == text.count("}")
    edges = []
    for line in lines[1:-1]:
        if line == "  node [shape=box];" or _NODE.match(line):
            continue
        m = _EDGE.match(line)
        assert m, f"not a DOT statement: {line!r}"
        attrs = dict(re.findall(r'(\w+)=("(?:[^"\\]|\\.)*"|[\w.]+)', m.group("attrs")))
        edges.append(attrs)
    return edges


def fig2():
    return graph_of(
        {
            ("a-service", "b-service", "/api/v1/endpoint", "GET"): 10,
            ("a-service", "c-service", "/api/v1/endpoint", "GET"): 2,
            ("b-service", "c-service", "/api/v2/endpoint", "GET"): 2,
        }
    )


class TestDot:
    def test_fig2(self):
        text = emit_dot(fig2(), detect_cycles(fig2()))
        edges = assert_valid_dot(text)
        assert len(edges) == 3
        assert text.count('";\n') == 3
        widths = [float(e["penwidth"]) for e in edges]
        assert widths[0] == max(widths) and widths[0] > widths[1]
        assert edges[0]["label"] == '"/api/v1/endpoint (10)"'

    def test_penwidth_formula(self):
        opts = RenderOptions()
        assert penwidth(10, 10, opts) == pytest.approx(5.0)
        assert penwidth(2, 10, opts) == pytest.approx(1.0 + 4.0 * math.log(3) / math.log(11))
        assert penwidth(3, 0, opts) == 1.0

    def test_equal_weights_draw_min(self):
        g = graph_of({("a", "b"): 5, ("b", "c"): 5})
        widths = {e["penwidth"] for e in assert_valid_dot(emit_dot(g))}
        assert widths == {"1.000"}

    def test_empty(self):
        assert emit_dot(ServiceDependencyGraph.empty()).strip() == "digraph sdg { }"

    def test_cycle_edges_red(self):
        g = graph_of({("a", "b"): 1, ("b", "a"): 1, ("a", "c"): 1})
        edges = assert_valid_dot(emit_dot(g, detect_cycles(g)))
        assert [e.get("color") for e in edges] == ["red", None, "red"]
        plain = assert_valid_dot(emit_dot(g, detect_cycles(g), RenderOptions(highlight_cycles=False)))
        assert all("color" not in e for e in plain)

    def test_label_toggles(self):
        g = fig2()
        no_labels = emit_dot(g, opts=RenderOptions(weight_labels=False, endpoint_labels=False))
        assert "label=" not in no_labels
        weights_only = assert_valid_dot(emit_dot(g, opts=RenderOptions(endpoint_labels=False)))
        assert weights_only[0]["label"] == '"(10)"'

    def test_quoting(self):
        g = graph_of({('we"ird', "b", "/api/v1/\\x", "GET"): 1})
        assert_valid_dot(emit_dot(g))

    def test_bad_options(self):
        with pytest.raises(ValueError):
            RenderOptions(min_penwidth=0)
        with pytest.raises(ValueError):
            RenderOptions(min_penwidth=3, max_penwidth=2)

    @settings(max_examples=100)
    @given(small_graphs())
    def test_deterministic_and_valid(self, g):
        cycles = detect_cycles(g)
        a = emit_dot(g, cycles)
        assert a == emit_dot(g, cycles)
        if g.nodes:
            assert len(assert_valid_dot(a)) == len(g.weights)


class TestCsv:
    def test_travel_row(self):
        rows = [MetricsRow("ts-travel-service.default", 5, 6, 5, 6, 30)]
        text = emit_metrics_csv(rows)
        assert text == ",".join(CSV_HEADER) + "\nts-travel-service.default,5,6,5,6,30\n"

    def test_empty(self):
        assert emit_metrics_csv([]) == "service_name,in_degree,out_degree,ais,ads,acs\n"

    @settings(max_examples=100)
    @given(small_graphs())
    def test_round_trip(self, g):
        rows = compute_metrics(g)
        text = emit_metrics_csv(rows)
        assert "\r" not in text
        assert len(text.splitlines()) == len(g.nodes) + 1
        assert all(line == line.rstrip() for line in text.splitlines())
        assert parse_metrics_csv(text) == rows

    def test_bad_header(self):
        with pytest.raises(ReportSchemaError):
            parse_metrics_csv("a,b\n")


def _full_report(g):
    rows = compute_metrics(g)
    return emit_report_json(
        g,
        rows,
        detect_cycles(g),
        detect_shared_persistency(g),
        check_api_versioning(g),
        build_scaling_plan(g, rows),
    )


class TestJsonReport:
    def test_empty(self):
        data = json.loads(_full_report(ServiceDependencyGraph.empty()))
        assert data["schema_version"] == "1"
        assert data["graph"]["nodes"] == [] and data["metrics"] == [] and data["plan"] == []

    def test_cycle_section(self):
        g = graph_of({("ts-travel-service.default", "ts-seat-service.default"): 1, ("ts-seat-service.default", "ts-travel-service.default"): 1})
        data = json.loads(_full_report(g))
        assert data["cycles"]["components"] == [["ts-seat-service.default", "ts-travel-service.default"]]
        assert data["cycles"]["siy"] == 1

    @settings(max_examples=100)
    @given(small_graphs())
    def test_round_trip(self, g):
        text = _full_report(g)
        report = load_report(text)
        assert report.graph == g
        assert report.metrics == compute_metrics(g)
        assert report.cycles == detect_cycles(g)
        assert report.versioning == check_api_versioning(g)
        assert report.plan == build_scaling_plan(g, compute_metrics(g))
        assert text == _full_report(g)

    def test_keys_sorted(self):
        text = _full_report(fig2())
        data = json.loads(text)
        assert text == json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @pytest.mark.parametrize("text", ["nope", "[]", '{"schema_version": "2"}', '{"schema_version": "1"}'])
    def test_schema_errors(self, text):
        with pytest.raises(ReportSchemaError):
            load_report(text)


class TestCyclesText:
    def test_pair(self):
        report = CycleReport(1, (("ts-seat-service.default", "ts-travel-service.default"),), ())
        assert emit_cycles_text(report) == ["cycle: ts-seat-service.default <-> ts-travel-service.default"]

    def test_empty(self):
        assert emit_cycles_text(CycleReport(0, (), ())) == ["no cycles detected"]

    def test_three_members_sorted(self):
        g = graph_of({("c", "a"): 1, ("a", "b"): 1, ("b", "c"): 1, ("x", "x"): 1})
        assert emit_cycles_text(detect_cycles(g)) == ["cycle: a <-> b <-> c", "self-loop: x"]
