"""Service dependency graphs and coupling metrics from service-mesh access logs."""

from .access_log import (
    AccessLogEntry,
    Direction,
    InvalidWindow,
    LogSource,
    ParseFailure,
    classify_direction,
    destination_service,
    filter_window,
    normalize_path,
    parse_line,
    read_log_file,
)
from .antipatterns import (
    CycleReport,
    DatastoreClassifier,
    InvalidPattern,
    MetricsRow,
    PersistencyFinding,
    VersioningFinding,
    check_api_versioning,
    compute_metrics,
    detect_cycles,
    detect_shared_persistency,
    rank_bottlenecks,
)
from .evolution import SdgDiff, diff_graphs, summarize_diff
from .loggen import CallSpec, Ledger, TopologySpec, generate_logs, load_topology
from .pipeline import AnalyzeOptions, ParseStats, analyze_directory, analyze_graph, build_from_sources
from .report import RenderOptions, emit_cycles_text, emit_dot, emit_metrics_csv, emit_report_json, load_report
from .scaling import PlanEntry, ScalingPlan, build_scaling_plan
from .sdg import EdgeKey, SdgEdge, ServiceDependencyGraph, UnknownService, WindowMismatch, build_graph, merge

__version__ = "0.1.0"
