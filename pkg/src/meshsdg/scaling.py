"""Scaling priorities derived from the graph heatmap and coupling metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .antipatterns import DatastoreClassifier, MetricsRow
from .sdg import ServiceDependencyGraph


@dataclass(frozen=True)
class PlanEntry:
    service: str
    rank: int
    ais: int
    ads: int
    acs: int
    inbound_weight: int
    detangle_first: bool
    rationale: str


@dataclass(frozen=True)
class ScalingPlan:
    entries: tuple[PlanEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_list(self) -> list[dict]:
        return [asdict(e) for e in self.entries]

    @classmethod
    def from_list(cls, data: Sequence[dict]) -> ScalingPlan:
        return cls(tuple(PlanEntry(**d) for d in data))

    def format_table(self) -> str:
        header = ("rank", "service", "ais", "ads", "acs", "inbound", "detangle", "rationale")
        body = [
            (
                str(e.rank),
                e.service,
                str(e.ais),
                str(e.ads),
                str(e.acs),
                str(e.inbound_weight),
                "yes" if e.detangle_first else "no",
                e.rationale,
            )
            for e in self.entries
        ]
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header) - 1)]
        lines = []
        for row in [header, *body]:
            cells = [row[i].ljust(widths[i]) for i in range(len(widths))]
            lines.append("  ".join(cells + [row[-1]]).rstrip())
        return "\n".join(lines) + "\n"


def _rationale(row: MetricsRow, inbound: int, detangle: bool) -> str:
    text = f"called by {row.ais} services ({inbound} requests), depends on {row.ads}"
    if detangle:
        text += f"; highest ACS {row.acs}, reduce coupling before scaling"
    return text


def build_scaling_plan(
    g: ServiceDependencyGraph,
    rows: Sequence[MetricsRow],
    classifier: DatastoreClassifier | None = None,
    top_k: int | None = None,
) -> ScalingPlan:
    """Rank stateless, consumed services for replication.

    Order is (AIS desc, inbound request weight desc, ADS desc, name asc).
    Datastores and services without in-mesh callers are left out.  The
    service(s) holding the maximum ACS are flagged ``detangle_first``.
    """
    classifier = classifier or DatastoreClassifier()
    candidates = [r for r in rows if r.ais > 0 and not classifier(r.service)]
    weight = {r.service: g.inbound_weight(r.service) for r in candidates}
    candidates.sort(key=lambda r: (-r.ais, -weight[r.service], -r.ads, r.service))
    max_acs = max((r.acs for r in candidates), default=0)
    if top_k is not None:
        candidates = candidates[:top_k]
    entries = []
    for rank, row in enumerate(candidates, 1):
        detangle = max_acs > 0 and row.acs == max_acs
        entries.append(
            PlanEntry(
                service=row.service,
                rank=rank,
                ais=row.ais,
                ads=row.ads,
                acs=row.acs,
                inbound_weight=weight[row.service],
                detangle_first=detangle,
                rationale=_rationale(row, weight[row.service], detangle),
            )
        )
    return ScalingPlan(tuple(entries))
