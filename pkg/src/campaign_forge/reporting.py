"""Campaign reports and policy comparisons built from event traces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import __version__
from .errors import IncomparableScenarios, InvalidInputs
from .scenario import DEFAULT_SEED, ScenarioSpec
from .sim import EVENT_KINDS, WASTE_CATEGORIES, EventTrace, measure_goodput


@dataclass(frozen=True)
class CheckpointStats:
    written: float
    invalidated: float
    mean_effective_cost: float


@dataclass(frozen=True)
class RestartStats:
    count: float
    mean_lost_iterations: float


@dataclass(frozen=True)
class CampaignReport:
    scenario_digest: str
    environment_digest: str
    seeds: tuple[int, ...]
    total_wallclock: float
    gpu_hours: float
    useful_tokens_per_s: float
    tokens_done: float
    waste_shares: dict[str, float]
    counts: dict[str, float]
    checkpoint_stats: CheckpointStats
    restart_stats: RestartStats
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "environment_digest": self.environment_digest,
            "seeds": list(self.seeds),
            "version": self.version,
            "total_wallclock": self.total_wallclock,
            "gpu_hours": self.gpu_hours,
            "useful_tokens_per_s": self.useful_tokens_per_s,
            "tokens_done": self.tokens_done,
            "waste_shares": dict(self.waste_shares),
            "counts": dict(self.counts),
            "checkpoint_stats": {
                "written": self.checkpoint_stats.written,
                "invalidated": self.checkpoint_stats.invalidated,
                "mean_effective_cost": self.checkpoint_stats.mean_effective_cost,
            },
            "restart_stats": {
                "count": self.restart_stats.count,
                "mean_lost_iterations": self.restart_stats.mean_lost_iterations,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    columns = ("metric", "value")

    def records(self) -> list[dict]:
        """One row per scalar metric; nested maps are flattened with dots."""
        rows = []

        def walk(prefix: str, obj) -> None:
            if isinstance(obj, dict):
                for k in sorted(obj):
                    walk(f"{prefix}.{k}" if prefix else k, obj[k])
            elif isinstance(obj, list):
                rows.append({"metric": prefix, "value": " ".join(str(x) for x in obj)})
            else:
                rows.append({"metric": prefix, "value": obj})

        walk("", self.to_dict())
        return rows


def config_digest(scenario: ScenarioSpec) -> str:
    """Scenario digest with the seed normalized, shared by all seeds of one configuration."""
    return replace(scenario, seed=DEFAULT_SEED).digest()


def build_report(trace: EventTrace, scenario: ScenarioSpec) -> CampaignReport:
    """Deterministic fold of one trace into a report."""
    g = measure_goodput(trace, scenario)
    counts = trace.counts()
    invalidated = 0
    restarts = 0
    lost: list[int] = []
    for e in trace.events:
        if e.payload.get("invalidated_checkpoint") is not None:
            invalidated += 1
        if e.kind == "AllocEnd" and not e.payload["clean"]:
            restarts += 1
        rb = e.payload.get("rolled_back")
        if rb is not None:
            lost.append(rb["iterations"])
    written = counts["CheckpointDone"] + counts["FinalCheckpoint"]
    ckpt_wall = g.gpu_seconds["checkpoint_overhead"] / g.gpus
    return CampaignReport(
        scenario_digest=scenario.digest(),
        environment_digest=scenario.environment_digest(),
        seeds=(scenario.seed,),
        total_wallclock=g.wallclock,
        gpu_hours=g.gpu_seconds_total / 3600.0,
        useful_tokens_per_s=g.useful_tokens_per_s,
        tokens_done=g.tokens_done,
        waste_shares=g.shares,
        counts=counts,
        checkpoint_stats=CheckpointStats(written, invalidated, ckpt_wall / written if written else 0.0),
        restart_stats=RestartStats(restarts, sum(lost) / len(lost) if lost else 0.0),
    )


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def aggregate_reports(reports: Sequence[CampaignReport]) -> CampaignReport:
    """Mean across seeds of one configuration.

    The digest of the aggregate is that of the first report; all reports must
    share its environment.
    """
    if not reports:
        raise InvalidInputs("nothing to aggregate")
    env = {r.environment_digest for r in reports}
    if len(env) > 1:
        raise IncomparableScenarios("reports come from different environments")
    return CampaignReport(
        scenario_digest=reports[0].scenario_digest,
        environment_digest=reports[0].environment_digest,
        seeds=tuple(sd for r in reports for sd in r.seeds),
        total_wallclock=_mean([r.total_wallclock for r in reports]),
        gpu_hours=_mean([r.gpu_hours for r in reports]),
        useful_tokens_per_s=_mean([r.useful_tokens_per_s for r in reports]),
        tokens_done=_mean([r.tokens_done for r in reports]),
        waste_shares={c: _mean([r.waste_shares[c] for r in reports]) for c in WASTE_CATEGORIES},
        counts={k: _mean([r.counts[k] for r in reports]) for k in EVENT_KINDS},
        checkpoint_stats=CheckpointStats(
            _mean([r.checkpoint_stats.written for r in reports]),
            _mean([r.checkpoint_stats.invalidated for r in reports]),
            _mean([r.checkpoint_stats.mean_effective_cost for r in reports]),
        ),
        restart_stats=RestartStats(
            _mean([r.restart_stats.count for r in reports]),
            _mean([r.restart_stats.mean_lost_iterations for r in reports]),
        ),
    )


# ---------------------------------------------------------------------------
# Policy comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    tokens_per_s: float
    gpu_hours: float
    delta_vs_best: float
    waste_deltas: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PolicyComparison:
    rows: tuple[ComparisonRow, ...]

    columns = ("label", "tokens_per_s", "gpu_hours", "delta_vs_best")

    @property
    def best(self) -> ComparisonRow:
        return self.rows[0]

    @property
    def ranking(self) -> list[str]:
        return [r.label for r in self.rows]

    def records(self) -> list[dict]:
        return [{c: getattr(r, c) for c in self.columns} for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {**{c: getattr(r, c) for c in self.columns}, "waste_deltas": dict(r.waste_deltas)} for r in self.rows
            ]
        }


def compare_policies(reports: Sequence[tuple[str, CampaignReport]]) -> PolicyComparison:
    """Rank reports by goodput, then by fewer GPU-hours, then by label.

    ``delta_vs_best`` is the relative goodput gap to the leader (0 for the
    leader, negative otherwise); waste deltas are share differences.
    """
    if len(reports) < 2:
        raise InvalidInputs("compare_policies needs at least two reports")
    if len({r.environment_digest for _, r in reports}) > 1:
        raise IncomparableScenarios("reports differ in more than policy fields")
    ordered = sorted(reports, key=lambda lr: (-lr[1].useful_tokens_per_s, lr[1].gpu_hours, lr[0]))
    best = ordered[0][1]
    rows = tuple(
        ComparisonRow(
            label=label,
            tokens_per_s=r.useful_tokens_per_s,
            gpu_hours=r.gpu_hours,
            delta_vs_best=r.useful_tokens_per_s / best.useful_tokens_per_s - 1.0 if best.useful_tokens_per_s else 0.0,
            waste_deltas={c: r.waste_shares[c] - best.waste_shares[c] for c in WASTE_CATEGORIES},
        )
        for label, r in ordered
    )
    return PolicyComparison(rows)
