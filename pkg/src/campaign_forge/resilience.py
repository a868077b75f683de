"""Closed-form checkpoint, startup-failure and vetting planners.

These are the formulas the simulator is validated against: first-order
Young-Daly cadence, its waste model, the probability that at least one of
many independent units fails at launch, and the expected payoff of a
pre-application node vetting test.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import InvalidInputs
from .scenario import CheckpointPolicy, ScenarioSpec

__all__ = [
    "CheckpointPolicy",
    "CheckpointPlan",
    "FailureAnalytics",
    "YoungDalyValidityWarning",
    "failure_analytics",
    "passes_preflight",
    "plan_checkpoint",
    "startup_failure_prob",
    "to_iterations",
    "vetting_value",
    "waste_fraction",
    "young_daly_interval",
]


class YoungDalyValidityWarning(UserWarning):
    """The write cost is not small against the MTBF; the first-order optimum is rough."""


def young_daly_interval(write_cost: float, cluster_mtbf: float) -> float:
    """Checkpoint period sqrt(2 * C * M) in seconds."""
    if not (write_cost > 0 and cluster_mtbf > 0):
        raise InvalidInputs("write_cost and cluster_mtbf must both be > 0")
    if write_cost >= cluster_mtbf / 2:
        warnings.warn(
            f"write_cost {write_cost:g}s is not below half the MTBF {cluster_mtbf:g}s",
            YoungDalyValidityWarning,
            stacklevel=2,
        )
    return math.sqrt(2.0 * write_cost * cluster_mtbf)


def waste_fraction(interval: float, write_cost: float, cluster_mtbf: float, restore_cost: float = 0.0) -> float:
    """First-order fraction of time lost to checkpoints and recomputation."""
    if interval <= 0:
        raise InvalidInputs("interval must be > 0")
    return write_cost / interval + (interval / 2.0 + restore_cost) / cluster_mtbf


def to_iterations(interval_seconds: float, iteration_time: float) -> int:
    """Seconds to iterations, rounded to the nearest multiple of 10 (minimum 1)."""
    if iteration_time <= 0:
        raise InvalidInputs("iteration_time must be > 0")
    raw = interval_seconds / iteration_time
    tens = int(math.floor(raw / 10.0 + 0.5)) * 10
    return tens if tens > 0 else max(1, int(math.floor(raw + 0.5)))


def startup_failure_prob(p_unit: float, units: int) -> float:
    """P(at least one of ``units`` independent units fails), 1 - (1-p)^n.

    Evaluated as ``-expm1(n * log1p(-p))`` so tiny ``p`` keeps full precision.
    """
    if not 0.0 <= p_unit <= 1.0:
        raise InvalidInputs("p_unit must lie in [0, 1]")
    if units < 1:
        raise InvalidInputs("units must be >= 1")
    if p_unit == 1.0:
        return 1.0
    return -math.expm1(units * math.log1p(-p_unit))


def combined_failure_prob(*probs: float) -> float:
    """P(any) for independent events."""
    survive = 0.0
    for p in probs:
        if p >= 1.0:
            return 1.0
        survive += math.log1p(-p)
    return -math.expm1(survive)


def vetting_value(
    test_duration: float,
    sensitivity: float,
    bad_node_prob: float,
    nodes: int,
    expected_loss_on_bad: float,
    gpus_per_node: int = 4,
) -> float:
    """Expected GPU-seconds saved per launch by vetting; positive means it pays."""
    if not (0 <= sensitivity <= 1 and 0 <= bad_node_prob <= 1):
        raise InvalidInputs("sensitivity and bad_node_prob must lie in [0, 1]")
    p_detect = startup_failure_prob(sensitivity * bad_node_prob, nodes)
    return p_detect * expected_loss_on_bad - test_duration * nodes * gpus_per_node


def passes_preflight(allocatable_fraction: float, threshold: float = 0.90) -> bool:
    """Node admission rule of the memory prolog."""
    return allocatable_fraction >= threshold


# ---------------------------------------------------------------------------
# Planning summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckpointPlan:
    write_cost: float
    cluster_mtbf: float
    iteration_time: float | None
    restore_cost: float
    interval_seconds: float
    interval_iterations: int | None
    waste_at_optimum: float
    sensitivity: tuple[tuple[float, float, float], ...]
    warnings: tuple[str, ...] = field(default=())

    columns = ("scale", "interval_seconds", "waste_fraction")

    def records(self) -> list[dict]:
        return [{"scale": k, "interval_seconds": i, "waste_fraction": w} for k, i, w in self.sensitivity]

    def summary(self) -> dict:
        return {
            "write_cost": self.write_cost,
            "cluster_mtbf": self.cluster_mtbf,
            "iteration_time": self.iteration_time,
            "interval_seconds": self.interval_seconds,
            "interval_iterations": self.interval_iterations,
            "waste_at_optimum": self.waste_at_optimum,
            "warnings": list(self.warnings),
        }


SENSITIVITY_SCALES = (0.5, 0.75, 1.0, 1.25, 1.5)


def plan_checkpoint(
    write_cost: float,
    cluster_mtbf: float,
    iteration_time: float | None = None,
    restore_cost: float = 0.0,
) -> CheckpointPlan:
    """Young-Daly interval, its waste, and waste at +/-50% of the interval."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", YoungDalyValidityWarning)
        opt = young_daly_interval(write_cost, cluster_mtbf)
    rows = tuple(
        (k, opt * k, waste_fraction(opt * k, write_cost, cluster_mtbf, restore_cost)) for k in SENSITIVITY_SCALES
    )
    return CheckpointPlan(
        write_cost=write_cost,
        cluster_mtbf=cluster_mtbf,
        iteration_time=iteration_time,
        restore_cost=restore_cost,
        interval_seconds=opt,
        interval_iterations=None if iteration_time is None else to_iterations(opt, iteration_time),
        waste_at_optimum=waste_fraction(opt, write_cost, cluster_mtbf, restore_cost),
        sensitivity=rows,
        warnings=tuple(str(w.message) for w in caught),
    )


@dataclass(frozen=True)
class FailureAnalytics:
    cluster_mtbf: float
    p_job_startup_fail: float
    expected_waste_fraction: float


def failure_analytics(scenario: ScenarioSpec, iteration_time: float) -> FailureAnalytics:
    """Analytic failure summary for the scenario's allocation.

    The MTBF is that of the allocated nodes under exponential failures;
    OOM hazard growth is a simulator-only effect and is not folded in.
    """
    rate = scenario.node_failure_rate
    nodes = scenario.scheduler.alloc_nodes
    mtbf = math.inf if rate == 0 else 1.0 / (rate * nodes)
    f = scenario.failures
    p_start = combined_failure_prob(
        startup_failure_prob(f.p_rank_startup, scenario.alloc_gpus),
        startup_failure_prob(f.p_node_port, nodes),
    )
    ck = scenario.checkpoint
    interval = ck.interval_seconds if ck.interval_seconds is not None else ck.interval_iterations * iteration_time
    waste = min(1.0, waste_fraction(interval, ck.write_cost, mtbf, ck.restore_cost))
    return FailureAnalytics(cluster_mtbf=mtbf, p_job_startup_fail=p_start, expected_waste_fraction=waste)
