"""Analytic per-iteration time model, scaling tables and saturation scores.

Iteration time is composed additively::

    t_iteration = t_compute * (1 + bubble) + t_dp_exposed + t_tp

with compute from the 6·P·B FLOP estimate, an interleaved-pipeline bubble,
an alpha-beta ring all-reduce for data-parallel gradients (bucketed), and a
lumped tensor-parallel term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from scipy.optimize import brentq

from .errors import EmptyTelemetry, LayoutInfeasible, LayoutMismatch
from .scenario import ClusterSpec, CommModelSpec, ParallelismLayout, ScenarioSpec, WorkloadSpec

WEAK_BASE_BATCH_TOKENS = 0.13e6
RESOURCES = ("compute", "memory", "network")


@dataclass(frozen=True)
class IterationTimeModel:
    t_compute: float
    bubble_fraction: float
    t_dp_exposed: float
    t_tp: float
    dip_factor: float = 1.0
    gpus: int = 1
    global_batch_tokens: float = 0.0
    microbatches: float = 1.0
    t_iteration: float = field(init=False)

    def __post_init__(self):
        total = self.t_compute * (1.0 + self.bubble_fraction) + self.t_dp_exposed + self.t_tp
        object.__setattr__(self, "t_iteration", total)

    @property
    def t_overhead(self) -> float:
        """Everything in an iteration that is not ideal kernel time."""
        return self.t_iteration - self.t_compute

    @property
    def tokens_per_s_per_gpu(self) -> float:
        return self.global_batch_tokens / (self.t_iteration * self.gpus)


def flops_per_iteration(workload: WorkloadSpec, global_batch_tokens: float | None = None) -> float:
    b = workload.global_batch_tokens if global_batch_tokens is None else global_batch_tokens
    return 6.0 * workload.param_count * b


def compute_time(workload: WorkloadSpec, gpus: int, cluster: ClusterSpec, global_batch_tokens: float | None = None) -> float:
    """Ideal kernel time per iteration in seconds."""
    if gpus < 1:
        raise ValueError("gpus must be >= 1")
    if not 0 < workload.target_mfu <= 1:
        raise ValueError("target_mfu must lie in (0, 1]")
    rate = gpus * cluster.gpu_peak_flops * cluster.boost_factor * workload.target_mfu
    return flops_per_iteration(workload, global_batch_tokens) / rate


def pipeline_bubble(layout: ParallelismLayout, microbatches: float) -> float:
    """Idle fraction of an interleaved pipeline schedule: (pp-1) / (vpp*m)."""
    if microbatches < 1:
        raise ValueError("microbatches must be >= 1")
    if layout.pp == 1:
        return 0.0
    return (layout.pp - 1) / (layout.vpp * microbatches)


def gradient_shard_bytes(workload: WorkloadSpec, layout: ParallelismLayout) -> float:
    return workload.param_count * workload.bytes_per_param / (layout.tp * layout.pp)


def dp_allreduce_time(workload: WorkloadSpec, layout: ParallelismLayout, comm: CommModelSpec) -> float:
    """Bucketed ring all-reduce of one gradient shard across the dp group."""
    if layout.dp <= 1:
        return 0.0
    shard = gradient_shard_bytes(workload, layout)
    buckets = math.ceil(shard / comm.bucket_bytes)
    return buckets * comm.alpha + 2.0 * (layout.dp - 1) / layout.dp * shard / comm.beta_inverse


def tp_time(comm: CommModelSpec) -> float:
    return comm.tp_count * comm.tp_alpha + comm.tp_volume_bytes / comm.tp_bandwidth


def iteration_model(
    scenario: ScenarioSpec,
    layout: ParallelismLayout,
    global_batch_tokens: float | None = None,
) -> IterationTimeModel:
    """Iteration time for an explicit layout (no consistency check)."""
    w = scenario.workload
    gb = w.global_batch_tokens if global_batch_tokens is None else global_batch_tokens
    gpus = layout.gpus
    m = gb / (layout.dp * w.microbatch_tokens)
    ck = scenario.checkpoint
    return IterationTimeModel(
        t_compute=compute_time(w, gpus, scenario.cluster, gb),
        bubble_fraction=pipeline_bubble(layout, m),
        t_dp_exposed=(1.0 - scenario.comm.overlap) * dp_allreduce_time(w, layout, scenario.comm),
        t_tp=tp_time(scenario.comm),
        dip_factor=ck.dip_factor if ck.async_write else 1.0,
        gpus=gpus,
        global_batch_tokens=gb,
        microbatches=m,
    )


def iteration_time(scenario: ScenarioSpec, gpus: int | None = None) -> IterationTimeModel:
    """Iteration time of the scenario's own layout on ``gpus`` GPUs."""
    layout = scenario.workload.layout
    if gpus is None:
        gpus = layout.gpus
    if layout.gpus != gpus:
        raise LayoutMismatch(f"layout product {layout.gpus} != {gpus} GPUs")
    return iteration_model(scenario, layout)


# ---------------------------------------------------------------------------
# Scaling tables
# ---------------------------------------------------------------------------


def adapt_layout(layout: ParallelismLayout, gpus: int) -> ParallelismLayout:
    """Layout for ``gpus`` keeping tp and cp, shrinking pp, filling dp.

    pp becomes the largest divisor of the configured pp that divides what
    is left after tp and cp.
    """
    fixed = layout.tp * layout.cp
    if gpus < fixed or gpus % fixed:
        raise LayoutInfeasible(f"{gpus} GPUs is not a multiple of tp*cp = {fixed}")
    rest = gpus // fixed
    pp = max(d for d in range(1, layout.pp + 1) if layout.pp % d == 0 and rest % d == 0)
    return replace(layout, pp=pp, dp=rest // pp)


@dataclass(frozen=True)
class ScalingRow:
    gpus: int
    tokens_per_s_per_gpu: float
    efficiency: float


@dataclass(frozen=True)
class ScalingTable:
    mode: str
    rows: tuple[ScalingRow, ...]
    # the baseline is an assumption: the published efficiency does not name it
    baseline_gpus: int

    columns = ("gpus", "tokens_per_s_per_gpu", "efficiency")

    def records(self) -> list[dict]:
        return [{"gpus": r.gpus, "tokens_per_s_per_gpu": r.tokens_per_s_per_gpu, "efficiency": r.efficiency} for r in self.rows]

    def to_dict(self) -> list[dict]:
        """JSON form: the bare array of records."""
        return self.records()

    def row(self, gpus: int) -> ScalingRow:
        return next(r for r in self.rows if r.gpus == gpus)


def scaling_table(
    scenario: ScenarioSpec,
    gpu_counts: Sequence[int],
    mode: str = "strong",
    weak_base_tokens: float = WEAK_BASE_BATCH_TOKENS,
) -> ScalingTable:
    """Per-GPU throughput and efficiency relative to the smallest count.

    Strong mode keeps the global batch fixed; weak mode grows it linearly
    from ``weak_base_tokens`` at the smallest count.
    """
    counts = list(gpu_counts)
    if not counts:
        raise ValueError("gpu_counts must be non-empty")
    if counts != sorted(counts) or len(set(counts)) != len(counts):
        raise ValueError("gpu_counts must be strictly ascending")
    if mode not in ("strong", "weak"):
        raise ValueError(f"mode must be 'strong' or 'weak', not {mode!r}")
    base = counts[0]
    tps = []
    for n in counts:
        layout = adapt_layout(scenario.workload.layout, n)
        gb = scenario.workload.global_batch_tokens if mode == "strong" else weak_base_tokens * n / base
        if gb / (layout.dp * scenario.workload.microbatch_tokens) < 1:
            raise LayoutInfeasible(f"fewer than one microbatch per dp rank at {n} GPUs")
        tps.append(iteration_model(scenario, layout, gb).tokens_per_s_per_gpu)
    rows = tuple(ScalingRow(n, t, round(t / tps[0], 3)) for n, t in zip(counts, tps))
    return ScalingTable(mode=mode, rows=rows, baseline_gpus=base)


def calibrate(
    scenario: ScenarioSpec,
    tokens_per_s_per_gpu: float = 723.0,
    efficiency: float = 0.80,
    base_gpus: int = 32,
    top_gpus: int = 4096,
) -> tuple[float, float]:
    """Solve for ``(target_mfu, alpha)`` hitting a throughput and an efficiency.

    For a trial alpha, target_mfu is solved so that ``top_gpus`` reaches the
    throughput; alpha is then solved so the strong-scaling efficiency of
    ``top_gpus`` against ``base_gpus`` matches.
    """
    top_layout = adapt_layout(scenario.workload.layout, top_gpus)
    base_layout = adapt_layout(scenario.workload.layout, base_gpus)

    def with_params(mfu: float, alpha: float) -> ScenarioSpec:
        return replace(
            scenario,
            workload=replace(scenario.workload, target_mfu=mfu),
            comm=replace(scenario.comm, alpha=alpha),
        )

    def mfu_for(alpha: float) -> float:
        def gap(mfu: float) -> float:
            return iteration_model(with_params(mfu, alpha), top_layout).tokens_per_s_per_gpu - tokens_per_s_per_gpu

        return brentq(gap, 1e-4, 1.0, xtol=1e-14, rtol=1e-13)

    def eff_gap(alpha: float) -> float:
        s = with_params(mfu_for(alpha), alpha)
        top = iteration_model(s, top_layout).tokens_per_s_per_gpu
        base = iteration_model(s, base_layout).tokens_per_s_per_gpu
        return top / base - efficiency

    if eff_gap(0.0) < 0:
        raise ValueError("efficiency target is below what bandwidth and bubbles alone allow")
    hi = 1e-6
    while eff_gap(hi) > 0:
        hi *= 2.0
    alpha = brentq(eff_gap, 0.0, hi, xtol=1e-15, rtol=1e-13)
    return mfu_for(alpha), alpha


# ---------------------------------------------------------------------------
# Saturation scoring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TelemetrySample:
    flops_rate: float
    mem_bw: float
    net_bw: float
    timestamp: float = 0.0

    def __post_init__(self):
        if min(self.flops_rate, self.mem_bw, self.net_bw, self.timestamp) < 0:
            raise ValueError("telemetry values must be non-negative")


@dataclass(frozen=True)
class SaturationScore:
    per_resource: dict[str, float]
    bottleneck: str
    headroom: float

    columns = ("resource", "score")

    def records(self) -> list[dict]:
        return [{"resource": r, "score": self.per_resource[r]} for r in RESOURCES]


def saturation_score(
    samples: Sequence[TelemetrySample],
    cluster: ClusterSpec,
    ceilings: tuple[float, float],
) -> SaturationScore:
    """Mean rate over hardware ceiling per resource, clamped to [0, 1].

    ``ceilings`` is ``(mem_bw_peak, net_bw_peak)``; the compute ceiling is
    the boosted peak FLOP rate. Ties for the bottleneck resolve in the order
    compute, memory, network.
    """
    if not samples:
        raise EmptyTelemetry("at least one telemetry sample is required")
    mem_peak, net_peak = ceilings
    n = len(samples)
    means = (
        sum(s.flops_rate for s in samples) / n,
        sum(s.mem_bw for s in samples) / n,
        sum(s.net_bw for s in samples) / n,
    )
    peaks = (cluster.compute_ceiling, mem_peak, net_peak)
    scores = {r: min(1.0, max(0.0, m / p)) for r, m, p in zip(RESOURCES, means, peaks)}
    top = max(scores.values())
    bottleneck = next(r for r in RESOURCES if scores[r] == top)
    return SaturationScore(per_resource=scores, bottleneck=bottleneck, headroom=1.0 - top)
