"""Tiered storage throughput, model-loading plans and tokenization planning.

Bandwidth is shared fairly: each of ``n`` concurrent streams gets an equal
slice of the tier aggregate, capped per stream. Streams reading one file
additionally share that file's striped bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import RateOutOfRange, UnknownTier
from .scenario import DatasetSpec, ScenarioSpec, StorageTierSpec

TOKENIZE_RATE_WINDOW = (1e6, 1e9)


@dataclass(frozen=True)
class ReadWorkload:
    streams: int
    bytes_per_stream: float = 0.0
    pattern: str = "sequential"
    file_sharing: str = "distinct-files"
    op_bytes: float | None = None

    def __post_init__(self):
        if self.streams < 1:
            raise ValueError("streams must be >= 1")
        if self.pattern not in ("sequential", "random"):
            raise ValueError(f"unknown access pattern {self.pattern!r}")
        if self.file_sharing not in ("distinct-files", "same-file"):
            raise ValueError(f"unknown file sharing mode {self.file_sharing!r}")


def resolve_tier(tiers: Iterable[StorageTierSpec], name: str) -> StorageTierSpec:
    for t in tiers:
        if t.name == name:
            return t
    raise UnknownTier(name)


def effective_read_bandwidth(tier: StorageTierSpec, workload: ReadWorkload, stripe_count: int | None = None) -> float:
    """Bytes/s delivered to each stream."""
    if stripe_count is None:
        stripe_count = tier.ost_count
    if not 1 <= stripe_count <= tier.ost_count:
        raise ValueError(f"stripe_count must lie in [1, {tier.ost_count}]")
    n = workload.streams
    bw = min(tier.per_stream_bandwidth_cap, tier.aggregate_bandwidth / n)
    if workload.file_sharing == "same-file":
        stripe_limit = stripe_count * tier.aggregate_bandwidth / tier.ost_count
        bw = min(bw, stripe_limit / n)
    if workload.op_bytes is not None:
        bw = min(bw, tier.iops_cap * workload.op_bytes / n)
    if workload.pattern == "random":
        bw *= tier.random_access_penalty
    return bw


def bandwidth_vs_stripes(tier: StorageTierSpec, workload: ReadWorkload) -> list[tuple[int, float]]:
    """Per-stream bandwidth for every legal stripe count.

    There is no published rule for picking a stripe count from the read
    rate, so the curve is exposed as data.
    """
    return [(k, effective_read_bandwidth(tier, workload, k)) for k in range(1, tier.ost_count + 1)]


# ---------------------------------------------------------------------------
# Model loading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadPlan:
    strategy: str
    read_time: float
    redistribution_time: float
    fs_bytes_moved: float

    @property
    def total_time(self) -> float:
        return self.read_time + self.redistribution_time

    columns = ("strategy", "read_time", "redistribution_time", "total_time", "fs_bytes_moved")

    def records(self) -> list[dict]:
        return [{c: getattr(self, c) for c in self.columns}]


@dataclass(frozen=True)
class LoadComparison:
    """Both strategies plus the one ``auto`` would pick."""

    chosen: LoadPlan
    alternatives: tuple[LoadPlan, ...]

    columns = ("strategy", "read_time", "redistribution_time", "total_time", "fs_bytes_moved", "chosen")

    def records(self) -> list[dict]:
        return [{**p.records()[0], "chosen": p.strategy == self.chosen.strategy} for p in self.alternatives]


def plan_model_load(
    payload_bytes: float,
    nodes: int,
    tier: StorageTierSpec,
    net_bw_per_node: float,
    strategy: str = "auto",
    stripe_count: int | None = None,
) -> LoadPlan:
    """Time to get a model payload onto every node.

    ``all-ranks-read`` has every node read the same file; ``rank0-broadcast``
    reads once and pushes the payload through a pipelined broadcast whose
    cost does not grow with node count. ``auto`` picks the faster one, with
    ties going to ``all-ranks-read``.
    """
    if payload_bytes <= 0:
        raise ValueError("payload_bytes must be > 0")
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    if strategy == "auto":
        a = plan_model_load(payload_bytes, nodes, tier, net_bw_per_node, "all-ranks-read", stripe_count)
        b = plan_model_load(payload_bytes, nodes, tier, net_bw_per_node, "rank0-broadcast", stripe_count)
        return b if b.total_time < a.total_time else a
    if strategy == "all-ranks-read":
        bw = effective_read_bandwidth(tier, ReadWorkload(nodes, payload_bytes, file_sharing="same-file"), stripe_count)
        return LoadPlan(strategy, payload_bytes / bw, 0.0, payload_bytes * nodes)
    if strategy == "rank0-broadcast":
        bw = effective_read_bandwidth(tier, ReadWorkload(1, payload_bytes, file_sharing="same-file"), stripe_count)
        # a single node has nobody to forward to
        redistribution = payload_bytes / net_bw_per_node if nodes > 1 else 0.0
        return LoadPlan(strategy, payload_bytes / bw, redistribution, payload_bytes)
    raise ValueError(f"unknown load strategy {strategy!r}")


def compare_load_strategies(payload_bytes, nodes, tier, net_bw_per_node, stripe_count=None) -> LoadComparison:
    plans = tuple(
        plan_model_load(payload_bytes, nodes, tier, net_bw_per_node, s, stripe_count)
        for s in ("all-ranks-read", "rank0-broadcast")
    )
    chosen = plan_model_load(payload_bytes, nodes, tier, net_bw_per_node, "auto", stripe_count)
    return LoadComparison(chosen=chosen, alternatives=plans)


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenizationPlan:
    total_tokens: float
    per_node_rate: float
    nodes: int
    node_hours: float
    wall_hours: float

    columns = ("total_tokens", "per_node_rate", "nodes", "node_hours", "wall_hours")

    def records(self) -> list[dict]:
        return [{c: getattr(self, c) for c in self.columns}]


def plan_tokenization(
    dataset: DatasetSpec | float,
    per_node_rate: float,
    nodes: int = 1,
    allow_any_rate: bool = False,
) -> TokenizationPlan:
    """Node-hours and wall-hours to tokenize a dataset, assuming perfect scaling."""
    tokens = dataset.total_tokens if isinstance(dataset, DatasetSpec) else float(dataset)
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    lo, hi = TOKENIZE_RATE_WINDOW
    if not allow_any_rate and not lo <= per_node_rate <= hi:
        raise RateOutOfRange(f"per-node rate {per_node_rate:g} tokens/s is outside [{lo:g}, {hi:g}]")
    if per_node_rate <= 0:
        raise RateOutOfRange("per-node rate must be > 0")
    wall_hours = tokens / per_node_rate / 3600.0 / nodes
    # node_hours is defined as the product so the identity holds bit for bit;
    # it differs from the single-node figure by at most an ulp
    return TokenizationPlan(tokens, per_node_rate, nodes, wall_hours * nodes, wall_hours)


# ---------------------------------------------------------------------------
# Scenario helpers used by the simulator
# ---------------------------------------------------------------------------


def image_read_time(scenario: ScenarioSpec, multiplier: float = 1.0) -> float:
    """Every node of the allocation reads the same container image."""
    sc = scenario.scheduler
    if sc.image_bytes <= 0 or sc.image_tier is None:
        return 0.0
    tier = scenario.tier(sc.image_tier)
    wl = ReadWorkload(sc.alloc_nodes, sc.image_bytes, file_sharing="same-file")
    return sc.image_bytes / effective_read_bandwidth(tier, wl, sc.image_stripe_count) / multiplier


def data_read_time(scenario: ScenarioSpec, multiplier: float = 1.0) -> float:
    """Per-iteration dataset read stall, one reader per node over distinct shards."""
    d = scenario.dataset
    tier = scenario.tier(d.tier)
    n = scenario.scheduler.alloc_nodes
    per_iter = scenario.workload.global_batch_tokens * d.bytes_per_token
    wl = ReadWorkload(n, per_iter / n, op_bytes=d.op_bytes)
    bw = effective_read_bandwidth(tier, wl, d.stripe_count)
    return per_iter / (n * bw) / multiplier


def model_load_time(scenario: ScenarioSpec, tier_name: str | None = None) -> float:
    """Fastest way to bring the checkpoint payload onto the allocation."""
    tier = scenario.tier(tier_name or scenario.checkpoint.tier)
    plan = plan_model_load(
        scenario.workload.checkpoint_bytes,
        scenario.scheduler.alloc_nodes,
        tier,
        scenario.cluster.net_bw_per_node,
    )
    return plan.total_time


# ---------------------------------------------------------------------------
# External interference
# ---------------------------------------------------------------------------


class NoiseProcess:
    """Alternating normal/degraded renewal process on one tier.

    Starts in the normal state at t=0. Normal and degraded spells are
    exponential with means ``mean_interval`` and ``mean_duration``. Spells
    are drawn lazily, so queries may come in any order.
    """

    def __init__(self, tier: StorageTierSpec, rng: np.random.Generator | None):
        self.tier = tier
        self.noise = tier.noise
        self._rng = rng
        # _edges[i] is the end of spell i; even spells are normal
        self._edges: list[float] = []

    def _extend(self, t: float) -> None:
        while not self._edges or self._edges[-1] <= t:
            last = self._edges[-1] if self._edges else 0.0
            degraded = len(self._edges) % 2 == 1
            mean = self.noise.mean_duration if degraded else self.noise.mean_interval
            self._edges.append(last + float(self._rng.exponential(mean)))

    def _spell(self, t: float) -> int:
        self._extend(t)
        lo, hi = 0, len(self._edges) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self._edges[mid] > t:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def multiplier(self, t: float) -> float:
        if self.noise is None:
            return 1.0
        return 1.0 - self.noise.degradation_fraction if self._spell(t) % 2 == 1 else 1.0

    def next_change(self, t: float) -> float:
        """First time strictly after ``t`` at which the multiplier may change."""
        if self.noise is None:
            return math.inf
        return self._edges[self._spell(t)]

    def degraded_time(self, t_end: float) -> float:
        """Total degraded time in ``[0, t_end)``."""
        if self.noise is None:
            return 0.0
        self._extend(t_end)
        total, start = 0.0, 0.0
        for i, end in enumerate(self._edges):
            if start >= t_end:
                break
            if i % 2 == 1:
                total += min(end, t_end) - start
            start = end
        return total


def sample_noise_state(tier: StorageTierSpec, time: float, rng: np.random.Generator | None) -> float:
    """Bandwidth multiplier in (0, 1] at ``time`` for a process driven by ``rng``."""
    if tier.noise is None:
        return 1.0
    return NoiseProcess(tier, rng).multiplier(time)
