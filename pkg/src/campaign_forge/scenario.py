"""Scenario domain types, validation, and the sectioned scenario file format.

A scenario file is TOML with the sections ``[cluster]``, ``[storage.<name>]``,
``[workload]``, ``[comm]``, ``[scheduler]``, ``[failures]``, ``[checkpoint]``
and ``[dataset]``; ``seed`` and ``campaign_deadline`` live at top level.
Quantities may carry suffixes (``150GB``, ``2h``) and are normalised to
bytes, seconds and per-second rates at parse time.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import tomli_w

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from .errors import (
    IncompatibleValue,
    ParseError,
    UnknownField,
    UnknownKey,
    UnknownTier,
    ValidationError,
)
from .units import parse_count, parse_duration, parse_size

DEFAULT_SEED = 2025
MEDIA_RANDOM_PENALTY = {"flash": 1.0, "hdd": 0.3}


def _f(kind: str, default: Any = dataclasses.MISSING, unit: str | None = None, key: str | None = None):
    meta = {"kind": kind, "unit": unit, "key": key}
    if default is dataclasses.MISSING:
        return field(metadata=meta)
    return field(default=default, metadata=meta)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterSpec:
    node_count: int = _f("int")
    node_mtbf: float = _f("float", unit="seconds")
    gpus_per_node: int = _f("int", 4)
    gpu_peak_flops: float = _f("float", 989e12)
    prolog_mem_threshold: float = _f("float", 0.90)
    bad_node_prob: float = _f("float", 0.0)
    vboost: bool = _f("bool", False)
    boost_factor: float = _f("float", 1.0)
    net_bw_per_node: float = _f("float", 100e9, unit="bandwidth")

    @property
    def compute_ceiling(self) -> float:
        return self.gpu_peak_flops * self.boost_factor


@dataclass(frozen=True)
class NoiseSpec:
    """External interference on a tier as an alternating renewal process."""

    degradation_fraction: float
    mean_interval: float
    mean_duration: float


@dataclass(frozen=True)
class StorageTierSpec:
    name: str = _f("str")
    aggregate_bandwidth: float = _f("float", unit="bandwidth")
    per_stream_bandwidth_cap: float = _f("float", unit="bandwidth")
    iops_cap: float = _f("float")
    ost_count: int = _f("int")
    media: str = _f("str", "flash")
    random_penalty: float | None = _f("opt_float", None)
    noise: NoiseSpec | None = None

    @property
    def random_access_penalty(self) -> float:
        if self.random_penalty is not None:
            return self.random_penalty
        return MEDIA_RANDOM_PENALTY.get(self.media, 1.0)


@dataclass(frozen=True)
class ParallelismLayout:
    tp: int = 1
    pp: int = 1
    dp: int = 1
    cp: int = 1
    vpp: int = 1

    @property
    def gpus(self) -> int:
        return self.tp * self.pp * self.dp * self.cp


@dataclass(frozen=True)
class WorkloadSpec:
    param_count: int = _f("int")
    token_budget: int = _f("int")
    global_batch_tokens: int = _f("int")
    microbatch_tokens: int = _f("int")
    target_mfu: float = _f("float")
    checkpoint_bytes: float = _f("float", unit="bytes")
    layout: ParallelismLayout = field(default_factory=ParallelismLayout)
    bytes_per_param: float = _f("float", 2.0)

    @property
    def microbatches(self) -> float:
        return self.global_batch_tokens / (self.layout.dp * self.microbatch_tokens)


@dataclass(frozen=True)
class CommModelSpec:
    alpha: float = _f("float", unit="seconds")
    beta_inverse: float = _f("float", unit="bandwidth")
    bucket_bytes: float = _f("float", unit="bytes")
    overlap: float = _f("float", 0.0)
    tp_volume_bytes: float = _f("float", 0.0, unit="bytes")
    tp_count: int = _f("int", 0)
    tp_bandwidth: float = _f("float", math.inf, unit="bandwidth")
    tp_alpha: float = _f("float", 0.0, unit="seconds")


@dataclass(frozen=True)
class SchedulerSpec:
    walltime: float = _f("float", unit="seconds")
    signal_lead: float = _f("float", unit="seconds")
    alloc_nodes: int = _f("int")
    requeue_delay: float = _f("float", 0.0, unit="seconds")
    startup_overhead_base: float = _f("float", 0.0, unit="seconds")
    image_bytes: float = _f("float", 0.0, unit="bytes")
    image_tier: str | None = _f("opt_str", None)
    image_stripe_count: int | None = _f("opt_int", None)
    singleton: bool = _f("bool", True)
    vetting: bool = _f("bool", False)
    vetting_duration: float = _f("float", 60.0, unit="seconds")
    vetting_sensitivity: float = _f("float", 0.9)


@dataclass(frozen=True)
class FailureModelSpec:
    p_rank_startup: float = _f("float", 0.0)
    p_node_port: float = _f("float", 0.0)
    # None means 1 / cluster.node_mtbf; 0 disables node failures
    node_failure_rate: float | None = _f("opt_float", None)
    oom_h0: float = _f("float", 0.0)
    oom_growth: float = _f("float", 0.0)
    cache_flush_prolog: bool = _f("bool", False)
    bad_node_ttf: float = _f("float", 900.0, unit="seconds")

    @property
    def effective_oom_growth(self) -> float:
        return 0.0 if self.cache_flush_prolog else self.oom_growth


@dataclass(frozen=True)
class CheckpointPolicy:
    """Checkpoint cadence and cost.

    ``write_cost`` is what one checkpoint costs training: the full stall for
    synchronous writes, or ``(dip_factor - 1) * write_duration`` for
    asynchronous ones.
    """

    write_cost: float = _f("float", unit="seconds")
    tier: str = _f("str")
    interval_iterations: int | None = _f("opt_int", None)
    interval_seconds: float | None = _f("opt_float", None, unit="seconds")
    async_write: bool = _f("bool", False, key="async")
    dip_factor: float = _f("float", 1.0)
    write_duration: float = _f("float", 0.0, unit="seconds")
    restore_cost: float = _f("float", 0.0, unit="seconds")

    @property
    def final_write_time(self) -> float:
        """Blocking time of the last checkpoint before an allocation exits."""
        return self.write_duration if self.async_write else self.write_cost


@dataclass(frozen=True)
class DatasetSpec:
    total_bytes: float = _f("float", unit="bytes")
    shard_count: int = _f("int")
    total_tokens: float = _f("float")
    tier: str = _f("str")
    stripe_count: int = _f("int", 1)
    op_bytes: float = _f("float", 4e6, unit="bytes")

    @property
    def mean_shard_bytes(self) -> float:
        return self.total_bytes / self.shard_count

    @property
    def bytes_per_token(self) -> float:
        return self.total_bytes / self.total_tokens


@dataclass(frozen=True)
class ScenarioSpec:
    cluster: ClusterSpec
    tiers: tuple[StorageTierSpec, ...]
    workload: WorkloadSpec
    comm: CommModelSpec
    scheduler: SchedulerSpec
    failures: FailureModelSpec
    checkpoint: CheckpointPolicy
    dataset: DatasetSpec
    seed: int = DEFAULT_SEED
    campaign_deadline: float | None = None

    def tier(self, name: str) -> StorageTierSpec:
        for t in self.tiers:
            if t.name == name:
                return t
        raise UnknownTier(name)

    @property
    def alloc_gpus(self) -> int:
        return self.scheduler.alloc_nodes * self.cluster.gpus_per_node

    @property
    def node_failure_rate(self) -> float:
        rate = self.failures.node_failure_rate
        return 1.0 / self.cluster.node_mtbf if rate is None else rate

    def digest(self) -> str:
        return hashlib.sha256(to_toml(self).encode()).hexdigest()

    def environment_digest(self) -> str:
        """Digest of everything except policy knobs and the seed.

        Two scenarios with equal environment digests differ only in
        checkpoint policy, vetting, the cache-flush prolog or vBoost.
        """
        neutral = replace(
            self,
            seed=0,
            checkpoint=CheckpointPolicy(write_cost=1.0, tier="", interval_iterations=1),
            scheduler=replace(self.scheduler, vetting=False, vetting_duration=0.0, vetting_sensitivity=0.0),
            failures=replace(self.failures, cache_flush_prolog=False),
            cluster=replace(self.cluster, vboost=False, boost_factor=1.0),
        )
        return hashlib.sha256(to_toml(neutral).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _in01(x: float) -> bool:
    return 0.0 <= x <= 1.0


def validate(s: ScenarioSpec) -> list[tuple[str, str]]:
    """Every violated invariant as ``(field path, message)``."""
    p: list[tuple[str, str]] = []

    def need(ok: bool, path: str, msg: str) -> None:
        if not ok:
            p.append((path, msg))

    c = s.cluster
    need(c.node_count >= 1, "cluster.node_count", "must be >= 1")
    need(c.gpus_per_node >= 1, "cluster.gpus_per_node", "must be >= 1")
    need(c.gpu_peak_flops > 0, "cluster.gpu_peak_flops", "must be > 0")
    need(c.node_mtbf > 0, "cluster.node_mtbf", "must be > 0")
    need(_in01(c.prolog_mem_threshold), "cluster.prolog_mem_threshold", "must lie in [0, 1]")
    need(_in01(c.bad_node_prob), "cluster.bad_node_prob", "must lie in [0, 1]")
    need(c.boost_factor >= 1, "cluster.boost_factor", "must be >= 1")
    need(c.vboost or c.boost_factor == 1.0, "cluster.boost_factor", "must be exactly 1 when vboost is off")
    need(c.net_bw_per_node > 0, "cluster.net_bw_per_node", "must be > 0")

    names = [t.name for t in s.tiers]
    need(len(names) == len(set(names)), "storage", "tier names must be unique")
    for t in s.tiers:
        base = f"storage.{t.name}"
        need(t.aggregate_bandwidth > 0, f"{base}.aggregate_bandwidth", "must be > 0")
        need(t.per_stream_bandwidth_cap > 0, f"{base}.per_stream_bandwidth_cap", "must be > 0")
        need(
            t.per_stream_bandwidth_cap <= t.aggregate_bandwidth,
            f"{base}.per_stream_bandwidth_cap",
            "must not exceed aggregate_bandwidth",
        )
        need(t.iops_cap > 0, f"{base}.iops_cap", "must be > 0")
        need(t.ost_count >= 1, f"{base}.ost_count", "must be >= 1")
        need(t.media in MEDIA_RANDOM_PENALTY, f"{base}.media", "must be 'flash' or 'hdd'")
        if t.random_penalty is not None:
            need(0 < t.random_penalty <= 1, f"{base}.random_penalty", "must lie in (0, 1]")
        if t.noise is not None:
            need(0 <= t.noise.degradation_fraction < 1, f"{base}.noise_degradation", "must lie in [0, 1)")
            need(t.noise.mean_interval > 0, f"{base}.noise_interval", "must be > 0")
            need(t.noise.mean_duration > 0, f"{base}.noise_duration", "must be > 0")

    def tier_ref(path: str, name: str | None) -> None:
        if name is not None:
            need(name in names, path, f"references unknown tier {name!r}")

    w = s.workload
    lay = w.layout
    for k in ("param_count", "token_budget", "global_batch_tokens", "microbatch_tokens"):
        need(getattr(w, k) > 0, f"workload.{k}", "must be > 0")
    need(0 < w.target_mfu <= 1, "workload.target_mfu", "must lie in (0, 1]")
    need(w.bytes_per_param > 0, "workload.bytes_per_param", "must be > 0")
    for k in ("tp", "pp", "dp", "cp", "vpp"):
        need(getattr(lay, k) >= 1, f"workload.{k}", "must be >= 1")
    need(lay.tp <= c.gpus_per_node, "workload.tp", "must not exceed cluster.gpus_per_node")
    if lay.dp >= 1 and w.microbatch_tokens > 0:
        need(
            w.global_batch_tokens % (lay.dp * w.microbatch_tokens) == 0,
            "workload.global_batch_tokens",
            f"must be divisible by dp * microbatch_tokens = {lay.dp * w.microbatch_tokens}",
        )
    need(
        w.checkpoint_bytes >= w.param_count * w.bytes_per_param,
        "workload.checkpoint_bytes",
        "must be >= param_count * bytes_per_param",
    )
    need(
        lay.gpus == s.alloc_gpus,
        "workload.layout",
        f"tp*pp*dp*cp = {lay.gpus} does not match allocated GPUs "
        f"{s.scheduler.alloc_nodes} nodes x {c.gpus_per_node} = {s.alloc_gpus}",
    )

    m = s.comm
    need(m.alpha >= 0, "comm.alpha", "must be >= 0")
    need(m.tp_alpha >= 0, "comm.tp_alpha", "must be >= 0")
    need(m.beta_inverse > 0, "comm.beta_inverse", "must be > 0")
    need(m.bucket_bytes > 0, "comm.bucket_bytes", "must be > 0")
    need(_in01(m.overlap), "comm.overlap", "must lie in [0, 1]")
    need(m.tp_volume_bytes >= 0, "comm.tp_volume_bytes", "must be >= 0")
    need(m.tp_count >= 0, "comm.tp_count", "must be >= 0")
    need(m.tp_bandwidth > 0, "comm.tp_bandwidth", "must be > 0")

    sc = s.scheduler
    need(sc.walltime > 0, "scheduler.walltime", "must be > 0")
    need(0 < sc.signal_lead < sc.walltime, "scheduler.signal_lead", "must lie in (0, walltime)")
    need(sc.requeue_delay >= 0, "scheduler.requeue_delay", "must be >= 0")
    need(sc.startup_overhead_base >= 0, "scheduler.startup_overhead_base", "must be >= 0")
    need(sc.image_bytes >= 0, "scheduler.image_bytes", "must be >= 0")
    need(1 <= sc.alloc_nodes <= c.node_count, "scheduler.alloc_nodes", "must lie in [1, cluster.node_count]")
    need(sc.vetting_duration >= 0, "scheduler.vetting_duration", "must be >= 0")
    need(_in01(sc.vetting_sensitivity), "scheduler.vetting_sensitivity", "must lie in [0, 1]")
    need(sc.image_bytes == 0 or sc.image_tier is not None, "scheduler.image_tier", "required when image_bytes > 0")
    tier_ref("scheduler.image_tier", sc.image_tier)
    if sc.image_stripe_count is not None:
        need(sc.image_stripe_count >= 1, "scheduler.image_stripe_count", "must be >= 1")
        if sc.image_tier in names:
            need(
                sc.image_stripe_count <= s.tier(sc.image_tier).ost_count,
                "scheduler.image_stripe_count",
                "must not exceed the tier's ost_count",
            )

    f = s.failures
    need(_in01(f.p_rank_startup), "failures.p_rank_startup", "must lie in [0, 1]")
    need(_in01(f.p_node_port), "failures.p_node_port", "must lie in [0, 1]")
    if f.node_failure_rate is not None:
        need(f.node_failure_rate >= 0, "failures.node_failure_rate", "must be >= 0")
    need(f.oom_h0 >= 0, "failures.oom_h0", "must be >= 0")
    need(f.oom_growth >= 0, "failures.oom_growth", "must be >= 0")
    need(f.bad_node_ttf > 0, "failures.bad_node_ttf", "must be > 0")

    k = s.checkpoint
    need(
        (k.interval_iterations is None) != (k.interval_seconds is None),
        "checkpoint.interval_iterations",
        "exactly one of interval_iterations / interval_seconds must be set",
    )
    if k.interval_iterations is not None:
        need(k.interval_iterations > 0, "checkpoint.interval_iterations", "must be > 0")
    if k.interval_seconds is not None:
        need(k.interval_seconds > 0, "checkpoint.interval_seconds", "must be > 0")
    need(k.write_cost > 0, "checkpoint.write_cost", "must be > 0")
    need(k.restore_cost >= 0, "checkpoint.restore_cost", "must be >= 0")
    tier_ref("checkpoint.tier", k.tier)
    if k.async_write:
        need(k.dip_factor >= 1, "checkpoint.dip_factor", "must be >= 1")
        need(k.write_duration > 0, "checkpoint.write_duration", "must be > 0 for async writes")
        integrated = (k.dip_factor - 1.0) * k.write_duration
        need(
            abs(integrated - k.write_cost) <= 0.01 * k.write_cost,
            "checkpoint.dip_factor",
            f"(dip_factor - 1) * write_duration = {integrated:g} must equal write_cost within 1%",
        )

    d = s.dataset
    need(d.total_bytes > 0, "dataset.total_bytes", "must be > 0")
    need(d.shard_count >= 1, "dataset.shard_count", "must be >= 1")
    need(d.total_tokens > 0, "dataset.total_tokens", "must be > 0")
    need(d.op_bytes > 0, "dataset.op_bytes", "must be > 0")
    tier_ref("dataset.tier", d.tier)
    need(d.stripe_count >= 1, "dataset.stripe_count", "must be >= 1")
    if d.tier in names:
        need(d.stripe_count <= s.tier(d.tier).ost_count, "dataset.stripe_count", "must not exceed the tier's ost_count")

    need(0 <= s.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
    if s.campaign_deadline is not None:
        need(s.campaign_deadline > 0, "campaign_deadline", "must be > 0")
    return p


def check(s: ScenarioSpec) -> ScenarioSpec:
    problems = validate(s)
    if problems:
        raise ValidationError(problems)
    return s


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_LAYOUT_KEYS = ("tp", "pp", "dp", "cp", "vpp")
_NOISE_KEYS = {"noise_degradation": "degradation_fraction", "noise_interval": "mean_interval", "noise_duration": "mean_duration"}
_SECTIONS = {
    "cluster": ClusterSpec,
    "workload": WorkloadSpec,
    "comm": CommModelSpec,
    "scheduler": SchedulerSpec,
    "failures": FailureModelSpec,
    "checkpoint": CheckpointPolicy,
    "dataset": DatasetSpec,
}


def _convert(value: Any, kind: str, unit: str | None) -> Any:
    base = kind.removeprefix("opt_")
    if base == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"expected true/false, got {value!r}")
        return value
    if base == "str":
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    # exact integers skip the float path so 64-bit seeds survive
    if base == "int" and isinstance(value, int):
        return value
    if base == "int" and isinstance(value, str) and value.strip().isdigit():
        return int(value.strip())
    if unit == "seconds":
        x = parse_duration(value)
    elif unit in ("bytes", "bandwidth"):
        x = parse_size(value)
    else:
        x = parse_count(value)
    if base == "int":
        if not math.isfinite(x) or x != int(x):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(x)
    return float(x)


def _keymap(cls) -> dict[str, dataclasses.Field]:
    out = {}
    for fl in fields(cls):
        if "kind" in fl.metadata:
            out[fl.metadata.get("key") or fl.name] = fl
    return out


def _build_section(cls, table: dict, section: str, problems, unknown, extra=None):
    kwargs: dict[str, Any] = {}
    keys = _keymap(cls)
    for key, value in table.items():
        if extra is not None and key in extra:
            continue
        fl = keys.get(key)
        if fl is None:
            unknown.append(f"{section}.{key}")
            continue
        try:
            kwargs[fl.name] = _convert(value, fl.metadata["kind"], fl.metadata["unit"])
        except ValueError as exc:
            problems.append((f"{section}.{key}", str(exc)))
    for key, fl in keys.items():
        required = fl.default is dataclasses.MISSING and fl.default_factory is dataclasses.MISSING
        if required and fl.name not in kwargs and not any(pth == f"{section}.{key}" for pth, _ in problems):
            problems.append((f"{section}.{key}", "required field is missing"))
    return kwargs


_LINE_RE = re.compile(r"line (\d+)")


def parse_scenario(text: str, *, strict: bool = True) -> ScenarioSpec:
    """Parse and validate scenario text."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        raise ParseError(str(exc), int(m.group(1)) if m else None) from None
    return from_dict(doc, strict=strict)


def from_dict(doc: dict, *, strict: bool = True) -> ScenarioSpec:
    problems: list[tuple[str, str]] = []
    unknown: list[str] = []
    built: dict[str, Any] = {}

    for section, cls in _SECTIONS.items():
        table = doc.get(section)
        if table is None:
            table = {}
            problems.append((section, "section is missing"))
        elif not isinstance(table, dict):
            problems.append((section, "must be a table"))
            continue
        if section == "workload":
            kw = _build_section(cls, table, section, problems, unknown, extra=_LAYOUT_KEYS)
            lay = {}
            for k in _LAYOUT_KEYS:
                if k in table:
                    try:
                        lay[k] = _convert(table[k], "int", None)
                    except ValueError as exc:
                        problems.append((f"workload.{k}", str(exc)))
                elif k in ("tp", "pp", "dp"):
                    problems.append((f"workload.{k}", "required field is missing"))
            kw["layout"] = ParallelismLayout(**lay)
        else:
            kw = _build_section(cls, table, section, problems, unknown)
        built[section] = kw

    tiers = []
    storage = doc.get("storage", {})
    if not isinstance(storage, dict) or not storage:
        problems.append(("storage", "at least one [storage.<name>] tier is required"))
        storage = {}
    for name, table in storage.items():
        if not isinstance(table, dict):
            problems.append((f"storage.{name}", "must be a table"))
            continue
        kw = _build_section(StorageTierSpec, {"name": name, **table}, f"storage.{name}", problems, unknown, extra=_NOISE_KEYS)
        present = [k for k in _NOISE_KEYS if k in table]
        if present:
            if len(present) != len(_NOISE_KEYS):
                problems.append((f"storage.{name}.noise", "noise_degradation, noise_interval and noise_duration go together"))
            else:
                try:
                    kw["noise"] = NoiseSpec(
                        degradation_fraction=_convert(table["noise_degradation"], "float", None),
                        mean_interval=_convert(table["noise_interval"], "float", "seconds"),
                        mean_duration=_convert(table["noise_duration"], "float", "seconds"),
                    )
                except ValueError as exc:
                    problems.append((f"storage.{name}.noise", str(exc)))
        tiers.append(kw)

    top: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTIONS or key == "storage":
            continue
        if key == "seed":
            try:
                top["seed"] = _convert(value, "int", None)
            except ValueError as exc:
                problems.append(("seed", str(exc)))
        elif key == "campaign_deadline":
            try:
                top["campaign_deadline"] = _convert(value, "float", "seconds")
            except ValueError as exc:
                problems.append(("campaign_deadline", str(exc)))
        else:
            unknown.append(key)

    if unknown and strict:
        raise UnknownKey(unknown)
    if problems:
        raise ValidationError(problems)

    try:
        spec = ScenarioSpec(
            cluster=ClusterSpec(**built["cluster"]),
            tiers=tuple(StorageTierSpec(**kw) for kw in tiers),
            workload=WorkloadSpec(**built["workload"]),
            comm=CommModelSpec(**built["comm"]),
            scheduler=SchedulerSpec(**built["scheduler"]),
            failures=FailureModelSpec(**built["failures"]),
            checkpoint=CheckpointPolicy(**built["checkpoint"]),
            dataset=DatasetSpec(**built["dataset"]),
            **top,
        )
    except TypeError as exc:  # pragma: no cover - guarded by the missing-field checks
        raise ValidationError([("scenario", str(exc))]) from None
    return check(spec)


def load_scenario(path: str | Path, *, strict: bool = True) -> ScenarioSpec:
    """Read, parse and validate a scenario file."""
    text = Path(path).read_text()
    return parse_scenario(text, strict=strict)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _section_dict(obj) -> dict[str, Any]:
    out = {}
    for fl in fields(obj):
        if "kind" not in fl.metadata:
            continue
        value = getattr(obj, fl.name)
        if value is None:
            continue
        out[fl.metadata.get("key") or fl.name] = value
    return out


def to_dict(s: ScenarioSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {"seed": s.seed}
    if s.campaign_deadline is not None:
        doc["campaign_deadline"] = s.campaign_deadline
    doc["cluster"] = _section_dict(s.cluster)
    storage = {}
    for t in s.tiers:
        d = _section_dict(t)
        d.pop("name")
        if t.noise is not None:
            d["noise_degradation"] = t.noise.degradation_fraction
            d["noise_interval"] = t.noise.mean_interval
            d["noise_duration"] = t.noise.mean_duration
        storage[t.name] = d
    doc["storage"] = storage
    wl = _section_dict(s.workload)
    for k in _LAYOUT_KEYS:
        wl[k] = getattr(s.workload.layout, k)
    doc["workload"] = wl
    for section in ("comm", "scheduler", "failures", "checkpoint", "dataset"):
        doc[section] = _section_dict(getattr(s, section))
    return doc


def to_toml(s: ScenarioSpec) -> str:
    return tomli_w.dumps(to_dict(s))


def save_scenario(s: ScenarioSpec, path: str | Path) -> None:
    Path(path).write_text(to_toml(s))


# ---------------------------------------------------------------------------
# Field paths (used by sweeps and CLI overrides)
# ---------------------------------------------------------------------------


def _field_kind(obj, name: str) -> tuple[str, str | None] | None:
    for fl in fields(obj):
        if (fl.metadata.get("key") or fl.name) == name and "kind" in fl.metadata:
            return fl.metadata["kind"], fl.metadata["unit"]
    return None


def get_field(s: ScenarioSpec, path: str) -> Any:
    parts = path.split(".")
    if parts == ["seed"] or parts == ["campaign_deadline"]:
        return getattr(s, parts[0])
    if len(parts) == 3 and parts[0] == "storage":
        try:
            tier = s.tier(parts[1])
        except UnknownTier:
            raise UnknownField(path) from None
        if _field_kind(tier, parts[2]) is None:
            raise UnknownField(path)
        return getattr(tier, parts[2])
    if len(parts) == 2 and parts[0] in _SECTIONS:
        section = getattr(s, parts[0])
        if parts[0] == "workload" and parts[1] in _LAYOUT_KEYS:
            return getattr(section.layout, parts[1])
        spec = _field_kind(section, parts[1])
        if spec is None:
            raise UnknownField(path)
        name = next(fl.name for fl in fields(section) if (fl.metadata.get("key") or fl.name) == parts[1])
        return getattr(section, name)
    raise UnknownField(path)


def with_field(s: ScenarioSpec, path: str, value: Any, *, validate_result: bool = True) -> ScenarioSpec:
    """Copy of ``s`` with one field replaced.

    ``value`` is coerced like a scenario-file value, so ``"2h"`` works for a
    duration. Setting one checkpoint interval form clears the other.
    """
    parts = path.split(".")

    def coerce(kind: str, unit: str | None) -> Any:
        if value is None and kind.startswith("opt_"):
            return None
        if kind.removeprefix("opt_") == "bool" and isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        try:
            return _convert(value, kind, unit)
        except ValueError as exc:
            raise IncompatibleValue(f"{path}: {exc}") from None

    if parts == ["seed"]:
        out = replace(s, seed=coerce("int", None))
    elif parts == ["campaign_deadline"]:
        out = replace(s, campaign_deadline=coerce("opt_float", "seconds"))
    elif len(parts) == 3 and parts[0] == "storage":
        try:
            tier = s.tier(parts[1])
        except UnknownTier:
            raise UnknownField(path) from None
        spec = _field_kind(tier, parts[2])
        if spec is None or parts[2] == "name":
            raise UnknownField(path)
        new_tier = replace(tier, **{parts[2]: coerce(*spec)})
        out = replace(s, tiers=tuple(new_tier if t.name == tier.name else t for t in s.tiers))
    elif len(parts) == 2 and parts[0] in _SECTIONS:
        section = getattr(s, parts[0])
        if parts[0] == "workload" and parts[1] in _LAYOUT_KEYS:
            lay = replace(section.layout, **{parts[1]: coerce("int", None)})
            new_section = replace(section, layout=lay)
        else:
            spec = _field_kind(section, parts[1])
            if spec is None:
                raise UnknownField(path)
            name = next(fl.name for fl in fields(section) if (fl.metadata.get("key") or fl.name) == parts[1])
            changes = {name: coerce(*spec)}
            if parts[0] == "checkpoint" and name == "interval_iterations":
                changes["interval_seconds"] = None
            elif parts[0] == "checkpoint" and name == "interval_seconds":
                changes["interval_iterations"] = None
            new_section = replace(section, **changes)
        out = replace(s, **{parts[0]: new_section})
    else:
        raise UnknownField(path)
    return check(out) if validate_result else out
