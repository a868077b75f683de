"""Deterministic discrete-event simulation of a training campaign.

One campaign is a chain of singleton allocations. Each allocation may run a
vetting prolog, launches the job (container image read, startup failures),
restores the last valid checkpoint and trains until a failure, the
pre-expiry signal, the campaign deadline, or the token budget ends it.

Time advances in blocks of iterations: within a block every iteration has
the same wall time, so a 90-day campaign needs only a few thousand steps.
Failures, the signal and the deadline take effect at the boundary of the
iteration they interrupt; the interrupted partial iteration is wasted.

Asynchronous checkpoint writes progress with training. A write of
``write_duration`` finishes after that many seconds of undisturbed training
work; meanwhile each iteration runs ``dip_factor`` times slower, so the
integrated slowdown per checkpoint is ``(dip_factor - 1) * write_duration``.
When training is paused the writer proceeds at wall-clock rate.

Every event carries an ``acct`` map attributing wall seconds to the waste
categories, and failures carry the ``rolled_back`` work they discard. The
goodput breakdown is a fold over those records.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import perf
from .errors import DigestMismatch, NonTerminating
from .resilience import to_iterations
from .rng import StreamSet, named_stream
from .scenario import ScenarioSpec, get_field, with_field
from .storage import NoiseProcess, data_read_time, image_read_time, model_load_time

EVENT_KINDS = (
    "AllocStart",
    "VettingPass",
    "VettingAbort",
    "JobStart",
    "StartupFail",
    "IterationBlockDone",
    "CheckpointBegin",
    "CheckpointDone",
    "NodeFailure",
    "OomFailure",
    "SignalDelivered",
    "FinalCheckpoint",
    "AllocEnd",
    "Requeue",
    "CampaignDone",
)
WASTE_CATEGORIES = (
    "useful_compute",
    "recomputation",
    "checkpoint_overhead",
    "startup_restore",
    "vetting",
    "bubble_comm",
    "idle_requeue",
)
MAX_ALLOCATIONS = 1_000_000


@dataclass(frozen=True)
class Event:
    time: float
    seq: int
    kind: str
    payload: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"time": self.time, "seq": self.seq, "kind": self.kind, "payload": self.payload}


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class EventTrace:
    events: list[Event]
    scenario_digest: str
    seed: int

    def header(self) -> dict:
        return {"record": "header", "scenario_digest": self.scenario_digest, "seed": self.seed}

    def to_ndjson(self) -> str:
        lines = [_dumps(self.header())]
        lines.extend(_dumps(e.to_record()) for e in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ndjson(cls, text: str) -> EventTrace:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        events = []
        for ln in lines[1:]:
            r = json.loads(ln)
            events.append(Event(r["time"], r["seq"], r["kind"], r["payload"]))
        return cls(events, head["scenario_digest"], head["seed"])

    def to_csv(self) -> str:
        """Compact timeline: header comment, then ``time,seq,kind,detail``."""
        buf = io.StringIO()
        buf.write(f"# scenario_digest={self.scenario_digest} seed={self.seed}\n")
        buf.write("time,seq,kind,detail\n")
        for e in self.events:
            detail = ";".join(
                f"{k}={v}" for k, v in sorted(e.payload.items()) if k not in ("acct", "rolled_back") and v is not None
            )
            buf.write(f"{e.time!r},{e.seq},{e.kind},{detail}\n")
        return buf.getvalue()

    def hash(self) -> str:
        return hashlib.sha256(self.to_ndjson().encode()).hexdigest()

    def counts(self) -> dict[str, int]:
        out = dict.fromkeys(EVENT_KINDS, 0)
        for e in self.events:
            out[e.kind] += 1
        return out

    def of_kind(self, *kinds: str) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    @property
    def final(self) -> Event:
        return self.events[-1]


# ---------------------------------------------------------------------------
# Analytic helpers shared with the planners
# ---------------------------------------------------------------------------


def startup_duration(scenario: ScenarioSpec, multiplier: float = 1.0) -> float:
    return scenario.scheduler.startup_overhead_base + image_read_time(scenario, multiplier)


def expected_bad_node_loss(scenario: ScenarioSpec) -> float:
    """GPU-seconds an undetected bad node wastes beyond the common requeue.

    A bad node crashes the job ``bad_node_ttf`` seconds after launch, so the
    launch overhead and the time until the crash are lost. This is the
    ``expected_loss_on_bad`` that makes the analytic vetting value agree with
    the simulator, provided the crash comes before the first checkpoint.
    """
    return (startup_duration(scenario) + scenario.failures.bad_node_ttf) * scenario.alloc_gpus


def sample_startup(streams: StreamSet, scenario: ScenarioSpec) -> tuple[str, int] | None:
    """Draw one launch; return ``(cause, unit)`` of the first failure or None."""
    f = scenario.failures
    if f.p_node_port > 0:
        hit = np.flatnonzero(streams["port"].random(scenario.scheduler.alloc_nodes) < f.p_node_port)
        if hit.size:
            return "port", int(hit[0])
    if f.p_rank_startup > 0:
        hit = np.flatnonzero(streams["startup"].random(scenario.alloc_gpus) < f.p_rank_startup)
        if hit.size:
            return "rank", int(hit[0])
    return None


def startup_trials(scenario: ScenarioSpec, trials: int, seed: int | None = None) -> int:
    """Number of failed launches among ``trials`` independent launch draws."""
    streams = StreamSet(scenario.seed if seed is None else seed)
    return sum(sample_startup(streams, scenario) is not None for _ in range(trials))


def _oom_delay(rng: np.random.Generator, h0: float, growth: float) -> float:
    """Time to OOM under hazard ``h0 + growth * t`` by inverting the cumulative hazard."""
    if h0 <= 0 and growth <= 0:
        return math.inf
    e = float(rng.exponential(1.0))
    if growth <= 0:
        return e / h0
    return (-h0 + math.sqrt(h0 * h0 + 2.0 * growth * e)) / growth


def check_terminating(scenario: ScenarioSpec) -> None:
    """Raise NonTerminating when an allocation can never bank progress."""
    if scenario.campaign_deadline is not None:
        return
    sc, f, ck = scenario.scheduler, scenario.failures, scenario.checkpoint
    why = []
    if f.p_node_port >= 1 or f.p_rank_startup >= 1:
        why.append("every launch fails at startup")
    if scenario.cluster.bad_node_prob >= 1:
        why.append("every node is unhealthy")
    it = perf.iteration_time(scenario).t_iteration + data_read_time(scenario)
    overhead = startup_duration(scenario) + model_load_time(scenario) + ck.restore_cost
    if sc.vetting:
        overhead += sc.vetting_duration
    window = sc.walltime - sc.signal_lead - overhead
    if window < it:
        why.append("no iteration fits in an allocation")
    interval = _interval_iterations(scenario, it)
    periodic = interval * it + (ck.write_duration * ck.dip_factor if ck.async_write else ck.write_cost)
    final_fits = ck.final_write_time <= sc.signal_lead and ck.write_cost <= sc.signal_lead
    if not final_fits and periodic > window:
        why.append("neither a periodic nor a final checkpoint fits in an allocation")
    if why:
        raise NonTerminating("; ".join(why))


def _interval_iterations(scenario: ScenarioSpec, iteration_time: float) -> int:
    ck = scenario.checkpoint
    if ck.interval_iterations is not None:
        return ck.interval_iterations
    return to_iterations(ck.interval_seconds, iteration_time)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class _Interrupted(Exception):
    def __init__(self, why: str):
        self.why = why


class _Campaign:
    def __init__(self, scenario: ScenarioSpec):
        s = self.s = scenario
        it = perf.iteration_time(scenario)
        self.t_compute = it.t_compute
        self.t_iter = it.t_iteration
        self.read_base = data_read_time(scenario)
        self.gb = s.workload.global_batch_tokens
        self.total_iters = math.ceil(s.workload.token_budget / self.gb)
        self.interval = _interval_iterations(scenario, self.t_iter + self.read_base)
        self.horizon = math.inf if s.campaign_deadline is None else s.campaign_deadline
        self.streams = StreamSet(s.seed)
        self.noise = {t.name: NoiseProcess(t, named_stream(s.seed, f"noise:{t.name}")) for t in s.tiers if t.noise}
        self.nodes = s.scheduler.alloc_nodes

        self.t = 0.0
        self.events: list[Event] = []
        self.acct: dict[str, float] = {}
        self.allocation = 0

        self.iter = 0
        self.valid = (0, 0)  # (checkpoint id, iteration); id 0 means "from scratch"
        self.next_id = 1
        self.last_begun = 0
        self.writing: dict | None = None
        self.cum = (0.0, 0.0)
        self.marks: dict[int, tuple[float, float]] = {0: (0.0, 0.0)}
        self.block_start = 0
        self.block_end_time = 0.0

    # -- bookkeeping -------------------------------------------------------

    def _charge(self, category: str, seconds: float) -> None:
        if seconds:
            self.acct[category] = self.acct.get(category, 0.0) + seconds

    def _emit(self, kind: str, time: float | None = None, **payload) -> None:
        if kind != "IterationBlockDone":
            self._flush_block()
        if self.acct:
            payload["acct"] = dict(sorted(self.acct.items()))
            self.acct = {}
        t = self.t if time is None else time
        self.events.append(Event(t, len(self.events), kind, payload))

    def _flush_block(self) -> None:
        if self.iter > self.block_start:
            first = self.block_start + 1
            self.block_start = self.iter
            self._emit("IterationBlockDone", self.block_end_time, first=first, last=self.iter, iterations=self.iter - first + 1)
        self.block_start = self.iter

    def _multiplier(self, tier: str, t: float) -> float:
        proc = self.noise.get(tier)
        return 1.0 if proc is None else proc.multiplier(t)

    # -- interrupts --------------------------------------------------------

    def _next_cut(self) -> tuple[float, str]:
        cut = min(
            (self.fail_at, "failure"),
            (self.horizon, "horizon"),
            (self.expiry, "expiry"),
            (self.signal_at if not self.signaled else math.inf, "signal"),
        )
        return cut

    def _phase(self, duration: float, category: str) -> None:
        """Spend ``duration`` seconds outside training; the signal does not stop it."""
        end = self.t + duration
        while True:
            cut_t, why = self._next_cut()
            if cut_t >= end:
                self._charge(category, end - self.t)
                self.t = end
                return
            self._charge(category, cut_t - self.t)
            self.t = cut_t
            if why == "signal":
                self._deliver_signal()
                continue
            raise _Interrupted(why)

    def _deliver_signal(self, at: float | None = None) -> None:
        self.signaled = True
        self._emit("SignalDelivered", at, allocation=self.allocation, expiry=self.expiry)

    def _rollback(self) -> dict:
        """Discard work after the last valid checkpoint."""
        self._flush_block()
        invalidated = None
        if self.writing is not None:
            invalidated = self.writing["id"]
            self.writing = None
        vid, vit = self.valid
        base = self.marks[vit]
        lost = {
            "iterations": self.iter - vit,
            "compute": self.cum[0] - base[0],
            "overhead": self.cum[1] - base[1],
        }
        self.iter = vit
        self.block_start = vit
        self.cum = base
        self.marks = {k: v for k, v in self.marks.items() if k <= vit}
        self.last_begun = vit
        return {"invalidated_checkpoint": invalidated, "rolled_back": lost}

    def _handle_cut(self, why: str) -> str:
        if why == "horizon":
            self._emit("AllocEnd", allocation=self.allocation, reason="deadline", clean=False)
            return "done"
        if why == "expiry":
            info = self._rollback()
            self._emit("AllocEnd", allocation=self.allocation, reason="expired", clean=False, **info)
            return "requeue"
        # failure
        kind, cause, node = self.fail_kind
        info = self._rollback()
        self._emit(kind, cause=cause, node=node, **info)
        self._emit("AllocEnd", allocation=self.allocation, reason="failure", clean=False)
        return "requeue"

    # -- checkpoints -------------------------------------------------------

    def _complete_write(self) -> None:
        w = self.writing
        self.writing = None
        self.valid = (w["id"], w["iteration"])
        self._emit("CheckpointDone", checkpoint=w["id"], iteration=w["iteration"])

    def _drain_write(self) -> None:
        """Wait, with training paused, for the in-flight write to finish."""
        if self.writing is not None:
            self._phase(self.writing["rem"], "checkpoint_overhead")
            self._complete_write()

    def _begin_checkpoint(self) -> None:
        self._drain_write()
        ck = self.s.checkpoint
        cid = self.next_id
        self.next_id += 1
        self.marks[self.iter] = self.cum
        self.last_begun = self.iter
        self._emit(
            "CheckpointBegin",
            checkpoint=cid,
            iteration=self.iter,
            bytes=self.s.workload.checkpoint_bytes,
            asynchronous=ck.async_write,
        )
        m = self._multiplier(ck.tier, self.t)
        if ck.async_write:
            self.writing = {"id": cid, "iteration": self.iter, "rem": ck.write_duration / m}
        else:
            self.writing = {"id": cid, "iteration": self.iter, "rem": ck.write_cost / m}
            self._drain_write()

    def _final_checkpoint(self) -> None:
        ck = self.s.checkpoint
        cid = self.next_id
        self.next_id += 1
        self.marks[self.iter] = self.cum
        self.last_begun = self.iter
        self._phase(ck.final_write_time / self._multiplier(ck.tier, self.t), "checkpoint_overhead")
        self.valid = (cid, self.iter)
        self._emit("FinalCheckpoint", checkpoint=cid, iteration=self.iter, bytes=self.s.workload.checkpoint_bytes)

    def _on_signal(self) -> str:
        """Stop training; bank progress if a final checkpoint fits before expiry."""
        ck = self.s.checkpoint
        remaining = self.expiry - self.t
        pending = self.writing["rem"] if self.writing else 0.0
        progress = self.iter > self.valid[1] or self.writing is not None
        fits = pending + ck.final_write_time <= remaining and ck.write_cost <= remaining
        if progress and fits:
            self._drain_write()
            if self.iter > self.valid[1]:
                self._final_checkpoint()
            self._emit("AllocEnd", allocation=self.allocation, reason="signal", clean=True)
            return "requeue"
        if self.writing is not None and pending <= remaining:
            self._drain_write()
        if self.iter == self.valid[1]:
            self._emit("AllocEnd", allocation=self.allocation, reason="signal", clean=True)
            return "requeue"
        info = self._rollback()
        self._emit("AllocEnd", allocation=self.allocation, reason="signal", clean=False, **info)
        return "requeue"

    # -- training ----------------------------------------------------------

    def _advance(self, n: int, w: float, wall: float) -> None:
        self.t += n * wall
        self.iter += n
        self.block_end_time = self.t
        compute = n * self.t_compute
        overhead = n * (w - self.t_compute)
        self._charge("useful_compute", compute)
        self._charge("bubble_comm", overhead)
        self._charge("checkpoint_overhead", n * (wall - w))
        self.cum = (self.cum[0] + compute, self.cum[1] + overhead)

    def _waste_partial(self, until: float) -> None:
        """Training time from now to ``until`` that completes no iteration."""
        span = until - self.t
        if self.writing is not None:
            dip = self.s.checkpoint.dip_factor
            work = span / dip
            self.writing["rem"] = max(0.0, self.writing["rem"] - work)
            self._charge("checkpoint_overhead", span - work)
            self._charge("recomputation", work)
        else:
            self._charge("recomputation", span)
        self.t = until

    def _train(self) -> str:
        s = self.s
        ck = s.checkpoint
        data_tier = s.dataset.tier
        while True:
            if self.iter >= self.total_iters:
                return self._finish()
            if self.iter % self.interval == 0 and self.iter != self.last_begun:
                self._begin_checkpoint()
                if self.signaled:
                    return self._on_signal()
                continue

            w = self.t_iter + self.read_base / self._multiplier(data_tier, self.t)
            boundary = min((self.iter // self.interval + 1) * self.interval, self.total_iters)
            n = boundary - self.iter
            dip = ck.dip_factor if self.writing is not None else 1.0
            wall = w * dip
            if self.writing is not None:
                whole = int(self.writing["rem"] // w)
                n = min(n, whole)
            if self.stopping:
                n = min(n, 1)

            cut_t, why = self._next_cut()
            if n > 0:
                n_cut = n if cut_t == math.inf else int(min(n, (cut_t - self.t) // wall))
                while n_cut > 0 and self.t + n_cut * wall > cut_t:
                    n_cut -= 1
                proc = self.noise.get(data_tier)
                if proc is not None:
                    n_cut = min(n_cut, max(1, math.ceil((proc.next_change(self.t) - self.t) / wall)))
                if n_cut > 0:
                    self._advance(n_cut, w, wall)
                    if self.writing is not None:
                        self.writing["rem"] -= n_cut * w
                        if self.writing["rem"] <= 1e-12 * w:
                            self._complete_write()
                    if self.stopping:
                        return self._on_signal()
                    continue
                if why == "signal":
                    self._signal_mid_iteration(cut_t)
                    continue
                self._waste_partial(cut_t)
                return self._cut(why)

            # the in-flight write finishes inside the next iteration
            rem = self.writing["rem"]
            t_done = self.t + rem * dip
            t_end = t_done + (w - rem)
            if why == "signal" and cut_t < t_end:
                self._signal_mid_iteration(cut_t)
                continue
            if cut_t < t_done:
                self._waste_partial(cut_t)
                return self._cut(why)
            self._charge("checkpoint_overhead", rem * (dip - 1.0))
            start = self.t
            self.t = t_done
            self._complete_write()
            self.t = start
            if cut_t < t_end:
                self._charge("recomputation", cut_t - start - rem * (dip - 1.0))
                self.t = cut_t
                return self._cut(why)
            self._advance(1, w, w)
            self.t = t_end
            self.block_end_time = t_end
            if self.stopping:
                return self._on_signal()

    def _signal_mid_iteration(self, at: float) -> None:
        """The exit signal is checked between iterations: finish the current one first."""
        self._deliver_signal(at)
        self.stopping = True

    def _cut(self, why: str) -> str:
        if why == "signal":
            self._deliver_signal()
            return self._on_signal()
        return self._handle_cut(why)

    def _finish(self) -> str:
        if self.iter % self.interval == 0 and self.iter != self.last_begun:
            self._begin_checkpoint()
        self._drain_write()
        self._final_checkpoint()
        self._emit("AllocEnd", allocation=self.allocation, reason="complete", clean=True)
        return "complete"

    # -- allocations -------------------------------------------------------

    def _allocation(self) -> str:
        s = self.s
        sc, f = s.scheduler, s.failures
        self.allocation += 1
        start = self.t
        self.expiry = start + sc.walltime
        self.signal_at = self.expiry - sc.signal_lead
        self.signaled = False
        self.stopping = False
        self._emit("AllocStart", allocation=self.allocation, nodes=self.nodes, walltime=sc.walltime)

        self.fail_at, self.fail_kind = math.inf, None
        rate = s.node_failure_rate
        if rate > 0:
            draws = self.streams["node-failure"].exponential(1.0 / rate, size=self.nodes)
            node = int(np.argmin(draws))
            self.fail_at, self.fail_kind = start + float(draws[node]), ("NodeFailure", "hardware", node)
        health = self.streams["vetting"]
        bad = health.random(self.nodes) < s.cluster.bad_node_prob
        detected = health.random(self.nodes) < sc.vetting_sensitivity

        try:
            if sc.vetting:
                self._phase(sc.vetting_duration, "vetting")
                caught = np.flatnonzero(bad & detected)
                if caught.size:
                    self._emit("VettingAbort", detected=int(caught.size), node=int(caught[0]))
                    self._emit("AllocEnd", allocation=self.allocation, reason="vetting", clean=False)
                    return "requeue"
                self._emit("VettingPass", nodes=self.nodes)

            image_mult = self._multiplier(sc.image_tier, self.t) if sc.image_tier else 1.0
            failed = sample_startup(self.streams, s)
            self._phase(startup_duration(s, image_mult), "startup_restore")
            if failed is not None:
                self._emit("StartupFail", cause=failed[0], unit=failed[1])
                self._emit("AllocEnd", allocation=self.allocation, reason="startup", clean=False)
                return "requeue"

            vid, vit = self.valid
            self._emit("JobStart", restore_checkpoint=vid, restore_iteration=vit)
            job_start = self.t
            oom = _oom_delay(self.streams["oom"], f.oom_h0, f.effective_oom_growth)
            if job_start + oom < self.fail_at:
                self.fail_at, self.fail_kind = job_start + oom, ("OomFailure", "oom", None)
            escaped = np.flatnonzero(bad & ~(detected & sc.vetting))
            if escaped.size and job_start + f.bad_node_ttf < self.fail_at:
                self.fail_at, self.fail_kind = job_start + f.bad_node_ttf, ("NodeFailure", "bad-node", int(escaped[0]))

            restore = model_load_time(s) + (s.checkpoint.restore_cost if vit > 0 else 0.0)
            self._phase(restore, "startup_restore")
            if self.signaled:
                self._emit("AllocEnd", allocation=self.allocation, reason="signal", clean=True)
                return "requeue"
            return self._train()
        except _Interrupted as exc:
            return self._handle_cut(exc.why)

    def run(self) -> EventTrace:
        check_terminating(self.s)
        s = self.s
        while True:
            if self.t >= self.horizon:
                break
            outcome = self._allocation()
            if outcome in ("complete", "done"):
                break
            if self.allocation >= MAX_ALLOCATIONS:
                raise NonTerminating(f"no completion after {MAX_ALLOCATIONS} allocations")
            self._emit("Requeue", allocation=self.allocation + 1, delay=s.scheduler.requeue_delay)
            resume = self.t + s.scheduler.requeue_delay
            if resume >= self.horizon:
                self._charge("idle_requeue", self.horizon - self.t)
                self.t = self.horizon
                break
            self._charge("idle_requeue", resume - self.t)
            self.t = resume
        tokens = min(self.iter * self.gb, s.workload.token_budget)
        self._emit(
            "CampaignDone",
            tokens_done=tokens,
            iterations=self.iter,
            allocations=self.allocation,
            completed=self.iter >= self.total_iters,
        )
        return EventTrace(self.events, s.digest(), s.seed)


def run_campaign(scenario: ScenarioSpec) -> EventTrace:
    """Simulate the campaign described by ``scenario`` with its own seed."""
    return _Campaign(scenario).run()


# ---------------------------------------------------------------------------
# Goodput
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Goodput:
    useful_tokens_per_s: float
    tokens_done: int
    wallclock: float
    gpus: int
    gpu_seconds: dict[str, float]

    @property
    def gpu_seconds_total(self) -> float:
        return sum(self.gpu_seconds.values())

    @property
    def shares(self) -> dict[str, float]:
        total = self.gpu_seconds_total
        if total == 0:
            return dict.fromkeys(WASTE_CATEGORIES, 0.0)
        return {k: v / total for k, v in self.gpu_seconds.items()}


def fold_accounting(trace: EventTrace) -> dict[str, float]:
    """Wall seconds per waste category, with rolled-back work moved to recomputation."""
    secs = dict.fromkeys(WASTE_CATEGORIES, 0.0)
    for e in trace.events:
        for k, v in e.payload.get("acct", {}).items():
            secs[k] += v
        lost = e.payload.get("rolled_back")
        if lost:
            secs["useful_compute"] -= lost["compute"]
            secs["bubble_comm"] -= lost["overhead"]
            secs["recomputation"] += lost["compute"] + lost["overhead"]
    return secs


def measure_goodput(trace: EventTrace, scenario: ScenarioSpec) -> Goodput:
    if trace.scenario_digest != scenario.digest():
        raise DigestMismatch("trace was not produced from this scenario")
    secs = fold_accounting(trace)
    gpus = scenario.alloc_gpus
    done = trace.final
    wall = done.time
    tokens = done.payload["tokens_done"]
    return Goodput(
        useful_tokens_per_s=tokens / wall if wall > 0 else 0.0,
        tokens_done=tokens,
        wallclock=wall,
        gpus=gpus,
        gpu_seconds={k: v * gpus for k, v in secs.items()},
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    value: Any
    seed: int
    goodput: float
    waste_shares: dict[str, float]
    event_counts: dict[str, int]


@dataclass(frozen=True)
class SweepTable:
    parameter: str
    rows: tuple[SweepRow, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return ("value", "seed", "goodput", *(f"share_{c}" for c in WASTE_CATEGORIES))

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            rec = {"value": r.value, "seed": r.seed, "goodput": r.goodput}
            rec.update({f"share_{c}": r.waste_shares[c] for c in WASTE_CATEGORIES})
            out.append(rec)
        return out

    def mean_goodput(self) -> dict[Any, float]:
        sums: dict[Any, list[float]] = {}
        for r in self.rows:
            sums.setdefault(r.value, []).append(r.goodput)
        return {k: sum(v) / len(v) for k, v in sums.items()}


def _sweep_one(args: tuple[ScenarioSpec, str, Any, int]) -> SweepRow:
    base, parameter, value, seed = args
    scenario = with_field(with_field(base, parameter, value), "seed", seed)
    trace = run_campaign(scenario)
    g = measure_goodput(trace, scenario)
    return SweepRow(
        value=get_field(scenario, parameter),
        seed=seed,
        goodput=g.useful_tokens_per_s,
        waste_shares=g.shares,
        event_counts=trace.counts(),
    )


def sweep(
    scenario: ScenarioSpec,
    parameter: str,
    values: Sequence[Any],
    seeds: Sequence[int],
    workers: int = 1,
) -> SweepTable:
    """Run every ``(value, seed)`` pair; rows are ordered by value, then seed."""
    get_field(scenario, parameter)
    for v in values:
        with_field(scenario, parameter, v)
    jobs = [(scenario, parameter, v, sd) for v in values for sd in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    return SweepTable(parameter=parameter, rows=tuple(rows))
