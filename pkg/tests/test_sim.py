from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scenarios import (
    HOUR,
    SLOW,
    assert_trace_invariants,
    failure_free,
    random_scenario,
    small_scenario,
)

from campaign_forge import perf
from campaign_forge.errors import DigestMismatch, IncompatibleValue, NonTerminating, UnknownField
from campaign_forge.presets import post_stabilization_scenario, reference_scenario, with_gpus
from campaign_forge.resilience import startup_failure_prob
from campaign_forge.scenario import (
    CheckpointPolicy,
    CommModelSpec,
    FailureModelSpec,
    ParallelismLayout,
    StorageTierSpec,
    check,
    with_field,
)
from campaign_forge.sim import (
    EVENT_KINDS,
    WASTE_CATEGORIES,
    EventTrace,
    fold_accounting,
    measure_goodput,
    run_campaign,
    startup_trials,
    sweep,
)
from campaign_forge.storage import data_read_time

GB = 262_144


def _iteration_wall(s) -> float:
    return perf.iteration_time(s).t_iteration + data_read_time(s)


def test_failure_free_counting():
    s = failure_free(small_scenario())
    s = with_field(with_field(s, "workload.token_budget", 1000 * GB), "checkpoint.interval_iterations", 250)
    trace = run_campaign(s)
    counts = trace.counts()
    assert counts["CheckpointBegin"] == 4
    assert counts["CheckpointDone"] == 4
    assert counts["FinalCheckpoint"] == 1
    assert counts["AllocStart"] == counts["AllocEnd"] == 1
    assert trace.events[-2].kind == "AllocEnd"
    assert trace.events[-3].kind == "FinalCheckpoint"
    assert trace.final.payload["tokens_done"] == 1000 * GB
    assert_trace_invariants(trace, s)


def test_counts_have_a_fixed_key_set():
    trace = run_campaign(failure_free(small_scenario()))
    assert tuple(trace.counts()) == EVENT_KINDS
    assert trace.counts()["NodeFailure"] == 0


def test_same_seed_is_byte_identical():
    s = random_scenario(np.random.default_rng(5), seed=5)
    a, b = run_campaign(s), run_campaign(s)
    assert a.to_ndjson() == b.to_ndjson()
    assert a.hash() == b.hash()
    other = run_campaign(with_field(s, "seed", 6))
    assert other.hash() != a.hash()


def test_trace_round_trips_through_ndjson():
    s = random_scenario(np.random.default_rng(9), seed=9)
    trace = run_campaign(s)
    back = EventTrace.from_ndjson(trace.to_ndjson())
    assert back.hash() == trace.hash()
    assert back.scenario_digest == s.digest()
    assert fold_accounting(back) == fold_accounting(trace)


def test_trace_csv_has_provenance_and_header():
    s = failure_free(small_scenario())
    lines = run_campaign(s).to_csv().splitlines()
    assert lines[0] == f"# scenario_digest={s.digest()} seed={s.seed}"
    assert lines[1] == "time,seq,kind,detail"


@settings(max_examples=100)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_scenarios_keep_every_invariant(seed):
    s = random_scenario(np.random.default_rng(seed), seed=seed)
    trace = run_campaign(s)
    assert_trace_invariants(trace, s)


def test_waste_categories_partition_the_wallclock():
    s = random_scenario(np.random.default_rng(1), seed=1)
    g = measure_goodput(run_campaign(s), s)
    assert tuple(g.shares) == WASTE_CATEGORIES
    assert g.gpu_seconds_total == pytest.approx(g.wallclock * s.alloc_gpus)
    assert sum(g.gpu_seconds.values()) == pytest.approx(g.gpu_seconds_total)
    assert g.useful_tokens_per_s == pytest.approx(g.tokens_done / g.wallclock)


def _lossless(s):
    huge = StorageTierSpec("fast", 1e18, 1e18, 1e18, 50)
    return check(
        replace(
            s,
            tiers=(huge, SLOW),
            cluster=replace(s.cluster, net_bw_per_node=1e18),
            workload=replace(s.workload, layout=ParallelismLayout(tp=4, pp=1, dp=16)),
            comm=CommModelSpec(alpha=0.0, beta_inverse=math.inf, bucket_bytes=1e9, tp_bandwidth=math.inf),
            scheduler=replace(s.scheduler, startup_overhead_base=0.0, image_bytes=0.0, walltime=1e7, signal_lead=1.0),
            checkpoint=CheckpointPolicy(write_cost=1e-12, tier="fast", interval_iterations=10**9),
        )
    )


def test_lossless_limit_is_all_useful_compute():
    s = _lossless(failure_free(small_scenario()))
    shares = measure_goodput(run_campaign(s), s).shares
    assert shares["useful_compute"] == pytest.approx(1.0, abs=1e-9)
    for cat in WASTE_CATEGORIES[1:]:
        assert shares[cat] <= 1e-9


def test_async_checkpoint_costs_its_write_cost():
    s = failure_free(small_scenario())
    s = with_field(s, "workload.token_budget", 2000 * GB)
    ck = s.checkpoint
    assert ck.async_write and (ck.dip_factor - 1) * ck.write_duration == pytest.approx(ck.write_cost)
    trace = run_campaign(s)
    begins = [e.time for e in trace.of_kind("CheckpointBegin")]
    gaps = np.diff(begins)
    slowdown = gaps - ck.interval_iterations * _iteration_wall(s)
    assert np.allclose(slowdown, ck.write_cost, rtol=0.05)
    # the last periodic write is drained with training stopped, then the final one blocks
    written = len(trace.of_kind("CheckpointDone"))
    expected = (written - 1) * ck.write_cost + ck.write_duration + ck.final_write_time
    assert fold_accounting(trace)["checkpoint_overhead"] == pytest.approx(expected, rel=0.05)


def test_sync_checkpoint_stalls_for_its_write_cost():
    s = failure_free(small_scenario())
    s = with_field(s, "workload.token_budget", 2000 * GB)
    s = check(replace(s, checkpoint=CheckpointPolicy(write_cost=7.0, tier="fast", interval_iterations=100)))
    begins = [e.time for e in run_campaign(s).of_kind("CheckpointBegin")]
    assert np.allclose(np.diff(begins) - 100 * _iteration_wall(s), 7.0)


def _port_scenario():
    ref = with_gpus(reference_scenario(), 1024)
    assert ref.scheduler.alloc_nodes == 256
    return check(replace(ref, failures=FailureModelSpec(p_node_port=0.006)))


@pytest.mark.parametrize("trials, tol", [(1_000, 0.04), (10_000, 0.012)])
def test_launch_failures_match_the_analytic_probability(trials, tol):
    s = _port_scenario()
    expected = startup_failure_prob(0.006, 256)
    rate = startup_trials(s, trials, seed=123) / trials
    assert abs(rate - expected) <= tol


def test_engine_launch_failures_match_the_analytic_probability():
    s = failure_free(small_scenario())
    s = check(replace(s, failures=FailureModelSpec(node_failure_rate=0.0, p_node_port=0.05)))
    s = with_field(s, "workload.token_budget", 5 * GB)
    fails = starts = 0
    for seed in range(300):
        c = run_campaign(with_field(s, "seed", seed)).counts()
        fails += c["StartupFail"]
        starts += c["JobStart"]
    expected = startup_failure_prob(0.05, 16)
    n = fails + starts
    assert abs(fails / n - expected) <= 3 * math.sqrt(expected * (1 - expected) / n)


def _mean_share(s, key, seeds=range(30)):
    vals = []
    for sd in seeds:
        run = with_field(s, "seed", sd)
        vals.append(measure_goodput(run_campaign(run), run).shares[key])
    return float(np.mean(vals))


def test_more_reliable_nodes_never_raise_recomputation():
    s = small_scenario(seed=0)
    s = with_field(s, "workload.token_budget", 20000 * GB)
    base = _mean_share(s, "recomputation")
    better = _mean_share(with_field(s, "cluster.node_mtbf", 2 * s.cluster.node_mtbf), "recomputation")
    assert better <= base


def test_cache_flush_reduces_oom_failures():
    s = small_scenario()
    s = check(replace(s, failures=FailureModelSpec(oom_h0=1e-5, oom_growth=1e-7, cache_flush_prolog=False)))
    table = sweep(s, "failures.cache_flush_prolog", [False, True], list(range(30)))
    mean = {v: np.mean([r.event_counts["OomFailure"] for r in table.rows if r.value is v]) for v in (False, True)}
    assert mean[True] < mean[False]


def test_non_terminating_scenarios_are_rejected():
    s = small_scenario()
    with pytest.raises(NonTerminating):
        run_campaign(check(replace(s, failures=FailureModelSpec(p_node_port=1.0))))
    with pytest.raises(NonTerminating):
        run_campaign(with_field(s, "cluster.bad_node_prob", 1.0))
    # a deadline bounds the run even when no progress is possible
    bounded = check(replace(s, failures=FailureModelSpec(p_node_port=1.0), campaign_deadline=3 * HOUR))
    trace = run_campaign(bounded)
    assert trace.final.payload["tokens_done"] == 0
    assert trace.final.payload["completed"] is False


def test_digest_mismatch():
    s = small_scenario()
    trace = run_campaign(failure_free(s))
    with pytest.raises(DigestMismatch):
        measure_goodput(trace, s)


def test_deadline_stops_the_campaign():
    s = with_field(small_scenario(), "campaign_deadline", "2h")
    trace = run_campaign(s)
    assert trace.events[-1].time <= 2 * HOUR + 1e-6
    assert_trace_invariants(trace, s)


def test_degenerate_sweep_equals_one_run():
    s = random_scenario(np.random.default_rng(3), seed=3)
    table = sweep(s, "checkpoint.interval_iterations", [50], [17])
    run = with_field(with_field(s, "checkpoint.interval_iterations", 50), "seed", 17)
    trace = run_campaign(run)
    (row,) = table.rows
    g = measure_goodput(trace, run)
    assert row.goodput == g.useful_tokens_per_s
    assert row.waste_shares == g.shares
    assert row.event_counts == trace.counts()
    assert (row.value, row.seed) == (50, 17)


def test_sweep_rows_are_ordered_by_value_then_seed():
    s = small_scenario()
    s = with_field(s, "workload.token_budget", 300 * GB)
    table = sweep(s, "checkpoint.interval_iterations", ["40", 80], [2, 1])
    assert [(r.value, r.seed) for r in table.rows] == [(40, 2), (40, 1), (80, 2), (80, 1)]
    assert set(table.mean_goodput()) == {40, 80}


def test_parallel_sweep_matches_serial():
    s = with_field(small_scenario(), "workload.token_budget", 500 * GB)
    serial = sweep(s, "scheduler.vetting", [False, True], [0, 1])
    parallel = sweep(s, "scheduler.vetting", [False, True], [0, 1], workers=2)
    assert serial == parallel


def test_sweep_rejects_bad_parameters():
    s = small_scenario()
    with pytest.raises(UnknownField):
        sweep(s, "cluster.warp_drive", [1], [0])
    with pytest.raises(IncompatibleValue):
        sweep(s, "checkpoint.interval_iterations", [100, "many"], [0])


def test_stabilized_reference_throughput_at_2048_gpus():
    s = with_gpus(post_stabilization_scenario(), 2048)
    g = measure_goodput(run_campaign(s), s)
    assert g.useful_tokens_per_s == pytest.approx(723 * 2048, rel=0.15)
