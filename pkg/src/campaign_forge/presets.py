"""Built-in scenarios.

The reference scenario carries the published shape of the 70B campaign:
2688 quad-GPU nodes, a 4096-GPU allocation (tp=4, pp=8, dp=64, cp=2,
vpp=5), a 16.8M-token global batch, a 150 GB model payload and a
250-iteration checkpoint cadence. Constants that were never published
(MTBF, checkpoint cost, alpha/beta, MFU) are chosen for internal
consistency:

* ``target_mfu`` and ``alpha`` come from :func:`campaign_forge.perf.calibrate`
  so that 4096 GPUs run at 723 tokens/s/GPU with 80% strong-scaling
  efficiency against 32 GPUs. ``demos/calibrate_reference.py`` re-derives
  them.
* ``node_mtbf`` makes the Young-Daly interval for a 60 s effective
  checkpoint cost land on 250 iterations of the reference iteration time.
"""

from __future__ import annotations

from dataclasses import replace

from .scenario import (
    CheckpointPolicy,
    ClusterSpec,
    CommModelSpec,
    DatasetSpec,
    FailureModelSpec,
    NoiseSpec,
    ParallelismLayout,
    ScenarioSpec,
    SchedulerSpec,
    StorageTierSpec,
    WorkloadSpec,
    check,
)

# frozen outputs of perf.calibrate(reference_scenario()); see tests/test_perf.py
REFERENCE_TARGET_MFU = 0.3839844935577201
REFERENCE_ALPHA = 0.0029595455174916572

DAY = 86400.0

FLASH = StorageTierSpec(
    name="flash",
    aggregate_bandwidth=500e9,
    per_stream_bandwidth_cap=10e9,
    iops_cap=2e7,
    ost_count=100,
    media="flash",
)
CAPACITY = StorageTierSpec(
    name="capacity",
    aggregate_bandwidth=1e12,
    per_stream_bandwidth_cap=5e9,
    iops_cap=5e5,
    ost_count=400,
    media="hdd",
)


def reference_scenario() -> ScenarioSpec:
    """Post-stabilization 70B pre-training on a 1024-node allocation."""
    return check(
        ScenarioSpec(
            cluster=ClusterSpec(
                node_count=2688,
                gpus_per_node=4,
                gpu_peak_flops=989e12,
                node_mtbf=200 * DAY,
                prolog_mem_threshold=0.90,
                bad_node_prob=0.0,
                net_bw_per_node=100e9,
            ),
            tiers=(FLASH, CAPACITY),
            workload=WorkloadSpec(
                param_count=70_000_000_000,
                token_budget=15_000_000_000_000,
                global_batch_tokens=16_800_000,
                microbatch_tokens=9375,
                target_mfu=REFERENCE_TARGET_MFU,
                checkpoint_bytes=150e9,
                layout=ParallelismLayout(tp=4, pp=8, dp=64, cp=2, vpp=5),
                bytes_per_param=2.0,
            ),
            comm=CommModelSpec(
                alpha=REFERENCE_ALPHA,
                beta_inverse=25e9,
                bucket_bytes=10e6,
                overlap=0.5,
                tp_volume_bytes=12e9,
                tp_count=960,
                tp_bandwidth=150e9,
                tp_alpha=10e-6,
            ),
            scheduler=SchedulerSpec(
                walltime=12 * 3600.0,
                signal_lead=600.0,
                alloc_nodes=1024,
                requeue_delay=120.0,
                startup_overhead_base=180.0,
                image_bytes=20e9,
                image_tier="flash",
                singleton=True,
                vetting=False,
                vetting_duration=120.0,
                vetting_sensitivity=0.9,
            ),
            failures=FailureModelSpec(
                p_rank_startup=1e-6,
                p_node_port=0.0,
                oom_h0=0.0,
                oom_growth=1e-10,
                cache_flush_prolog=True,
                bad_node_ttf=900.0,
            ),
            checkpoint=CheckpointPolicy(
                write_cost=60.0,
                tier="capacity",
                interval_iterations=250,
                async_write=True,
                dip_factor=1.2,
                write_duration=300.0,
                restore_cost=300.0,
            ),
            dataset=DatasetSpec(
                total_bytes=63e12,
                shard_count=2800,
                total_tokens=15e12,
                tier="flash",
                stripe_count=4,
            ),
        )
    )


def default_reference_scenario() -> ScenarioSpec:
    return reference_scenario()


def with_gpus(scenario: ScenarioSpec, gpus: int) -> ScenarioSpec:
    """Same scenario on ``gpus`` GPUs, rescaling dp only."""
    lay = scenario.workload.layout
    fixed = lay.tp * lay.pp * lay.cp
    if gpus % fixed or gpus % scenario.cluster.gpus_per_node:
        raise ValueError(f"{gpus} GPUs is not a multiple of tp*pp*cp = {fixed}")
    return check(
        replace(
            scenario,
            workload=replace(scenario.workload, layout=replace(lay, dp=gpus // fixed)),
            scheduler=replace(scenario.scheduler, alloc_nodes=gpus // scenario.cluster.gpus_per_node),
        )
    )


def pre_stabilization_scenario() -> ScenarioSpec:
    """Early-campaign conditions: dataset on a noisy HDD tier, cache creep, more crashes."""
    ref = reference_scenario()
    noisy_capacity = replace(CAPACITY, noise=NoiseSpec(degradation_fraction=0.6, mean_interval=4 * 3600.0, mean_duration=1800.0))
    return check(
        replace(
            ref,
            tiers=(FLASH, noisy_capacity),
            dataset=replace(ref.dataset, tier="capacity"),
            cluster=replace(ref.cluster, node_mtbf=60 * DAY, bad_node_prob=2e-4),
            failures=replace(ref.failures, oom_h0=1e-6, oom_growth=2e-9, cache_flush_prolog=False, p_rank_startup=5e-6),
        )
    )


def post_stabilization_scenario() -> ScenarioSpec:
    return reference_scenario()


def failure_free_scenario() -> ScenarioSpec:
    """Reference scenario with every failure source and noise disabled."""
    ref = reference_scenario()
    return check(
        replace(
            ref,
            cluster=replace(ref.cluster, bad_node_prob=0.0),
            failures=FailureModelSpec(node_failure_rate=0.0, cache_flush_prolog=True),
            tiers=tuple(replace(t, noise=None) for t in ref.tiers),
        )
    )


PRESETS = {
    "reference": reference_scenario,
    "post-stabilization": post_stabilization_scenario,
    "pre-stabilization": pre_stabilization_scenario,
    "failure-free": failure_free_scenario,
}


def preset(name: str) -> ScenarioSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
