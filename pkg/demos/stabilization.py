"""Goodput and waste breakdown before and after infrastructure stabilisation.

The early preset keeps the dataset on a noisy capacity tier, skips the
cache flush prolog and has less reliable nodes. Both presets are run at
the same scale over a fixed horizon and compared as policies.
"""

from __future__ import annotations

from campaign_forge.presets import post_stabilization_scenario, pre_stabilization_scenario, with_gpus
from campaign_forge.render import render
from campaign_forge.reporting import aggregate_reports, build_report
from campaign_forge.scenario import with_field
from campaign_forge.sim import run_campaign

SEEDS = range(5)


def _mean(s):
    reps = []
    for sd in SEEDS:
        run = with_field(s, "seed", sd)
        reps.append(build_report(run_campaign(run), run))
    return aggregate_reports(reps)


def main() -> None:
    for label, make in (("before", pre_stabilization_scenario), ("after", post_stabilization_scenario)):
        s = with_field(with_gpus(make(), 1024), "campaign_deadline", "7d")
        r = _mean(s)
        print(f"== {label}: {r.useful_tokens_per_s / s.alloc_gpus:.1f} tok/s/GPU, {r.gpu_hours:,.0f} GPU-hours")
        print(render("table", r.waste_shares))


if __name__ == "__main__":
    main()
