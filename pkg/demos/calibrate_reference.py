"""Re-derive the frozen throughput constants of the reference scenario.

The reference preset ships a target MFU and a per-message latency that
were solved once so that 4096 GPUs reach 723 tok/s/GPU at 80% strong
scaling efficiency against 32 GPUs. This script repeats the solve and
prints the strong scaling table the constants produce.
"""

from __future__ import annotations

from campaign_forge import perf
from campaign_forge.presets import reference_scenario
from campaign_forge.render import render

COUNTS = [32, 64, 128, 256, 512, 1024, 2048, 4096]


def main() -> None:
    s = reference_scenario()
    mfu, alpha = perf.calibrate(s)
    print(f"target_mfu  solved {mfu:.16g}  frozen {s.workload.target_mfu:.16g}")
    print(f"alpha       solved {alpha:.16g}  frozen {s.comm.alpha:.16g}")
    print()
    print(render("table", perf.scaling_table(s, COUNTS, "strong")))


if __name__ == "__main__":
    main()
