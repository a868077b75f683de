"""Model load time for all-ranks-read versus rank0-broadcast by node count."""

from __future__ import annotations

from campaign_forge import storage
from campaign_forge.presets import FLASH

PAYLOAD = 150e9
NET = 25e9


def main() -> None:
    print(f"{'nodes':>6} {'all-read s':>11} {'broadcast s':>12}  pick")
    for n in [1, 2, 8, 32, 64, 71, 128, 256, 512, 1024]:
        cmp = storage.compare_load_strategies(PAYLOAD, n, FLASH, NET)
        read = storage.plan_model_load(PAYLOAD, n, FLASH, NET, "all-ranks-read")
        bcast = storage.plan_model_load(PAYLOAD, n, FLASH, NET, "rank0-broadcast")
        print(f"{n:>6} {read.total_time:>11.1f} {bcast.total_time:>12.1f}  {cmp.chosen.strategy}")


if __name__ == "__main__":
    main()
