"""
How energy, throughput and reward respond to the system parameters
===================================================================

Reproduces the six sweep directions under the default configuration: 50
servers at 5 GHz / 125 W, 50 miners (one third IoT sensors), 5000
transactions of 200 bytes per block, 1 s block interval.

At these defaults the summed server processing time exceeds the block
interval, so every point is solved without the deadline row and flagged
``feasible=false``; the trends are unaffected.
"""

import time

from bfv import default_instance, solve_point
from bfv.scenario import apply_sweep_point

base = default_instance()


def sweep(field, grid, metric, label):
    print(f"\n{label}")
    for v in grid:
        r = solve_point(apply_sweep_point(base, field, v)).report
        print(f"  {field}={v:<8g} {metric(r):12.4f}")


start = time.perf_counter()
sweep("server_capacity", [1e9, 2e9, 3e9, 4e9, 5e9], lambda r: r.e_total_j, "(a) total energy [J] vs server capacity")
sweep("block_size", range(1000, 10001, 3000), lambda r: r.e_total_j, "(b) total energy [J] vs transactions per block")
sweep("miner_count", [10, 40, 70, 100], lambda r: r.confirmation_rate_tps, "(c) confirmation rate [tx/s] vs miners")
sweep("block_size", range(1000, 10001, 3000), lambda r: r.confirmation_rate_tps,
      "(d) confirmation rate [tx/s] vs transactions per block")
sweep("miner_count", [10, 40, 70, 100], lambda r: r.avg_r_mining, "(e) average miner reward vs miners")
sweep("block_interval", [0.5, 1, 2, 4], lambda r: r.avg_r_mining, "(f) average miner reward vs block interval [s]")
print(f"\n{time.perf_counter() - start:.1f} s")
