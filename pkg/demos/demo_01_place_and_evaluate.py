"""
Placing blockchain functions on edge servers
============================================

Builds a small network, places every function of every user with the
majorization-minimization solver, and checks the answer against exhaustive
enumeration.
"""

from bfv import BlockchainParams, Server, ServerGraph, UserDevice, brute_force_solve, evaluate, mm_solve, validate_instance
from bfv.workload import instance_chains

# Three servers of different speed and power draw; two users.
graph = ServerGraph((Server(0, 5e9, 125.0), Server(1, 2e9, 40.0), Server(2, 3e9, 90.0)))
users = [
    UserDevice(0, is_miner=True),
    UserDevice(1, is_miner=False, is_tx_generator=True),
]
# smaller blocks so the whole pipeline fits in a 1 s block interval
inst = validate_instance(graph, users, BlockchainParams(n_trans=400))

for chain in instance_chains(inst):
    print(f"user {chain.user_id}: " + ", ".join(f"{d.kind.name}={d.cycles:.3g}" for d in chain.demands))

###############################################################################
# Solve with MM. Each iteration is one LP; the trace records the penalized
# objective, which never increases.
res = mm_solve(inst)
print("\nMM iterations:", res.trace.iterations, "-", res.trace.termination)
for k, e in enumerate(res.trace.entries):
    print(f"  {k:2d}  penalized={e.penalized:10.4f}  max fractionality={e.max_fractionality:.3f}")

report = evaluate(res.placement, inst)
print("\nplacement:", dict(sorted(res.placement.assign.items())))
print(f"E_total={report.e_total_j:.3f} J  T={report.latency_s:.3f} s  feasible={report.feasible}")
print(f"objective (energy - reward) = {report.objective:.4f}")

###############################################################################
# Seven demands on three servers is 3^7 placements: small enough to enumerate.
oracle = brute_force_solve(inst)
print(f"\nexhaustive optimum over {oracle.evaluated} placements: {oracle.report.objective:.4f}")
