"""Reference framework: devices run every function locally except mining, which is offloaded."""

from __future__ import annotations

from collections import defaultdict

from .analytics import (
    FEASIBILITY_RTOL,
    EvaluationReport,
    ZeroLatency,
    confirmation_rate,
    e_ran,
    miner_demands,
    p_mining,
    p_orphan,
    r_mining,
    t_ran,
)
from .domain import FunctionKind, Instance
from .placement import Infeasible, SearchSpaceTooLarge, brute_force_solve, solve_point
from .workload import instance_chains, strip_to_mining

# enumerate mining placements exhaustively up to this many candidates
BRUTE_FORCE_LIMIT = 100_000


def local_execution(instance: Instance, chains) -> tuple[dict[int, float], dict[int, float]]:
    """Per-device serial compute time and energy (compute plus gossip) for the non-mining work."""
    users = {u.id: u for u in instance.users}
    seconds: dict[int, float] = defaultdict(float)
    joules: dict[int, float] = defaultdict(float)
    for chain in chains:
        dev = users[chain.user_id]
        for d in chain.demands:
            if d.kind is FunctionKind.MINING:
                continue
            if d.kind.is_broadcast:
                joules[dev.id] += instance.costs.gossip_energy_j
                continue
            t = d.cycles / dev.local_capacity_hz
            seconds[dev.id] += t
            joules[dev.id] += dev.local_power_w * t
    return dict(seconds), dict(joules)


def _place_mining(instance: Instance, mining_chains, solver: str, **solver_kw):
    if solver in ("auto", "brute"):
        try:
            res = brute_force_solve(instance, chains=mining_chains, limit=BRUTE_FORCE_LIMIT)
            return res.report
        except SearchSpaceTooLarge:
            if solver == "brute":
                raise
        except Infeasible:
            if solver == "brute":
                raise
    point = solve_point(instance, chains=mining_chains, **solver_kw)
    if point.report is None:
        raise Infeasible(point.status)
    return point.report


def evaluate_baseline(instance: Instance, chains=None, solver: str = "auto", **solver_kw) -> EvaluationReport:
    """Energy, delay and reward when only the Mining function leaves the device.

    ``solver`` picks how mining demands are placed: ``"brute"``, ``"mm"`` or
    ``"auto"`` (exhaustive when the search space is small).
    """
    chains = instance_chains(instance) if chains is None else list(chains)
    params = instance.params
    mining_chains = strip_to_mining(chains)
    local_s, local_j = local_execution(instance, chains)

    if mining_chains:
        mec = _place_mining(instance, mining_chains, solver, **solver_kw)
        e_mec, t_mec = mec.e_mec_j, mec.t_mec_s
        c2 = [v for v in mec.violations if v.startswith("C2")]
    else:
        e_mec, t_mec, c2 = 0.0, 0.0, []
    er = e_ran(mining_chains, instance.users)
    tr = t_ran(mining_chains, instance.users)
    t_local = max(local_s.values(), default=0.0)
    e_local = sum(local_j.values())

    violations = list(c2)
    latency = t_local + tr + t_mec
    if latency > params.t_th_s * (1 + FEASIBILITY_RTOL):
        violations.append(f"C1: local + T_RAN + T_MEC = {latency:.6g} s exceeds block interval {params.t_th_s:g} s")

    p_orph = p_orphan(params)
    wins = p_mining(miner_demands(chains))
    rewards = r_mining(params, wins, p_orph)
    r_total = sum(rewards.values())
    try:
        rate = confirmation_rate(params, tr + t_local, t_mec, p_orph)
    except ZeroLatency:
        rate = float("inf")
    e_total = er + e_mec + e_local
    return EvaluationReport(
        e_ran_j=er,
        e_mec_j=e_mec,
        e_total_j=e_total,
        t_ran_s=tr,
        t_mec_s=t_mec,
        p_mining=wins,
        p_orphan=p_orph,
        r_mining=rewards,
        r_mining_total=r_total,
        confirmation_rate_tps=rate,
        objective=e_total - r_total,
        feasible=not violations,
        violations=violations,
        e_local_j=e_local,
        t_local_s=t_local,
    )


def evaluate_bfv_mining_only(instance: Instance, chains=None, **solver_kw) -> EvaluationReport:
    """BFV metrics when each miner's chain is reduced to the Mining function alone."""
    chains = instance_chains(instance) if chains is None else list(chains)
    mining_chains = strip_to_mining(chains)
    point = solve_point(instance, chains=mining_chains, **solver_kw)
    if point.report is None:
        raise Infeasible(point.status)
    return point.report
