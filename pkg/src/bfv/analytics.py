"""Closed-form delay, energy, probability and reward metrics for a placement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .domain import BlockchainParams, CostTable, Instance, ServerGraph, UserDevice
from .workload import FunctionChain, FunctionDemand, instance_chains

DemandKey = tuple[int, int]

# relative slack used when checking C1/C2 so that exact-boundary placements count as feasible
FEASIBILITY_RTOL = 1e-9


class UnplacedDemand(KeyError):
    pass


class NoMiners(ValueError):
    pass


class ZeroLatency(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Placement:
    """Assignment of every (user, function index) pair to a server.

    ``fractional`` maps (user, function index, server) to a weight and, when
    present, takes precedence over ``assign`` in metric computations.
    """

    assign: Mapping[DemandKey, int] = field(default_factory=dict)
    fractional: Optional[Mapping[tuple[int, int, int], float]] = None

    def is_integral(self, tol: float = 1e-6) -> bool:
        if self.fractional is None:
            return True
        return all(min(w, 1.0 - w) <= tol for w in self.fractional.values())


@dataclass
class EvaluationReport:
    e_ran_j: float
    e_mec_j: float
    e_total_j: float
    t_ran_s: float
    t_mec_s: float
    p_mining: dict[int, float]
    p_orphan: float
    r_mining: dict[int, float]
    r_mining_total: float
    confirmation_rate_tps: float
    objective: float
    feasible: bool
    violations: list[str] = field(default_factory=list)
    # device-side energy and serial time; zero when every function runs on servers
    e_local_j: float = 0.0
    t_local_s: float = 0.0

    @property
    def avg_p_mining(self) -> float:
        return sum(self.p_mining.values()) / len(self.p_mining) if self.p_mining else 0.0

    @property
    def avg_r_mining(self) -> float:
        return self.r_mining_total / len(self.r_mining) if self.r_mining else 0.0

    @property
    def latency_s(self) -> float:
        return self.t_local_s + self.t_ran_s + self.t_mec_s


def indexed_demands(chains: Iterable[FunctionChain]) -> list[tuple[DemandKey, FunctionDemand]]:
    """Flatten chains into ``((user_id, j), demand)`` where j indexes the user's function set."""
    counters: dict[int, int] = {}
    out = []
    for chain in chains:
        for d in chain.demands:
            j = counters.get(chain.user_id, 0)
            counters[chain.user_id] = j + 1
            out.append(((chain.user_id, j), d))
    return out


def placement_matrix(placement: Placement, chains: Sequence[FunctionChain], graph: ServerGraph) -> np.ndarray:
    """Weights as a (demands x servers) array, columns in ``graph.servers`` order."""
    ids = graph.server_ids
    col = {sid: k for k, sid in enumerate(ids)}
    keys = [key for key, _ in indexed_demands(chains)]
    x = np.zeros((len(keys), len(ids)))
    if placement.fractional is not None:
        row = {key: r for r, key in enumerate(keys)}
        for (uid, j, sid), w in placement.fractional.items():
            x[row[(uid, j)], col[sid]] = w
        missing = [k for k, row in zip(keys, x) if not row.any()]
    else:
        missing = []
        for r, key in enumerate(keys):
            sid = placement.assign.get(key)
            if sid is None or sid not in col:
                missing.append(key)
            else:
                x[r, col[sid]] = 1.0
    if missing:
        raise UnplacedDemand(f"no server assigned to {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return x


def _cycles(chains) -> np.ndarray:
    return np.array([d.cycles for _, d in indexed_demands(chains)], dtype=float)


def _user_uplink_seconds(chains, users: Iterable[UserDevice]) -> dict[int, float]:
    rate = {u.id: u.uplink_rate_bps for u in users}
    payload: dict[int, float] = {}
    for chain in chains:
        payload[chain.user_id] = payload.get(chain.user_id, 0.0) + chain.uplink_bytes
    return {uid: 8.0 * b / rate[uid] for uid, b in payload.items()}


def t_ran(chains, users) -> float:
    """Slowest user's uplink time: every request must arrive before the block can form."""
    times = _user_uplink_seconds(chains, users)
    return max(times.values(), default=0.0)


def e_ran(chains, users) -> float:
    power = {u.id: u.tx_power_w for u in users}
    return sum(power[uid] * t for uid, t in _user_uplink_seconds(chains, users).items())


def server_busy_seconds(x: np.ndarray, cycles: np.ndarray, graph: ServerGraph) -> np.ndarray:
    cap = np.array([s.capacity_hz for s in graph.servers])
    return (x * cycles[:, None]).sum(axis=0) / cap


def server_loads(x: np.ndarray, cycles: np.ndarray) -> np.ndarray:
    return (x * cycles[:, None]).sum(axis=0)


def t_mec(placement: Placement, chains, graph: ServerGraph) -> float:
    x = placement_matrix(placement, chains, graph)
    return float(server_busy_seconds(x, _cycles(chains), graph).sum())


def _broadcast_count(x: np.ndarray, chains) -> float:
    mask = np.array([d.kind.is_broadcast for _, d in indexed_demands(chains)], dtype=bool)
    return float(x[mask].sum()) if mask.any() else 0.0


def e_mec(placement: Placement, chains, graph: ServerGraph, costs: CostTable) -> float:
    """Server processing energy plus one gossip charge per placed broadcast function."""
    x = placement_matrix(placement, chains, graph)
    return _e_mec_from_matrix(x, chains, graph, costs)


def _e_mec_from_matrix(x, chains, graph, costs) -> float:
    power = np.array([s.power_w for s in graph.servers])
    busy = server_busy_seconds(x, _cycles(chains), graph)
    return float(power @ busy) + costs.gossip_energy_j * _broadcast_count(x, chains)


def miner_demands(chains) -> dict[int, float]:
    out: dict[int, float] = {}
    for chain in chains:
        if chain.is_mining_chain:
            out[chain.user_id] = out.get(chain.user_id, 0.0) + chain.cycles
    return out


def p_mining(demands: Mapping[int, float]) -> dict[int, float]:
    """Win probability of each miner as its share of the total mining demand.

    ``demands`` maps miner id to demand; a sequence of chains is also accepted.
    """
    if not isinstance(demands, Mapping):
        demands = miner_demands(demands)
    if not demands:
        raise NoMiners("p_mining needs at least one miner")
    total = sum(demands.values())
    if total <= 0:
        return {uid: 1.0 / len(demands) for uid in demands}
    return {uid: d / total for uid, d in demands.items()}


def p_orphan(params: BlockchainParams) -> float:
    return -math.expm1(-params.z_s_per_tx * params.n_trans / params.t_th_s)


def reward_pool(params: BlockchainParams) -> float:
    return params.r_const + params.n_trans * params.r_trans


def r_mining(params: BlockchainParams, p_win: Mapping[int, float], p_orph: float) -> dict[int, float]:
    pool = reward_pool(params)
    return {uid: p * pool * (1.0 - p_orph) for uid, p in p_win.items()}


def confirmation_rate(params: BlockchainParams, t_ran_s: float, t_mec_s: float, p_orph: float) -> float:
    latency = t_ran_s + t_mec_s
    if latency <= 0:
        raise ZeroLatency("confirmation rate undefined for zero latency")
    return params.n_trans * (1.0 - p_orph) / latency


def placement_invariant_terms(instance: Instance, chains=None) -> tuple[float, float]:
    """(E_RAN, total reward): the objective parts no placement can change."""
    chains = instance_chains(instance) if chains is None else chains
    er = e_ran(chains, instance.users)
    rewards = r_mining(instance.params, p_mining(miner_demands(chains)), p_orphan(instance.params))
    return er, sum(rewards.values())


def evaluate(placement: Placement, instance: Instance, chains=None) -> EvaluationReport:
    chains = instance_chains(instance) if chains is None else list(chains)
    x = placement_matrix(placement, chains, instance.graph)
    return evaluate_matrix(x, instance, chains)


def evaluate_matrix(x: np.ndarray, instance: Instance, chains) -> EvaluationReport:
    graph, params = instance.graph, instance.params
    cycles = _cycles(chains)
    violations = []

    row_sums = x.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(row_sums - 1.0) > 1e-6)
    if bad_rows.size:
        violations.append(f"assignment: {bad_rows.size} demand(s) with weights not summing to 1")

    busy = server_busy_seconds(x, cycles, graph)
    tm = float(busy.sum())
    tr = t_ran(chains, instance.users)
    em = _e_mec_from_matrix(x, chains, graph, instance.costs)
    er = e_ran(chains, instance.users)

    if tr + tm > params.t_th_s * (1 + FEASIBILITY_RTOL):
        violations.append(f"C1: T_RAN + T_MEC = {tr + tm:.6g} s exceeds block interval {params.t_th_s:g} s")
    loads = server_loads(x, cycles)
    for s, load in zip(graph.servers, loads):
        budget = s.capacity_hz * params.t_th_s
        if load > budget * (1 + FEASIBILITY_RTOL):
            violations.append(f"C2: server {s.id} assigned {load:.6g} cycles > budget {budget:.6g}")

    p_orph = p_orphan(params)
    wins = p_mining(miner_demands(chains))
    rewards = r_mining(params, wins, p_orph)
    r_total = sum(rewards.values())
    try:
        rate = confirmation_rate(params, tr, tm, p_orph)
    except ZeroLatency:
        rate = math.inf
    e_total = er + em
    return EvaluationReport(
        e_ran_j=er,
        e_mec_j=em,
        e_total_j=e_total,
        t_ran_s=tr,
        t_mec_s=tm,
        p_mining=wins,
        p_orphan=p_orph,
        r_mining=rewards,
        r_mining_total=r_total,
        confirmation_rate_tps=rate,
        objective=e_total - r_total,
        feasible=not violations,
        violations=violations,
    )
