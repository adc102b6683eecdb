"""Function placement: exhaustive oracle, penalized-relaxation MM solver and repair.

The MM solver relaxes each binary x to [0, 1] and adds the penalty
``mu * sum(x - x**2)``, which vanishes exactly on binary points. Since
``-x**2`` is concave it is majorized by its tangent at the current iterate
``xk``::

    -x**2 <= -xk**2 - 2 * xk * (x - xk)

so each iteration minimizes a linear surrogate over the relaxed feasible
set (assignment rows, per-server cycle budgets, deadline row) with one LP.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .analytics import (
    FEASIBILITY_RTOL,
    EvaluationReport,
    Placement,
    evaluate,
    evaluate_matrix,
    indexed_demands,
    placement_invariant_terms,
    t_ran,
)
from .domain import Instance
from .lp import LinearProgram, solve_lp
from .workload import instance_chains

log = logging.getLogger(__name__)


class Infeasible(RuntimeError):
    pass


class SearchSpaceTooLarge(ValueError):
    pass


class RepairFailed(RuntimeError):
    pass


class AllInfeasible(RuntimeError):
    def __init__(self, message: str, reports: dict):
        super().__init__(message)
        self.reports = reports


@dataclass
class PlacementProblem:
    """Dense numeric view of an instance: one row per demand, one column per server."""

    keys: list
    kinds: list
    cycles: np.ndarray
    server_ids: list
    capacity: np.ndarray
    power: np.ndarray
    t_th_s: float
    t_ran_s: float
    enforce_deadline: bool = True

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.keys), len(self.server_ids)

    @property
    def energy(self) -> np.ndarray:
        """Joules spent if demand d runs on server n (processing only, no gossip)."""
        return self.power[None, :] * self.cycles[:, None] / self.capacity[None, :]

    @property
    def seconds(self) -> np.ndarray:
        return self.cycles[:, None] / self.capacity[None, :]

    @property
    def budget(self) -> np.ndarray:
        return self.capacity * self.t_th_s

    @property
    def deadline_slack(self) -> float:
        return self.t_th_s - self.t_ran_s

    def to_placement(self, x: np.ndarray) -> Placement:
        cols = x.argmax(axis=1)
        return Placement({key: self.server_ids[c] for key, c in zip(self.keys, cols)})

    def to_fractional(self, x: np.ndarray) -> Placement:
        frac = {}
        for key, row in zip(self.keys, x):
            for sid, w in zip(self.server_ids, row):
                if w > 0:
                    frac[(key[0], key[1], sid)] = float(w)
        return Placement(fractional=frac)

    def matrix(self, placement: Placement) -> np.ndarray:
        col = {sid: k for k, sid in enumerate(self.server_ids)}
        x = np.zeros(self.shape)
        for r, key in enumerate(self.keys):
            x[r, col[placement.assign[key]]] = 1.0
        return x


def build_problem(instance: Instance, chains=None, enforce_deadline: bool = True) -> PlacementProblem:
    chains = instance_chains(instance) if chains is None else list(chains)
    flat = indexed_demands(chains)
    servers = instance.graph.servers
    return PlacementProblem(
        keys=[k for k, _ in flat],
        kinds=[d.kind for _, d in flat],
        cycles=np.array([d.cycles for _, d in flat], dtype=float),
        server_ids=[s.id for s in servers],
        capacity=np.array([s.capacity_hz for s in servers], dtype=float),
        power=np.array([s.power_w for s in servers], dtype=float),
        t_th_s=instance.params.t_th_s,
        t_ran_s=t_ran(chains, instance.users),
        enforce_deadline=enforce_deadline,
    )


def build_lp(problem: PlacementProblem, cost: np.ndarray) -> LinearProgram:
    """LP over the flattened x[d, n] (row-major) with the placement constraints."""
    D, N = problem.shape
    A_eq = sp.kron(sp.identity(D, format="csr"), np.ones((1, N)), format="csr")
    b_eq = np.ones(D)
    # per-server budget rows, normalized to <= 1
    rows = np.tile(np.arange(N), D)
    cols = np.arange(D * N)
    data = (problem.cycles[:, None] / problem.budget[None, :]).ravel()
    A_ub = sp.csr_matrix((data, (rows, cols)), shape=(N, D * N))
    b_ub = np.ones(N)
    if problem.enforce_deadline:
        A_ub = sp.vstack([A_ub, sp.csr_matrix(problem.seconds.ravel()[None, :])], format="csr")
        b_ub = np.append(b_ub, problem.deadline_slack)
    return LinearProgram(np.asarray(cost, dtype=float).ravel(), A_ub, b_ub, A_eq, b_eq)


def relaxed_lower_bound(instance: Instance, chains=None, enforce_deadline: bool = True) -> float:
    """Objective of the plain LP relaxation (no penalty); bounds every binary placement from below."""
    chains = instance_chains(instance) if chains is None else list(chains)
    problem = build_problem(instance, chains, enforce_deadline)
    res = solve_lp(build_lp(problem, problem.energy))
    if not res.optimal:
        raise Infeasible("LP relaxation is infeasible")
    e_ran, reward = placement_invariant_terms(instance, chains)
    gossip = instance.costs.gossip_energy_j * sum(k.is_broadcast for k in problem.kinds)
    return e_ran + (res.value + gossip) - reward


@dataclass
class TraceEntry:
    surrogate: float
    penalized: float
    max_fractionality: float


@dataclass
class SolverTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    termination: str = ""

    @property
    def iterations(self) -> int:
        # entry 0 is the starting point
        return max(len(self.entries) - 1, 0)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def penalized(self) -> np.ndarray:
        return np.array([e.penalized for e in self.entries])


@dataclass
class MMResult:
    placement: Placement
    relaxed: Placement
    trace: SolverTrace
    mu: float
    x: np.ndarray


def penalized_objective(problem: PlacementProblem, x: np.ndarray, mu: float) -> float:
    return float((problem.energy * x).sum() + mu * (x - x * x).sum())


def surrogate_objective(problem: PlacementProblem, x: np.ndarray, xk: np.ndarray, mu: float) -> float:
    """Tangent majorizer of the penalized objective around ``xk``, evaluated at ``x``."""
    return float(((problem.energy + mu * (1.0 - 2.0 * xk)) * x).sum() + mu * (xk * xk).sum())


def default_mu(problem: PlacementProblem) -> float:
    largest = float(problem.energy.max()) if problem.energy.size else 0.0
    return 10.0 * largest if largest > 0 else 1.0


def round_to_servers(problem: PlacementProblem, x: np.ndarray) -> np.ndarray:
    """Each row to its largest-weight server; ties go to the lowest server id."""
    order = np.argsort(problem.server_ids, kind="stable")
    xs = x[:, order]
    best = (xs >= xs.max(axis=1, keepdims=True) - 1e-12).argmax(axis=1)
    out = np.zeros_like(x)
    out[np.arange(x.shape[0]), order[best]] = 1.0
    return out


def mm_solve(instance: Instance, penalty_mu: Optional[float] = None, max_iter: int = 100,
             conv_tol: float = 1e-5, chains=None, enforce_deadline: bool = True,
             do_repair: bool = True, do_polish: bool = True) -> MMResult:
    """Penalized relaxation solved by majorization-minimization, then rounded and repaired.

    Parameters
    ----------
    penalty_mu : float, optional
        Weight of the binariness penalty. Defaults to ten times the largest
        single-demand processing energy.
    max_iter, conv_tol
        Stop after ``max_iter`` LPs or once no weight moves by ``conv_tol``.
    enforce_deadline : bool
        Include the block-interval row (C1). Sweeps turn it off to still obtain
        a placement, flagged infeasible, where the deadline cannot be met.

    Raises
    ------
    Infeasible
        If the first LP has no solution.
    RepairFailed
        If the rounded placement cannot be made feasible.

    After rounding and repair, ``do_polish`` runs :func:`polish`, which only
    ever lowers the objective.
    """
    chains = instance_chains(instance) if chains is None else list(chains)
    problem = build_problem(instance, chains, enforce_deadline)
    D, N = problem.shape
    mu = default_mu(problem) if penalty_mu is None else float(penalty_mu)
    if mu < 0:
        raise ValueError("penalty_mu must be >= 0")

    x = np.full((D, N), 1.0 / N)
    f0 = penalized_objective(problem, x, mu)
    trace = SolverTrace([TraceEntry(f0, f0, _fractionality(x))])
    for k in range(1, max_iter + 1):
        lin = problem.energy + mu * (1.0 - 2.0 * x)
        res = solve_lp(build_lp(problem, lin))
        if not res.optimal:
            if k == 1:
                raise Infeasible(f"relaxed placement LP is {res.status.value}")
            trace.termination = f"lp_{res.status.value}"
            break
        x_new = np.clip(res.x.reshape(D, N), 0.0, 1.0)
        trace.entries.append(TraceEntry(
            surrogate_objective(problem, x_new, x, mu),
            penalized_objective(problem, x_new, mu),
            _fractionality(x_new),
        ))
        change = float(np.abs(x_new - x).max()) if x.size else 0.0
        x = x_new
        if change < conv_tol:
            trace.termination = "converged"
            break
    else:
        trace.termination = "max_iter"
        log.warning("mm_solve stopped after %d iterations without converging", max_iter)

    binary = problem.to_placement(round_to_servers(problem, x))
    if do_repair:
        binary = repair(binary, instance, chains=chains, enforce_deadline=enforce_deadline)
        if do_polish:
            binary = polish(binary, instance, chains=chains, enforce_deadline=enforce_deadline)
    return MMResult(binary, problem.to_fractional(x), trace, mu, x)


def _fractionality(x: np.ndarray) -> float:
    return float(np.abs(x - np.round(x)).max()) if x.size else 0.0


def repair(placement: Placement, instance: Instance, max_moves: Optional[int] = None, chains=None,
           enforce_deadline: bool = True) -> Placement:
    """Move demands off overloaded servers until the cycle budgets (and the deadline) hold.

    Budget phase: take the most overloaded server, move its smallest demand
    to the feasible server where it adds the least energy. Deadline phase:
    repeatedly make the single move that cuts the most processing time.
    """
    chains = instance_chains(instance) if chains is None else list(chains)
    problem = build_problem(instance, chains, enforce_deadline)
    D, N = problem.shape
    max_moves = 10 * D if max_moves is None else max_moves
    x = problem.matrix(placement)
    where = x.argmax(axis=1)
    budget = problem.budget
    energy, seconds = problem.energy, problem.seconds
    id_rank = np.argsort(np.argsort(problem.server_ids, kind="stable"))

    def loads():
        return np.bincount(where, weights=problem.cycles, minlength=N)

    moves = 0
    while True:
        load = loads()
        over = load / budget
        if over.max() <= 1 + FEASIBILITY_RTOL:
            break
        if moves >= max_moves:
            raise RepairFailed(f"cycle budgets still violated after {moves} moves")
        src = int(np.argmax(over))
        on_src = np.flatnonzero(where == src)
        d = int(on_src[np.argmin(problem.cycles[on_src])])
        fits = (load + problem.cycles[d] <= budget * (1 + FEASIBILITY_RTOL))
        fits[src] = False
        if not fits.any():
            raise RepairFailed(f"no server can absorb demand {problem.keys[d]} from server {problem.server_ids[src]}")
        cand = np.flatnonzero(fits)
        dst = cand[np.lexsort((id_rank[cand], energy[d, cand]))[0]]
        where[d] = dst
        moves += 1

    if enforce_deadline:
        slack = problem.deadline_slack * (1 + FEASIBILITY_RTOL)
        rows = np.arange(D)
        while (excess := seconds[rows, where].sum() - slack) > 0:
            if moves >= max_moves:
                raise RepairFailed(f"deadline still violated after {moves} moves")
            load = loads()
            saved = seconds[rows, where][:, None] - seconds
            added = energy - energy[rows, where][:, None]
            room = load[None, :] + problem.cycles[:, None] <= budget[None, :] * (1 + FEASIBILITY_RTOL)
            valid = room & (saved > 0)
            valid[rows, where] = False
            if not valid.any():
                raise RepairFailed("no move reduces processing time enough to meet the block interval")
            fixes = valid & (saved >= excess)
            if fixes.any():
                # cheapest single move that meets the deadline
                score = np.where(fixes, added, np.inf)
                d, dst = np.unravel_index(np.argmin(score), score.shape)
            else:
                # otherwise the most time saved per joule added
                ratio = np.where(added > 0, saved / np.where(added > 0, added, 1.0), np.inf)
                score = np.where(valid, ratio, -np.inf)
                d, dst = np.unravel_index(np.argmax(score), score.shape)
            where[d] = dst
            moves += 1

    return Placement({key: problem.server_ids[c] for key, c in zip(problem.keys, where)})


def polish(placement: Placement, instance: Instance, chains=None, enforce_deadline: bool = True,
           max_moves: Optional[int] = None) -> Placement:
    """Local search on a feasible placement: best single move or pairwise swap, until none helps.

    Only moves that lower processing energy and keep C1/C2 are taken, so the
    result is feasible whenever the start is.
    """
    chains = instance_chains(instance) if chains is None else list(chains)
    problem = build_problem(instance, chains, enforce_deadline)
    D, N = problem.shape
    max_moves = 10 * D * N if max_moves is None else max_moves
    where = problem.matrix(placement).argmax(axis=1)
    rows = np.arange(D)
    energy, seconds, cycles = problem.energy, problem.seconds, problem.cycles
    budget = problem.budget * (1 + FEASIBILITY_RTOL)
    slack = problem.deadline_slack * (1 + FEASIBILITY_RTOL) if enforce_deadline else np.inf
    # column order by server id so argmin tie-breaks toward the lowest id
    order = np.argsort(problem.server_ids, kind="stable")
    for _ in range(max_moves):
        load = np.bincount(where, weights=cycles, minlength=N)
        e_cur, s_cur = energy[rows, where], seconds[rows, where]
        total = s_cur.sum()
        eps = 1e-12 * max(1.0, abs(e_cur.sum()))

        delta = energy - e_cur[:, None]
        ok = load[None, :] + cycles[:, None] <= budget[None, :]
        ok &= total + seconds - s_cur[:, None] <= slack
        ok[rows, where] = False
        move = np.where(ok, delta, np.inf)[:, order]
        d, k = np.unravel_index(np.argmin(move), move.shape)
        best_move = move[d, k]

        # swap servers of demands a and b
        e_sw = energy[:, where]  # e_sw[a, b]: energy of a on b's server
        s_sw = seconds[:, where]
        swap = e_sw + e_sw.T - e_cur[:, None] - e_cur[None, :]
        shift = cycles[None, :] - cycles[:, None]  # load change on a's server
        ok2 = where[:, None] != where[None, :]
        ok2 &= load[where][:, None] + shift <= budget[where][:, None]
        ok2 &= load[where][None, :] - shift <= budget[where][None, :]
        ok2 &= total + s_sw + s_sw.T - s_cur[:, None] - s_cur[None, :] <= slack
        swap = np.where(ok2, swap, np.inf)
        a, b = np.unravel_index(np.argmin(swap), swap.shape)
        best_swap = swap[a, b]

        if min(best_move, best_swap) >= -eps:
            break
        if best_move <= best_swap:
            where[d] = order[k]
        else:
            where[a], where[b] = where[b], where[a]
    return Placement({key: problem.server_ids[c] for key, c in zip(problem.keys, where)})


@dataclass
class BruteForceResult:
    placement: Placement
    report: EvaluationReport
    evaluated: int


def brute_force_solve(instance: Instance, chains=None, limit: int = 10**7,
                      enforce_deadline: bool = True, chunk: int = 1 << 16) -> BruteForceResult:
    """Exact optimum by enumerating every binary placement.

    Placements are scanned in lexicographic order of their server-id vectors,
    so among equal objectives the lexicographically smallest wins.
    """
    chains = instance_chains(instance) if chains is None else list(chains)
    problem = build_problem(instance, chains, enforce_deadline)
    D, N = problem.shape
    total = N ** D
    if total > limit:
        raise SearchSpaceTooLarge(f"{N}^{D} = {total} placements exceeds the limit of {limit}")

    order = np.argsort(problem.server_ids, kind="stable")
    energy = problem.energy[:, order]
    seconds = problem.seconds[:, order]
    budget = problem.budget[order] * (1 + FEASIBILITY_RTOL)
    slack = problem.deadline_slack * (1 + FEASIBILITY_RTOL) if enforce_deadline else np.inf
    place = N ** np.arange(D - 1, -1, -1, dtype=np.int64)
    rows = np.arange(D)

    best_val, best_k = np.inf, -1
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk), dtype=np.int64)
        digits = (k[:, None] // place[None, :]) % N
        val = energy[rows, digits].sum(axis=1)
        ok = seconds[rows, digits].sum(axis=1) <= slack
        for n in range(N):
            ok &= (problem.cycles * (digits == n)).sum(axis=1) <= budget[n]
        val = np.where(ok, val, np.inf)
        m = val.min()
        if not np.isfinite(m):
            continue
        tie = 1e-12 * max(1.0, abs(m))
        i = int(np.flatnonzero(val <= m + tie)[0])
        if best_k < 0 or val[i] < best_val - 1e-12 * max(1.0, abs(best_val)):
            best_val, best_k = float(val[i]), int(k[i])

    if best_k < 0:
        raise Infeasible("no binary placement satisfies the constraints")
    digits = (best_k // place) % N
    x = np.zeros((D, N))
    x[rows, order[digits]] = 1.0
    placement = problem.to_placement(x)
    return BruteForceResult(placement, evaluate_matrix(x, instance, chains), total)


@dataclass
class PointSolution:
    """Outcome of solving one scenario point, including degraded cases."""

    placement: Optional[Placement]
    report: Optional[EvaluationReport]
    status: str
    iterations: int = 0
    trace: Optional[SolverTrace] = None


def solve_point(instance: Instance, penalty_mu: Optional[float] = None, max_iter: int = 100,
                conv_tol: float = 1e-5, chains=None, relax_deadline: bool = True) -> PointSolution:
    """mm_solve + evaluate, falling back to a deadline-free solve when C1 cannot hold.

    The fallback placement is still evaluated against C1, so its report is
    flagged infeasible.
    """
    chains = instance_chains(instance) if chains is None else list(chains)
    kw = dict(penalty_mu=penalty_mu, max_iter=max_iter, conv_tol=conv_tol, chains=chains)
    try:
        res = mm_solve(instance, **kw)
        status = res.trace.termination
    except (Infeasible, RepairFailed) as exc:
        if not relax_deadline:
            return PointSolution(None, None, f"infeasible: {exc}")
        try:
            res = mm_solve(instance, enforce_deadline=False, **kw)
        except (Infeasible, RepairFailed) as exc2:
            return PointSolution(None, None, f"infeasible: {exc2}")
        status = "deadline_relaxed"
    return PointSolution(res.placement, evaluate(res.placement, instance, chains), status,
                         res.trace.iterations, res.trace)


@dataclass
class BlockSizeSweep:
    best_n_trans: int
    best_report: EvaluationReport
    reports: dict[int, Optional[EvaluationReport]]


def sweep_block_size(instance: Instance, n_trans_grid: Sequence[int], **solver_kw) -> BlockSizeSweep:
    """Pick the transactions-per-block value with the largest reward minus energy.

    Points whose placement violates a constraint stay in ``reports`` but are
    never selected.
    """
    if not len(n_trans_grid):
        raise ValueError("n_trans_grid is empty")
    reports: dict[int, Optional[EvaluationReport]] = {}
    for n in n_trans_grid:
        point = replace(instance, params=replace(instance.params, n_trans=int(n)), chains=None)
        reports[int(n)] = solve_point(point, **solver_kw).report
    feasible = {n: r for n, r in reports.items() if r is not None and r.feasible}
    if not feasible:
        raise AllInfeasible("no block size in the grid admits a feasible placement", reports)
    best = max(feasible, key=lambda n: feasible[n].r_mining_total - feasible[n].e_total_j)
    return BlockSizeSweep(best, feasible[best], reports)
