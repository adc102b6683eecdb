import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bfv.analytics import Placement, evaluate, indexed_demands
from bfv.domain import (
    BlockchainParams,
    FunctionKind as K,
    Server,
    ServerGraph,
    UserDevice,
    default_instance,
    validate_instance,
)
from bfv.placement import (
    AllInfeasible,
    Infeasible,
    RepairFailed,
    SearchSpaceTooLarge,
    brute_force_solve,
    build_problem,
    default_mu,
    mm_solve,
    penalized_objective,
    relaxed_lower_bound,
    repair,
    solve_point,
    surrogate_objective,
    sweep_block_size,
)
from bfv.workload import FunctionChain, FunctionDemand
from instances import random_small_instance


def mining_instance(servers, cycles, t_th=1.0):
    chains = [FunctionChain(0, tuple(FunctionDemand(0, K.MINING, c) for c in cycles))]
    return validate_instance(ServerGraph(servers), [UserDevice(0)], BlockchainParams(t_th_s=t_th), chains=chains)


# -- brute force ----------------------------------------------------------------

def test_brute_force_prefers_cheaper_server():
    inst = mining_instance((Server(0, 5e9, 125.0), Server(1, 5e9, 250.0)), [1e9])
    res = brute_force_solve(inst)
    assert res.placement.assign == {(0, 0): 0}
    assert res.report.e_mec_j == pytest.approx(25.0)
    assert evaluate(Placement({(0, 0): 1}), inst).e_mec_j == pytest.approx(50.0)


def test_brute_force_tie_goes_to_lowest_id():
    inst = mining_instance((Server(2), Server(1)), [1e9])
    assert brute_force_solve(inst).placement.assign == {(0, 0): 1}


def test_brute_force_infeasible():
    with pytest.raises(Infeasible):
        brute_force_solve(mining_instance((Server(0), Server(1)), [1e10]))


def test_brute_force_guard():
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_solve(default_instance())


def exhaustive(inst):
    """Independent oracle: evaluate every placement through the public evaluator."""
    keys = [k for k, _ in indexed_demands(inst.chains)]
    best = None
    for combo in itertools.product(sorted(inst.graph.server_ids), repeat=len(keys)):
        r = evaluate(Placement(dict(zip(keys, combo))), inst)
        if r.feasible and (best is None or r.objective < best - 1e-12 * abs(best)):
            best = r.objective
    return best


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_brute_force_matches_exhaustive(seed):
    inst = random_small_instance(seed, max_users=2, max_servers=3)
    assert brute_force_solve(inst).report.objective == pytest.approx(exhaustive(inst), rel=1e-12)


# -- MM solver ----------------------------------------------------------------

def test_single_server_one_iteration():
    inst = mining_instance((Server(4),), [1e8, 2e8])
    res = mm_solve(inst)
    assert res.trace.iterations == 1 and res.trace.converged
    assert res.placement.assign == {(0, 0): 4, (0, 1): 4}


def test_mu_zero_on_identical_servers():
    inst = mining_instance(tuple(Server(i) for i in range(3)), [1e8, 2e8, 3e8])
    res = mm_solve(inst, penalty_mu=0.0)
    assert res.mu == 0.0
    assert set(res.placement.assign) == {(0, 0), (0, 1), (0, 2)}
    assert evaluate(res.placement, inst).feasible


def test_negative_mu_rejected():
    with pytest.raises(ValueError):
        mm_solve(mining_instance((Server(0),), [1e8]), penalty_mu=-1.0)


def test_infeasible_first_lp():
    with pytest.raises(Infeasible):
        mm_solve(mining_instance((Server(0), Server(1)), [1e10]))


def test_max_iter_flagged(caplog):
    inst = random_small_instance(3)
    res = mm_solve(inst, max_iter=1, conv_tol=0.0)
    assert res.trace.termination == "max_iter"
    assert "without converging" in caplog.text


def test_default_mu_is_ten_times_largest_energy():
    inst = mining_instance((Server(0, 5e9, 125.0), Server(1, 2e9, 100.0)), [1e9, 2e9], t_th=5)
    assert default_mu(build_problem(inst)) == pytest.approx(10 * 100.0 * 2e9 / 2e9)


seeds = st.integers(0, 10**6)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_descent_integrality_and_lower_bound(seed):
    inst = random_small_instance(seed)
    res = mm_solve(inst)
    assert np.all(np.diff(res.trace.penalized) <= 1e-9)
    assert res.placement.fractional is None and res.placement.is_integral()
    report = evaluate(res.placement, inst)
    assert report.feasible
    oracle = brute_force_solve(inst).report.objective
    assert relaxed_lower_bound(inst) <= oracle + 1e-9 * abs(oracle)
    assert report.objective >= oracle - 1e-9 * abs(oracle)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_surrogate_majorizes(seed):
    inst = random_small_instance(seed)
    problem = build_problem(inst)
    rng = np.random.default_rng(seed)
    mu = default_mu(problem)
    xk = rng.random(problem.shape)
    assert surrogate_objective(problem, xk, xk, mu) == pytest.approx(penalized_objective(problem, xk, mu), rel=1e-12)
    for _ in range(10):
        x = rng.random(problem.shape)
        assert surrogate_objective(problem, x, xk, mu) >= penalized_objective(problem, x, mu) - 1e-9


def test_deterministic():
    inst = random_small_instance(11)
    a, b = mm_solve(inst), mm_solve(inst)
    assert a.placement == b.placement
    assert np.array_equal(a.x, b.x)


# -- repair -------------------------------------------------------------------

def test_repair_fixed_point():
    inst = random_small_instance(5)
    feasible = brute_force_solve(inst).placement
    assert repair(feasible, inst) == feasible


def test_repair_one_move():
    # with identical servers the deadline already implies the budgets, so only C2 is exercised here
    inst = mining_instance((Server(0), Server(1)), [3e9, 3e9])
    fixed = repair(Placement({(0, 0): 0, (0, 1): 0}), inst, enforce_deadline=False)
    assert sorted(fixed.assign.values()) == [0, 1]
    assert not any(v.startswith("C2") for v in evaluate(fixed, inst).violations)


def test_repair_pigeonhole():
    inst = mining_instance((Server(0), Server(1)), [5e9, 5e9, 1e9])
    full = Placement({(0, 0): 0, (0, 1): 1, (0, 2): 1})
    with pytest.raises(RepairFailed):
        repair(full, inst, enforce_deadline=False)


def test_repair_meets_deadline_on_mixed_servers():
    inst = mining_instance((Server(0, 1e9, 50.0), Server(1, 5e9, 125.0)), [1e9, 1e9], t_th=1.0)
    fixed = repair(Placement({(0, 0): 0, (0, 1): 0}), inst)
    assert evaluate(fixed, inst).feasible


# -- solve_point / block-size sweep -------------------------------------------------

def test_solve_point_deadline_fallback():
    inst = default_instance(n_miners=10)
    sol = solve_point(inst)
    assert sol.status == "deadline_relaxed"
    assert not sol.report.feasible and any(v.startswith("C1") for v in sol.report.violations)
    strict = solve_point(inst, relax_deadline=False)
    assert strict.report is None and strict.status.startswith("infeasible")


def one_miner():
    return validate_instance(ServerGraph.uniform(4), [UserDevice(0)])


def test_sweep_singleton():
    res = sweep_block_size(one_miner(), [5000])
    assert res.best_n_trans == 5000 and res.best_report.feasible
    assert list(res.reports) == [5000]


def test_sweep_excludes_infeasible_points():
    res = sweep_block_size(one_miner(), [1000, 5000, 20000])
    assert res.reports[20000] is not None and not res.reports[20000].feasible
    assert res.best_n_trans in (1000, 5000)
    best = max((1000, 5000), key=lambda n: res.reports[n].r_mining_total - res.reports[n].e_total_j)
    assert res.best_n_trans == best


def test_sweep_table_i_orphan_trend():
    with pytest.raises(AllInfeasible) as exc:
        sweep_block_size(default_instance(), [1000, 5000, 10000])
    p = [exc.value.reports[n].p_orphan for n in (1000, 5000, 10000)]
    assert p[0] < p[1] < p[2]


def test_sweep_empty_grid():
    with pytest.raises(ValueError):
        sweep_block_size(one_miner(), [])
