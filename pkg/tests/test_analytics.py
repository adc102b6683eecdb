import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bfv.analytics import (
    NoMiners,
    Placement,
    UnplacedDemand,
    ZeroLatency,
    confirmation_rate,
    e_mec,
    e_ran,
    evaluate,
    indexed_demands,
    p_mining,
    p_orphan,
    r_mining,
    t_mec,
    t_ran,
)
from bfv.domain import (
    BlockchainParams,
    CostTable,
    FunctionKind as K,
    Server,
    ServerGraph,
    UserDevice,
    default_instance,
    validate_instance,
)
from bfv.workload import FunctionChain, FunctionDemand, instance_chains
from instances import random_small_instance

COSTS = CostTable()
ONE = ServerGraph((Server(0, 5e9, 125.0),))


def chain(uid, *demands):
    return FunctionChain(uid, tuple(FunctionDemand(uid, k, c, b, 0.0) for k, c, b in demands))


def everything_on(server_id, chains):
    return Placement({key: server_id for key, _ in indexed_demands(chains)})


# -- radio access ---------------------------------------------------------

def test_t_ran_examples():
    users = [UserDevice(0), UserDevice(1)]
    assert t_ran([chain(0, (K.AUTHENTICATION, 0, 1e6))], users) == pytest.approx(0.8, rel=1e-15)
    assert t_ran([chain(0, (K.AUTHENTICATION, 0, 0.0))], users) == 0.0
    two = [chain(0, (K.AUTHENTICATION, 0, 1e6)), chain(1, (K.AUTHENTICATION, 0, 0.25e6))]
    assert t_ran(two, users) == pytest.approx(0.8)


def test_e_ran_examples():
    users = [UserDevice(0), UserDevice(1)]
    one = [chain(0, (K.AUTHENTICATION, 0, 1e6))]
    assert e_ran(one, users) == pytest.approx(0.16, rel=1e-15)
    assert e_ran([chain(0, (K.AUTHENTICATION, 0, 0.0))], users) == 0.0
    two = one + [chain(1, (K.AUTHENTICATION, 0, 1e6))]
    assert e_ran(two, users) == 2 * e_ran(one, users)


# -- servers ----------------------------------------------------------------

def test_t_mec_examples():
    big = [chain(0, (K.MINING, 5e9, 0))]
    assert t_mec(everything_on(0, big), big, ONE) == 1.0
    mining = [chain(0, (K.MINING, 0.25e9, 0))]
    assert t_mec(everything_on(0, mining), mining, ONE) == 0.05
    assert t_mec(Placement({}), [], ONE) == 0.0


def test_e_mec_examples():
    mining = [chain(0, (K.MINING, 0.25e9, 0))]
    assert e_mec(everything_on(0, mining), mining, ONE, COSTS) == 6.25
    with_bcast = [chain(0, (K.MINING, 0.25e9, 0), (K.BLOCK_BROADCAST, 0.0, 0))]
    assert e_mec(everything_on(0, with_bcast), with_bcast, ONE, COSTS) == 6.25 + 12.5
    assert e_mec(Placement({}), [], ONE, COSTS) == 0.0


def test_unplaced_demand():
    c = [chain(0, (K.MINING, 1e9, 0), (K.BLOCK_BROADCAST, 0.0, 0))]
    with pytest.raises(UnplacedDemand):
        t_mec(Placement({(0, 0): 0}), c, ONE)
    with pytest.raises(UnplacedDemand):
        e_mec(Placement({(0, 0): 0, (0, 1): 99}), c, ONE, COSTS)


# -- probabilities and rewards -----------------------------------------------

def test_p_mining_examples():
    assert p_mining({4: 123.0}) == {4: 1.0}
    shares = p_mining({i: 7.0 for i in range(50)})
    assert all(p == pytest.approx(0.02, abs=1e-15) for p in shares.values())
    assert p_mining({0: 3.0, 1: 1.0}) == {0: 0.75, 1: 0.25}
    with pytest.raises(NoMiners):
        p_mining({})


def test_p_orphan_examples():
    assert p_orphan(BlockchainParams(z_s_per_tx=0.0)) == 0.0
    assert p_orphan(BlockchainParams(t_th_s=1, z_s_per_tx=2e-5, n_trans=5000)) == pytest.approx(0.0951626, abs=1e-7)
    assert p_orphan(BlockchainParams(t_th_s=2)) < p_orphan(BlockchainParams(t_th_s=1))


def test_r_mining_examples():
    params = BlockchainParams()
    assert r_mining(params, {0: 1.0}, 0.0) == {0: 12.5 + 5000 * 1e-3}
    assert r_mining(params, {0: 0.0}, 0.3) == {0: 0.0}
    r = r_mining(params, {0: 0.02}, p_orphan(params))[0]
    assert r == pytest.approx(0.02 * 17.5 * math.exp(-0.1), rel=1e-12)
    assert round(r, 6) == 0.316693


def test_confirmation_rate_examples():
    params = BlockchainParams(n_trans=5000)
    assert confirmation_rate(params, 0.25, 0.75, 0.0) == 5000.0
    assert confirmation_rate(replace(params, n_trans=10000), 0.25, 0.75, 0.0) == 10000.0
    assert confirmation_rate(params, 0.2, 0.3, p_orphan(params)) == pytest.approx(9048.37, abs=0.005)
    with pytest.raises(ZeroLatency):
        confirmation_rate(params, 0.0, 0.0, 0.1)


# -- evaluate -------------------------------------------------------------------

def test_micro_instance_report():
    inst = validate_instance(ONE, [UserDevice(0)])
    chains = instance_chains(inst)
    report = evaluate(everything_on(0, chains), inst)
    # hand composition: one miner chain, all on the single 5 GHz / 125 W server
    cycles = 15.61e6 + 15.8e6 + 15 * 15.8e6 + 0.25e9
    e_mec_hand = 125 * cycles / 5e9 + 12.5
    e_ran_hand = 0.2 * 8e6 / 1e7
    reward = 17.5 * math.exp(-0.1)
    assert report.feasible, report.violations
    assert report.e_mec_j == pytest.approx(e_mec_hand, rel=1e-12)
    assert report.e_ran_j == pytest.approx(e_ran_hand, rel=1e-12)
    assert report.e_total_j == report.e_ran_j + report.e_mec_j
    assert report.r_mining == {0: pytest.approx(reward, rel=1e-12)}
    assert report.objective == pytest.approx(e_mec_hand + e_ran_hand - reward, rel=1e-12)
    assert report.confirmation_rate_tps == pytest.approx(5000 * math.exp(-0.1) / (0.8 + cycles / 5e9))


def test_default_instance_average_reward():
    inst = default_instance()
    report = evaluate(everything_on(0, instance_chains(inst)), inst)
    assert report.avg_r_mining == pytest.approx(0.316693, abs=5e-7)
    assert sum(report.p_mining.values()) == pytest.approx(1.0, abs=1e-9)


def test_c2_violation_names_server():
    graph = ServerGraph((Server(3, 1e9), Server(8, 5e9)))
    inst = validate_instance(graph, [UserDevice(0)], chains=[chain(0, (K.MINING, 2e9, 0))])
    report = evaluate(Placement({(0, 0): 3}), inst)
    assert not report.feasible
    assert any(v.startswith("C2") and "server 3" in v for v in report.violations)
    assert evaluate(Placement({(0, 0): 8}), inst).feasible


def test_c1_violation():
    inst = validate_instance(ONE, [UserDevice(0)], BlockchainParams(t_th_s=0.01))
    report = evaluate(everything_on(0, instance_chains(inst)), inst)
    assert not report.feasible
    assert any(v.startswith("C1") for v in report.violations)


def test_bad_fractional_weights_flag_assignment():
    inst = validate_instance(ServerGraph.uniform(2), [UserDevice(0)], chains=[chain(0, (K.MINING, 1e8, 0))])
    report = evaluate(Placement({}, {(0, 0, 0): 0.3, (0, 0, 1): 0.3}), inst)
    assert any(v.startswith("assignment") for v in report.violations)


# -- properties ---------------------------------------------------------------

def random_assign(inst, rng):
    ids = inst.graph.server_ids
    return Placement({key: int(rng.choice(ids)) for key, _ in indexed_demands(inst.chains)})


seeds = st.integers(0, 10**6)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(-3, 3))
def test_scale_law(seed, m):
    inst = random_small_instance(seed)
    place = random_assign(inst, np.random.default_rng(seed))
    k = 2.0 ** m  # powers of two keep the division exact
    scaled = replace(inst.graph, servers=tuple(replace(s, capacity_hz=s.capacity_hz * k) for s in inst.graph.servers))
    chains = list(inst.chains)
    assert t_mec(place, chains, scaled) == t_mec(place, chains, inst.graph) / k
    gossip = 12.5 * sum(d.kind.is_broadcast for _, d in indexed_demands(chains))
    base = e_mec(place, chains, inst.graph, COSTS) - gossip
    assert e_mec(place, chains, scaled, COSTS) - gossip == pytest.approx(base / k, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_e_mec_additive(seed):
    inst = random_small_instance(seed)
    chains = list(inst.chains)
    rng = np.random.default_rng(seed)
    place = random_assign(inst, rng)
    mask = rng.random(len(chains)) < 0.5
    parts = [[c for c, m in zip(chains, mask) if m == side] for side in (True, False)]
    # keys are per-user counters, so each part re-indexes its own demands
    total = 0.0
    for part in parts:
        sub = {}
        for (key, _), (pkey, _) in zip(indexed_demands(part), _keys_in(chains, part)):
            sub[key] = place.assign[pkey]
        total += e_mec(Placement(sub), part, inst.graph, COSTS)
    assert e_mec(place, chains, inst.graph, COSTS) == pytest.approx(total, rel=1e-12)


def _keys_in(chains, part):
    """Keys of ``part``'s demands within the full chain list."""
    chosen = {id(c) for c in part}
    out, counters = [], {}
    for c in chains:
        for d in c.demands:
            j = counters.get(c.user_id, 0)
            counters[c.user_id] = j + 1
            if id(c) in chosen:
                out.append(((c.user_id, j), d))
    return out


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_objective_argmin_is_e_mec_argmin(seed):
    inst = random_small_instance(seed, max_users=2, max_servers=3)
    chains = list(inst.chains)
    keys = [key for key, _ in indexed_demands(chains)]
    ids = inst.graph.server_ids
    objectives, energies = [], []
    for combo in itertools.islice(itertools.product(ids, repeat=len(keys)), 2000):
        r = evaluate(Placement(dict(zip(keys, combo))), inst)
        objectives.append(r.objective)
        energies.append(r.e_mec_j)
    objectives, energies = np.array(objectives), np.array(energies)
    # the difference is placement-invariant
    assert np.ptp(objectives - energies) <= 1e-9 * max(1.0, np.abs(objectives).max())
    assert np.isclose(objectives[np.argmin(energies)], objectives.min(), rtol=1e-12, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_integral_fractional_equals_binary(seed):
    inst = random_small_instance(seed)
    place = random_assign(inst, np.random.default_rng(seed))
    frac = {(u, j, sid): float(sid == place.assign[(u, j)]) for (u, j) in place.assign for sid in inst.graph.server_ids}
    a = evaluate(place, inst)
    b = evaluate(Placement({}, frac), inst)
    assert a == b


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_report_invariants(seed):
    inst = random_small_instance(seed)
    r = evaluate(random_assign(inst, np.random.default_rng(seed)), inst)
    assert r.e_total_j == r.e_ran_j + r.e_mec_j
    assert 0 <= r.p_orphan < 1
    assert all(0 <= p <= 1 for p in r.p_mining.values())
    assert abs(sum(r.p_mining.values()) - 1) <= 1e-9
    assert all(v >= 0 for v in r.r_mining.values())
