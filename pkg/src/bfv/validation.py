"""Monte Carlo checks of the closed-form win, orphan and reward probabilities.

Random numbers come from numpy's PCG64 seeded with a 64-bit integer. When
trials are split into partitions, each partition draws from its own child
of ``SeedSequence(seed)``, so results depend only on (seed, partitions).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .analytics import NoMiners, miner_demands, p_mining, p_orphan, reward_pool
from .domain import BlockchainParams, Instance
from .workload import instance_chains


@dataclass(frozen=True)
class McConfig:
    trials: int = 1_000_000
    seed: int = 0
    partitions: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")

    def split(self) -> list[tuple[np.random.Generator, int]]:
        children = np.random.SeedSequence(self.seed).spawn(self.partitions)
        base, extra = divmod(self.trials, self.partitions)
        sizes = [base + (k < extra) for k in range(self.partitions)]
        return [(np.random.Generator(np.random.PCG64(ss)), n) for ss, n in zip(children, sizes)]


def _run(mc: McConfig, draw) -> np.ndarray:
    parts = mc.split()
    if len(parts) == 1:
        return draw(*parts[0])
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        results = list(pool.map(lambda p: draw(*p), parts))
    return np.sum(results, axis=0)


def simulate_mining_winners(demands: Mapping[int, float], mc: McConfig) -> dict[int, float]:
    """Empirical win frequency per miner from categorical draws weighted by demand."""
    if not demands:
        raise NoMiners("no miners to simulate")
    ids = list(demands)
    share = p_mining(demands)
    probs = np.array([share[i] for i in ids])
    probs = probs / probs.sum()

    def draw(rng, n):
        return np.bincount(rng.choice(len(ids), size=n, p=probs), minlength=len(ids))

    counts = _run(mc, draw)
    return {uid: float(c) / mc.trials for uid, c in zip(ids, counts)}


def simulate_orphaning(params: BlockchainParams, mc: McConfig) -> float:
    """Race a Poisson competing-block arrival (rate 1/T_th) against the propagation window z*N."""
    window = params.z_s_per_tx * params.n_trans

    def draw(rng, n):
        return np.count_nonzero(rng.exponential(params.t_th_s, size=n) < window)

    return float(_run(mc, draw)) / mc.trials


def binomial_bound(p: float, trials: int, k: float = 3.0) -> float:
    """k-sigma band of a binomial frequency, widened by one lattice step 1/trials."""
    return k * math.sqrt(max(p * (1.0 - p), 0.0) / trials) + 1.0 / trials


@dataclass
class Gap:
    quantity: str
    analytic: float
    empirical: float
    bound: float

    @property
    def gap(self) -> float:
        return abs(self.analytic - self.empirical)

    @property
    def passed(self) -> bool:
        return self.gap <= self.bound


@dataclass
class CrossCheck:
    gaps: list[Gap]

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gaps)

    def table(self) -> str:
        lines = [f"{'quantity':<24}{'analytic':>14}{'empirical':>14}{'gap':>12}{'bound':>12}  result"]
        for g in self.gaps:
            lines.append(f"{g.quantity:<24}{g.analytic:>14.7g}{g.empirical:>14.7g}{g.gap:>12.3g}"
                         f"{g.bound:>12.3g}  {'pass' if g.passed else 'FAIL'}")
        return "\n".join(lines)


def cross_check(instance: Instance, mc: McConfig, analytic: Optional[Mapping[str, float]] = None) -> CrossCheck:
    """Compare analytic probabilities and rewards with their simulated counterparts.

    ``analytic`` overrides individual analytic values by quantity name
    (``"p_orphan"``, ``"p_mining[<id>]"``, ``"r_mining[<id>]"``); useful for
    fault-injection tests.
    """
    analytic = dict(analytic or {})
    params = instance.params
    demands = miner_demands(instance_chains(instance))
    wins = p_mining(demands)
    po = analytic.get("p_orphan", p_orphan(params))

    freq = simulate_mining_winners(demands, mc)
    orphan_freq = simulate_orphaning(params, mc)
    pool = reward_pool(params)
    n = mc.trials

    gaps = [Gap("p_orphan", po, orphan_freq, binomial_bound(p_orphan(params), n))]
    sigma_o = math.sqrt(po * (1 - po) / n)
    for uid, p in wins.items():
        p_an = analytic.get(f"p_mining[{uid}]", p)
        gaps.append(Gap(f"p_mining[{uid}]", p_an, freq[uid], binomial_bound(p, n)))
        # delta-method band for the product p_mining * (1 - p_orphan)
        sigma_m = math.sqrt(p * (1 - p) / n)
        sigma_r = pool * math.hypot((1 - po) * sigma_m, p * sigma_o)
        r_an = analytic.get(f"r_mining[{uid}]", p_an * pool * (1 - po))
        r_emp = freq[uid] * pool * (1 - orphan_freq)
        gaps.append(Gap(f"r_mining[{uid}]", r_an, r_emp, 3 * sigma_r + 2 * pool / n))
    return CrossCheck(gaps)
