"""
Checking the probability formulas by simulation
===============================================

Win probabilities, the orphan probability and the resulting rewards are
closed-form. Here each is compared with a seeded Monte Carlo estimate and a
3-sigma binomial band.
"""

import numpy as np

from bfv import McConfig, cross_check, default_instance
from bfv.analytics import p_orphan
from bfv.domain import BlockchainParams
from bfv.validation import simulate_orphaning

inst = default_instance(n_miners=6)
result = cross_check(inst, McConfig(trials=1_000_000, seed=0))
print(result.table())
print("all within bounds:", result.passed)

###############################################################################
# The estimation error falls like 1/sqrt(trials).
params = BlockchainParams()
p = p_orphan(params)
print(f"\nanalytic p_orphan = {p:.7f}")
for n in (10**3, 10**4, 10**5, 10**6):
    gaps = [abs(simulate_orphaning(params, McConfig(n, seed)) - p) for seed in range(10)]
    print(f"  trials={n:>8d}  mean |gap|={np.mean(gaps):.2e}  gap*sqrt(n)={np.mean(gaps) * np.sqrt(n):.3f}")
