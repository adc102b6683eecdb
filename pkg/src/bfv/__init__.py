"""Blockchain function virtualization: placement of blockchain functions on edge servers.

Models the transaction, mining and block-receipt pipeline as CPU-cycle
demands, places them on servers to trade energy against mining reward, and
evaluates the result against a mining-only offload baseline.
"""

from .analytics import EvaluationReport, Placement, evaluate
from .baseline import evaluate_baseline
from .domain import (
    BlockchainParams,
    CostTable,
    DeviceClass,
    FunctionKind,
    Instance,
    Link,
    Server,
    ServerGraph,
    UserDevice,
    ValidationError,
    default_instance,
    make_population,
    validate_instance,
)
from .placement import brute_force_solve, mm_solve, repair, solve_point, sweep_block_size
from .validation import McConfig, cross_check

__version__ = "0.1.0"

__all__ = [
    "BlockchainParams", "CostTable", "DeviceClass", "EvaluationReport", "FunctionKind", "Instance",
    "Link", "McConfig", "Placement", "Server", "ServerGraph", "UserDevice", "ValidationError",
    "brute_force_solve", "cross_check", "default_instance", "evaluate", "evaluate_baseline",
    "make_population", "mm_solve", "repair", "solve_point", "sweep_block_size", "validate_instance",
]
