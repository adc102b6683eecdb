"""Linear programs in inequality/equality form, solved with HiGHS through scipy."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog


class MalformedLP(ValueError):
    pass


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper.

    Constraint matrices may be dense arrays or scipy sparse matrices. Bounds
    default to the unit box; ``None`` in ``upper`` means unbounded above.
    """

    c: np.ndarray
    A_ub: Optional[object] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[object] = None
    b_eq: Optional[np.ndarray] = None
    lower: float = 0.0
    upper: Optional[float] = 1.0

    @property
    def n_vars(self) -> int:
        return int(np.asarray(self.c).shape[0])

    def check(self) -> None:
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1:
            raise MalformedLP("objective must be a vector")
        if not np.all(np.isfinite(c)):
            raise MalformedLP("objective has NaN or infinite coefficients")
        for name, A, b in (("A_ub", self.A_ub, self.b_ub), ("A_eq", self.A_eq, self.b_eq)):
            if A is None and b is None:
                continue
            if A is None or b is None:
                raise MalformedLP(f"{name} given without its right-hand side (or vice versa)")
            shape = A.shape
            b = np.asarray(b, dtype=float)
            if len(shape) != 2 or shape[1] != c.size:
                raise MalformedLP(f"{name} has {shape[-1]} columns, expected {c.size}")
            if b.shape != (shape[0],):
                raise MalformedLP(f"{name} has {shape[0]} rows but rhs has shape {b.shape}")
            data = A.data if sp.issparse(A) else np.asarray(A, dtype=float)
            if not (np.all(np.isfinite(data)) and np.all(np.isfinite(b))):
                raise MalformedLP(f"{name} or its rhs has NaN or infinite entries")


@dataclass
class LPResult:
    status: LPStatus
    x: Optional[np.ndarray] = None
    value: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def solve_lp(lp: LinearProgram, tol: float = 1e-6) -> LPResult:
    lp.check()
    res = linprog(
        np.asarray(lp.c, dtype=float),
        A_ub=lp.A_ub,
        b_ub=lp.b_ub,
        A_eq=lp.A_eq,
        b_eq=lp.b_eq,
        bounds=(lp.lower, lp.upper),
        method="highs",
        options={
            "primal_feasibility_tolerance": min(tol, 1e-7),
            "dual_feasibility_tolerance": min(tol, 1e-7),
        },
    )
    if res.status == 2:
        return LPResult(LPStatus.INFEASIBLE)
    if res.status == 3:
        return LPResult(LPStatus.UNBOUNDED)
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = np.asarray(res.x, dtype=float)
    return LPResult(LPStatus.OPTIMAL, x, float(np.dot(lp.c, x)))
