import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from bfv.lp import LinearProgram, LPStatus, MalformedLP, solve_lp


def test_min_x_on_unit_box():
    res = solve_lp(LinearProgram(np.array([1.0])))
    assert res.optimal and res.x[0] == pytest.approx(0.0, abs=1e-9) and res.value == pytest.approx(0.0, abs=1e-9)


def test_upper_row_binds():
    res = solve_lp(LinearProgram(np.array([-1.0]), np.array([[1.0]]), np.array([0.3])))
    assert res.x[0] == pytest.approx(0.3, abs=1e-6)


def test_infeasible():
    lp = LinearProgram(np.array([0.0]), np.array([[-1.0], [1.0]]), np.array([-2.0, 1.0]), upper=None)
    assert solve_lp(lp).status is LPStatus.INFEASIBLE


def test_unbounded():
    lp = LinearProgram(np.array([-1.0]), upper=None)
    assert solve_lp(lp).status is LPStatus.UNBOUNDED


def test_sparse_equality():
    lp = LinearProgram(np.array([1.0, 2.0]), A_eq=sp.csr_matrix([[1.0, 1.0]]), b_eq=np.array([1.0]))
    res = solve_lp(lp)
    assert res.x == pytest.approx([1.0, 0.0], abs=1e-7)


@pytest.mark.parametrize("lp", [
    LinearProgram(np.array([[1.0]])),
    LinearProgram(np.array([np.nan])),
    LinearProgram(np.array([1.0]), np.array([[1.0, 2.0]]), np.array([1.0])),
    LinearProgram(np.array([1.0]), np.array([[1.0]]), np.array([1.0, 2.0])),
    LinearProgram(np.array([1.0]), np.array([[np.inf]]), np.array([1.0])),
    LinearProgram(np.array([1.0]), A_eq=np.array([[1.0]])),
])
def test_malformed(lp):
    with pytest.raises(MalformedLP):
        solve_lp(lp)


def vertex_oracle(c, A, b):
    """Minimum of c.x over {A x <= b, 0 <= x <= 1} by enumerating every basic solution."""
    n = c.size
    rows = np.vstack([A, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([b, np.ones(n), np.zeros(n)])
    best = None
    for subset in itertools.combinations(range(rows.shape[0]), n):
        M = rows[list(subset)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[list(subset)])
        if np.all(rows @ x <= rhs + 1e-9):
            v = float(c @ x)
            best = v if best is None else min(best, v)
    return best


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_matches_vertex_enumeration(n, m, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    expected = vertex_oracle(c, A, b)
    res = solve_lp(LinearProgram(c, A if m else None, b if m else None))
    if expected is None:
        assert res.status is LPStatus.INFEASIBLE
    else:
        assert res.optimal
        assert res.value == pytest.approx(expected, abs=1e-6)
        if m:
            assert np.all(A @ res.x <= b + 1e-6)
        assert np.all((res.x >= -1e-6) & (res.x <= 1 + 1e-6))
