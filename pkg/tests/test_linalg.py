from fractions import Fraction

import pytest

from catprim._linalg import (
    InconsistentSystemError,
    PivotError,
    SparseTriangularizer,
    identity_matrix,
    mat_inverse,
    mat_mul,
    rank_of_columns,
    solve_columns,
)
from catprim.scalars import ScalarRing, SeriesRing


R = ScalarRing(4, 2)


def s(p, q=1):
    return R.rational(p, q)


def test_solve_columns_simple():
    cols = {
        "a": {0: s(1), 1: s(2)},
        "b": {1: s(1)},
    }
    rhs = {0: s(3), 1: s(4)}
    sol, null = solve_columns(cols, rhs, R.one)
    assert sol["a"] == s(3)
    assert sol["b"] == s(-2)
    assert null == []


def test_solve_columns_free_vars_zero():
    cols = {
        0: {0: s(1)},
        1: {0: s(2)},  # dependent on col 0
        2: {1: s(1)},
    }
    sol, null = solve_columns(cols, {0: s(4)}, R.one, want_nullspace=True)
    assert sol == {0: s(4)}
    assert len(null) == 1
    rel = null[0]
    # 2*col0 - col1 = 0 up to normalization
    assert (rel[0] * rel[1].inverse()) == s(-2)


def test_solve_columns_inconsistent():
    cols = {0: {0: s(1)}}
    with pytest.raises(InconsistentSystemError):
        solve_columns(cols, {1: s(1)}, R.one)


def test_rank_and_pivot_error():
    cols = [{0: s(1), 1: s(1)}, {0: s(2), 1: s(2)}, {1: s(5)}]
    assert rank_of_columns(cols, R.one) == 2
    # a non-monomial Puiseux pivot cannot be normalized
    bad = R.one + R.monomial(1)
    tri = SparseTriangularizer()
    with pytest.raises(PivotError):
        tri.insert(0, {0: bad}, R.one)


def test_mat_inverse_scalar():
    a = [[s(2), s(1)], [s(1), s(1)]]
    inv = mat_inverse(a, R.one, R.zero)
    assert mat_mul(a, inv, R.zero) == identity_matrix(2, R.one, R.zero)


def test_mat_inverse_monomial_pivots():
    t = R.monomial(1)
    a = [[t, R.zero], [R.one, t]]
    inv = mat_inverse(a, R.one, R.zero)
    assert mat_mul(inv, a, R.zero) == identity_matrix(2, R.one, R.zero)


def test_mat_inverse_series():
    S = SeriesRing(R, tvars=("t",), t_order=3, u_order=2, u_min=-2)
    t, u = S.var("t"), S.var("u")
    a = [[S.one + t, u], [t * u, S.one - t]]
    inv = mat_inverse(a, S.one, S.zero)
    assert mat_mul(a, inv, S.zero) == identity_matrix(2, S.one, S.zero)


def test_mat_inverse_singular():
    a = [[s(1), s(1)], [s(1), s(1)]]
    with pytest.raises(PivotError):
        mat_inverse(a, R.one, R.zero)
