"""Exact sparse and dense linear algebra over the scalar types.

Coefficients are any exact ring elements supporting +, -, *, is_zero() and
inverse() (raising ZeroDivisionError when not invertible).  Division happens
only at pivots; a column whose nonzero candidates are all non-invertible
raises PivotError rather than guessing.

Determinism: columns are processed in sorted key order, pivot rows are the
smallest row key of the reduced column, free variables are set to zero.
"""

from __future__ import annotations


class PivotError(ArithmeticError):
    """No invertible pivot available where one is required."""


class InconsistentSystemError(ArithmeticError):
    """Right-hand side not in the column span."""


def try_inverse(s):
    try:
        return s.inverse()
    except ZeroDivisionError:
        return None


class SparseTriangularizer:
    """Incremental column echelon form over sorted row keys.

    Each inserted vector is reduced against stored pivots; if nonzero
    remains it is normalized at its smallest row key and stored.  A running
    combination in terms of original column ids is carried along so systems
    can be solved and nullspaces extracted.
    """

    def __init__(self):
        self.pivots = {}  # row key -> (normalized vec, combo dict)

    def reduce(self, vec, combo=None):
        vec = dict(vec)
        combo = dict(combo) if combo else {}
        while vec:
            lead = min(vec)
            if lead not in self.pivots:
                return vec, combo, lead
            pvec, pcombo = self.pivots[lead]
            factor = vec[lead]
            for rk, c in pvec.items():
                p = factor * c
                if rk in vec:
                    s = vec[rk] - p
                    if s.is_zero():
                        del vec[rk]
                    else:
                        vec[rk] = s
                else:
                    vec[rk] = -p
            for cid, c in pcombo.items():
                p = factor * c
                if cid in combo:
                    s = combo[cid] - p
                    if s.is_zero():
                        del combo[cid]
                    else:
                        combo[cid] = s
                else:
                    combo[cid] = -p
        return vec, combo, None

    def insert(self, col_id, vec, one, track=True):
        """Insert a column; returns None if it was independent, else the
        nullspace combination it satisfies (combo includes col_id).

        track=False stores an empty combination for the new pivot, so later
        combos never mention it.  Use for columns whose provenance is not
        needed (e.g. a boundary basis one only quotients by)."""
        red, combo, lead = self.reduce(vec, {col_id: one})
        if lead is None:
            return combo
        inv = try_inverse(red[lead])
        if inv is None:
            raise PivotError(f"non-invertible pivot at row {lead!r}")
        nvec = {rk: inv * c for rk, c in red.items()}
        ncombo = {cid: inv * c for cid, c in combo.items()} if track else {}
        self.pivots[lead] = (nvec, ncombo)
        return None

    @property
    def rank(self):
        return len(self.pivots)


def solve_columns(columns, rhs, one, want_nullspace=False):
    """Solve sum_c x_c * columns[c] = rhs.

    columns: dict col_id -> sparse vec (dict row_key -> scalar); processed in
    sorted col_id order.  Returns (solution dict with free vars omitted,
    nullspace list).  Raises InconsistentSystemError when rhs escapes the span.
    """
    tri = SparseTriangularizer()
    nullspace = []
    for cid in sorted(columns):
        rel = tri.insert(cid, columns[cid], one)
        if rel is not None:
            if want_nullspace:
                nullspace.append(rel)
    red, combo, lead = tri.reduce(rhs, None)
    if lead is not None:
        raise InconsistentSystemError(f"residual at row {lead!r}")
    # tri solved pivots = rhs - combo contributions with sign: reduce() gave
    # rhs = sum(-combo[cid] * col_cid) + 0, so x = -combo
    solution = {cid: -c for cid, c in combo.items()}
    return solution, nullspace


def rank_of_columns(columns_iter, one):
    tri = SparseTriangularizer()
    for vec in columns_iter:
        if vec:
            try:
                tri.insert(None, vec, one)
            except PivotError:
                raise
    return tri.rank


# dense helpers; A, B are lists of lists of ring elements


def mat_mul(a, b, zero):
    n, k, m = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            s = zero
            for l in range(k):
                s = s + a[i][l] * b[l][j]
            row.append(s)
        out.append(row)
    return out


def mat_vec(a, v, zero):
    return [sum_list([a[i][l] * v[l] for l in range(len(v))], zero) for i in range(len(a))]


def sum_list(xs, zero):
    s = zero
    for x in xs:
        s = s + x
    return s


def mat_add(a, b):
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_sub(a, b):
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_scale(a, s):
    return [[x * s for x in row] for row in a]


def mat_transpose(a):
    return [list(col) for col in zip(*a)]


def identity_matrix(n, one, zero):
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def mat_inverse(a, one, zero):
    """Gauss-Jordan inverse; pivots must be invertible ring elements.

    Works unchanged for scalar matrices and for truncated-series matrices
    whose constant term is invertible.
    """
    n = len(a)
    work = [list(row) for row in a]
    inv = identity_matrix(n, one, zero)
    for col in range(n):
        piv, pinv = None, None
        for r in range(col, n):
            if not work[r][col].is_zero():
                cand = try_inverse(work[r][col])
                if cand is not None:
                    piv, pinv = r, cand
                    break
        if piv is None:
            raise PivotError(f"matrix not invertible at column {col}")
        if piv != col:
            work[col], work[piv] = work[piv], work[col]
            inv[col], inv[piv] = inv[piv], inv[col]
        work[col] = [x * pinv for x in work[col]]
        inv[col] = [x * pinv for x in inv[col]]
        for r in range(n):
            if r == col:
                continue
            f = work[r][col]
            if f.is_zero():
                continue
            work[r] = [x - f * y for x, y in zip(work[r], work[col])]
            inv[r] = [x - f * y for x, y in zip(inv[r], inv[col])]
    return inv


def mat_solve(a, b, one, zero):
    """Solve a @ x = b for dense square a (b a matrix)."""
    return mat_mul(mat_inverse(a, one, zero), b, zero)
