"""Class bases, grading operators, the matrix recursion, and u-series lifts.

Golden values are frozen from hand computation in the two Clifford
fixtures; structural identities (flatness, pairing, round trips) are
checked exactly, never numerically.
"""

import random
from math import factorial

import pytest

from catprim.ainfinity import CyclicAInfCategory, clifford_model, validate
from catprim.scalars import SeriesRing
from catprim.hochschild import (
    Chain,
    NegCyclicElement,
    b,
    cyclic_differential,
    u_connection,
)
from catprim.splitting import (
    GradingOperator,
    Splitting,
    SplittingError,
    check_grading,
    check_splitting,
    check_symplectic,
    grading_from_euler_powers,
    grading_from_splitting,
    grading_space,
    hodge_basis,
    r_matrix,
    semisimple_splitting,
    solve_boundary,
    splitting_coordinates,
    splitting_from_grading,
)

CLIFF1 = clifford_model(1)
CLIFF2 = clifford_model(2)
BASIS1 = hodge_basis(CLIFF1)
BASIS2 = hodge_basis(CLIFF2)
SS1 = semisimple_splitting(CLIFF1, u_order=6, basis=BASIS1)
SS2 = semisimple_splitting(CLIFF2, u_order=2, basis=BASIS2)


def doubled_block_model():
    """Two copies of one Clifford block: valid, but both classes carry
    the same curvature, so no nonzero grading exists."""
    blk = CLIFF1.blocks[0]
    return CyclicAInfCategory(CLIFF1.ring, [blk, blk], parity=1, max_arity=2)


def double_factorial(m):
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def series_eval(e, val):
    """Evaluate a one-variable truncated series at a scalar point."""
    ring = e.ring.scalars
    total = ring.zero
    for (_, t), c in e.terms.items():
        v = c
        for _ in range(t[0]):
            v = v * val
        total = total + v
    return total


def cliff2_family(r, x):
    """Hand-solved two-parameter grading family of the three-block model;
    the member at (r, x) sends the unit class to r times itself."""
    ring = CLIFF2.ring
    eps = ring.zeta(4)
    eps2 = eps * eps
    z = ring.zero
    return [
        [z, -(eps * r) - eps2 * x, eps2 * x - eps2 * r],
        [r + eps * x, z, -(eps * x)],
        [r - x, x, z],
    ]


CLIFF2_POINTS = [
    (1, 1, 0, 1),
    (0, 1, 1, 1),
    (2, 1, 3, 1),
    (-1, 2, 1, 5),
    (-1, 1, None, 1),  # x = 1/(eps-1): the euler-powers member
]


def cliff2_point(rn, rd, xn, xd):
    ring = CLIFF2.ring
    r = ring.rational(rn, rd)
    if xn is None:
        x = (ring.zeta(4) - ring.one).inverse()
    else:
        x = ring.rational(xn, xd)
    return r, x


# --- the class basis, by hand ----------------------------------------------

def test_basis_clifford1_values():
    ring = CLIFF1.ring
    i_unit = ring.zeta(1)
    half_rt = ring.monomial(-2, ring.field.rational(1, 2))  # (1/2) T^{-1/2}
    assert len(BASIS1) == 2
    for k in (0, 1):
        cls = BASIS1.classes[k]
        sgn = 1 if k == 0 else -1
        assert cls.terms == {(k, (1,)): half_rt * i_unit * ring.rational(sgn)}
    two_rt = ring.monomial(2, ring.field.rational(2))
    assert BASIS1.curvatures == [two_rt, -two_rt]
    assert BASIS1.gram == [[half_rt, ring.zero], [ring.zero, -half_rt]]
    assert BASIS1.coords(BASIS1.omega) == [ring.one, ring.one]


def test_basis_clifford2_values():
    ring = CLIFF2.ring
    eps = ring.zeta(4)
    third = ring.rational(1, 3)
    assert len(BASIS2) == 3
    lam = ring.monomial(2, ring.field.rational(3))  # 3 T^{1/3}
    g = ring.monomial(-4) * third  # (1/3) T^{-2/3}
    e_pow = ring.one
    for k in range(3):
        assert BASIS2.curvatures[k] == lam * e_pow
        assert BASIS2.gram[k][k] == g * e_pow
        e_pow = e_pow * eps
    for i in range(3):
        for j in range(3):
            if i != j:
                assert BASIS2.gram[i][j].is_zero()
    assert BASIS2.coords(BASIS2.omega) == [ring.one] * 3


def test_basis_coords_chain_roundtrip():
    ring = CLIFF2.ring
    vec = [ring.rational(3), ring.rational(-1, 2), ring.zeta(1)]
    assert BASIS2.coords(BASIS2.chain(vec)) == vec
    zero_vec = [ring.zero] * 3
    assert BASIS2.coords(BASIS2.chain(zero_vec)) == zero_vec


# --- grading operators ------------------------------------------------------

def test_grading_space_clifford1_golden():
    ring = CLIFF1.ring
    fam = grading_space(CLIFF1, basis=BASIS1)
    assert len(fam) == 1
    op = fam[0]
    assert op.mu == [[ring.zero, ring.one], [ring.one, ring.zero]]
    assert op.weight == ring.one
    assert check_grading(op, BASIS1)["ok"]


def test_grading_space_clifford2_dimension_and_membership():
    fam = grading_space(CLIFF2, basis=BASIS2)
    assert len(fam) == 2
    for op in fam:
        assert check_grading(op, BASIS2)["ok"]
    # the euler-powers member decomposes exactly over the family
    ep = grading_from_euler_powers(CLIFF2, basis=BASIS2)
    w0, w1 = fam[0].weight, fam[1].weight
    det = None
    # both members weight plus one independent entry pin the coefficients
    for i in range(3):
        for j in range(3):
            a, c = fam[0].mu[i][j], fam[1].mu[i][j]
            if (a * w1 - c * w0).is_zero():
                continue
            det = (a * w1 - c * w0).inverse()
            c0 = (ep.mu[i][j] * w1 - ep.weight * c) * det
            c1 = (ep.weight * a - ep.mu[i][j] * w0) * det
            break
        if det is not None:
            break
    assert det is not None
    for i in range(3):
        for j in range(3):
            got = fam[0].mu[i][j] * c0 + fam[1].mu[i][j] * c1
            assert got == ep.mu[i][j], (i, j)
    assert fam[0].weight * c0 + fam[1].weight * c1 == ep.weight


@pytest.mark.parametrize("rn,rd,xn,xd", CLIFF2_POINTS)
def test_grading_family_members_pass_checks(rn, rd, xn, xd):
    r, x = cliff2_point(rn, rd, xn, xd)
    op = GradingOperator(cliff2_family(r, x), r)
    assert check_grading(op, BASIS2) == {"ok": True, "failures": []}


def test_grading_space_empty_for_equal_curvatures():
    dbl = doubled_block_model()
    assert validate(dbl) == []
    assert grading_space(dbl) == []


def test_euler_powers_clifford1_golden():
    ring = CLIFF1.ring
    ep = grading_from_euler_powers(CLIFF1, basis=BASIS1)
    mh = ring.rational(-1, 2)
    assert ep.mu == [[ring.zero, mh], [mh, ring.zero]]
    assert ep.weight == mh
    assert check_grading(ep, BASIS1)["ok"]


def test_euler_powers_clifford2_golden():
    ring = CLIFF2.ring
    ep = grading_from_euler_powers(CLIFF2, basis=BASIS2)
    # a = -2/3 + z^2/3 and c = -1/3 - z^2/3 alternate around the cycle
    a = ring.rational(-2, 3) + ring.zeta(2) * ring.rational(1, 3)
    c = ring.rational(-1, 3) - ring.zeta(2) * ring.rational(1, 3)
    z = ring.zero
    assert ep.mu == [[z, a, c], [c, z, a], [a, c, z]]
    assert ep.weight == ring.rational(-1)
    # and it is the hand family at r = -1, x = 1/(eps - 1)
    r, x = cliff2_point(-1, 1, None, 1)
    assert ep.mu == cliff2_family(r, x)
    assert check_grading(ep, BASIS2)["ok"]


def test_euler_powers_degenerate_raises():
    with pytest.raises(SplittingError, match="curvature powers do not span"):
        grading_from_euler_powers(doubled_block_model())


# --- the matrix recursion ---------------------------------------------------

def euler_powers_matrix1():
    ring = CLIFF1.ring
    mh = ring.rational(-1, 2)
    return [[ring.zero, mh], [mh, ring.zero]]


def test_r_matrix_starts_at_identity():
    ring = CLIFF1.ring
    rms = r_matrix(euler_powers_matrix1(), BASIS1, 2)
    assert rms.R[0] == [[ring.one, ring.zero], [ring.zero, ring.one]]


def test_r_matrix_clifford1_golden():
    ring = CLIFF1.ring
    rms = r_matrix(euler_powers_matrix1(), BASIS1, 3)

    def mat(texp, q, p00, p01, p10, p11):
        m = ring.monomial(texp)
        return [
            [m * ring.rational(p00, q), m * ring.rational(p01, q)],
            [m * ring.rational(p10, q), m * ring.rational(p11, q)],
        ]

    assert rms.R[1] == mat(-2, 16, 1, -2, 2, -1)
    assert rms.R[2] == mat(-4, 512, -3, 12, 12, -3)
    assert rms.R[3] == mat(-6, 8192, 15, -90, 90, -15)


def test_r_matrix_symbolic_weight_golden():
    # over a formal weight r the entries close up: R_n carries the factor
    # 4^{-n} T^{-n/2} (r / (n-1)!) prod_{k<n} (r^2 - k^2), then the matrix
    # [[r/n, 1], [(-1)^n, (-1)^n r/n]]
    ring = CLIFF1.ring
    sr = SeriesRing(ring, ("r",), t_order=14, u_order=0, u_min=0)
    rv = sr.var("r")
    mu = [[sr.zero, rv], [rv, sr.zero]]
    rms = r_matrix(mu, BASIS1, 6)
    for n in range(1, 7):
        pref = sr.from_scalar(
            ring.monomial(-2 * n) * ring.rational(1, 4**n * factorial(n - 1))
        )
        poly = rv
        for k in range(1, n):
            poly = poly * (rv * rv - sr.from_scalar(ring.rational(k * k)))
        f = pref * poly
        rn = f * rv * sr.from_scalar(ring.rational(1, n))
        sgn = sr.from_scalar(ring.rational((-1) ** n))
        assert rms.R[n] == [[rn, f], [f * sgn, rn * sgn]], n
    # specializing the weight reproduces the concrete recursion
    mh = ring.rational(-1, 2)
    conc = r_matrix(euler_powers_matrix1(), BASIS1, 6)
    for n in range(7):
        for i in range(2):
            for j in range(2):
                assert series_eval(rms.R[n][i][j], mh) == conc.R[n][i][j]


def test_r_matrix_zero_grading_is_identity_series():
    ring = CLIFF2.ring
    z = ring.zero
    rms = r_matrix([[z] * 3 for _ in range(3)], BASIS2, 4)
    for n in range(1, 5):
        assert all(c.is_zero() for row in rms.R[n] for c in row)


def test_r_matrix_rejects_entries_over_equal_curvatures():
    ring = CLIFF1.ring
    mu = [[ring.one, ring.zero], [ring.zero, ring.zero]]
    with pytest.raises(SplittingError, match="ambiguous diagonal"):
        r_matrix(mu, BASIS1, 1)


def test_symplectic_identity_order8():
    rms = r_matrix(euler_powers_matrix1(), BASIS1, 8)
    assert check_symplectic(rms, BASIS1.gram) == {
        "ok": True,
        "order": 8,
        "failures": [],
    }


def test_symplectic_detects_corruption():
    ring = CLIFF1.ring
    rms = r_matrix(euler_powers_matrix1(), BASIS1, 4)
    from catprim.splitting import RMatrixSeries

    bad = [[list(row) for row in m] for m in rms.R]
    bad[2][0][1] = bad[2][0][1] + ring.one
    rep = check_symplectic(RMatrixSeries(bad, 4), BASIS1.gram)
    assert not rep["ok"]
    assert 2 in rep["failures"]


# --- the curvature-flat lift ------------------------------------------------

def test_semisimple_lift_clifford1_is_exact():
    assert SS1.kind == "semi-simple"
    assert SS1.flat_exact
    assert all(k.is_zero() for ks in SS1.certificates for k in ks)


@pytest.mark.parametrize("n", range(7))
def test_semisimple_lift_clifford1_coefficients(n):
    # class k, u-power n: the single word of 2n+1 generators with scalar
    # (-+)^... (2n-1)!! / 2^{n+1} times i T^{-(n+1)/2}; class 0 alternates
    # in sign with n, class 1 is negative throughout.
    ring = CLIFF1.ring
    df = double_factorial(2 * n - 1)
    base = ring.zeta(1) * ring.monomial(-2 * (n + 1)) * ring.rational(df, 2 ** (n + 1))
    word = (1,) * (2 * n + 1)
    ch0 = SS1.image[0].u_coefficient(n)
    ch1 = SS1.image[1].u_coefficient(n)
    assert ch0.terms == {(0, word): base * ring.rational((-1) ** n)}
    assert ch1.terms == {(1, word): -base}


def test_semisimple_lift_has_no_stray_orders():
    for img in SS1.image:
        assert sorted(img.coeffs) == list(range(7))
    for img in SS2.image:
        assert sorted(img.coeffs) == list(range(3))


@pytest.mark.parametrize("split", [SS1, SS2], ids=["cliff1", "cliff2"])
def test_flatness_identity_exact(split):
    # the raw scaled connection derivative of each lift collapses to its
    # curvature times the lift, shifted one pole step down
    cat = split.basis.cat
    for i, img in enumerate(split.image):
        lam = split.basis.curvatures[i]
        got = u_connection(img, mode="raw")
        want = NegCyclicElement(
            cat,
            img.max_length,
            {p - 2: ch.scale(lam) for p, ch in img.coeffs.items()},
            -2,
            img.u_order - 2,
        )
        assert got == want, i


def test_semisimple_lift_truncation_failure_is_loud():
    with pytest.raises(SplittingError, match="truncation too small"):
        semisimple_splitting(CLIFF1, u_order=3, max_length=3)


def test_solve_boundary_roundtrip_seeded():
    rng = random.Random(11)
    for cat in (CLIFF1, CLIFF2):
        ring = cat.ring
        for _ in range(20):
            bi = rng.randrange(len(cat.blocks))
            blk = cat.blocks[bi]
            terms = {}
            for _ in range(rng.randrange(1, 4)):
                head = rng.randrange(blk.dim)
                tail = tuple(
                    rng.choice(blk.reduced) for _ in range(rng.randrange(4))
                )
                terms[(bi, (head,) + tail)] = ring.rational(
                    rng.randrange(-4, 5) or 1, rng.randrange(1, 4)
                )
            rhs = b(Chain(cat, 6, terms))
            if rhs.is_zero():
                continue
            y = solve_boundary(cat, rhs)
            assert b(y) == rhs


# --- expansion in a lift basis ----------------------------------------------

def test_splitting_coordinates_delta_on_images():
    ring = CLIFF1.ring
    for i in (0, 1):
        coords = splitting_coordinates(SS1, SS1.image[i])
        for j in (0, 1):
            assert coords[j] == ({0: ring.one} if j == i else {})


def test_splitting_coordinates_linear_combination():
    ring = CLIFF1.ring
    c = ring.rational(5, 3)
    x = SS1.image[0] + SS1.image[1].scale(c)
    coords = splitting_coordinates(SS1, x)
    assert coords == [{0: ring.one}, {0: c}]


def test_splitting_coordinates_ignore_exact_shifts():
    # adding a full differential changes the element, not its expansion
    cat = CLIFF1
    ring = cat.ring
    img = SS1.image[0]
    w = Chain.from_word(cat, img.max_length, 0, (1, 1))
    cell = NegCyclicElement(
        cat, img.max_length, {0: w.scale(ring.rational(7))}, 0, img.u_order
    )
    shifted = img + cyclic_differential(cell)
    assert splitting_coordinates(SS1, shifted) == splitting_coordinates(SS1, img)


def test_splitting_coordinates_require_closed_input():
    cat = CLIFF1
    w = Chain.from_word(cat, 6, 0, (1, 1))
    x = NegCyclicElement(cat, 6, {0: w}, 0, 4)
    with pytest.raises(SplittingError, match="not closed"):
        splitting_coordinates(SS1, x)


# --- composed lifts and round trips -----------------------------------------

def test_round_trip_clifford1_euler_powers():
    ep = grading_from_euler_powers(CLIFF1, basis=BASIS1)
    sp = splitting_from_grading(ep, SS1)
    assert sp.kind == "from-grading"
    rep = check_splitting(sp)
    assert rep == {"ok": True, "failures": [], "weight": ep.weight}
    assert grading_from_splitting(sp) == ep


@pytest.mark.parametrize("rn,rd,xn,xd", CLIFF2_POINTS)
def test_round_trip_clifford2_family(rn, rd, xn, xd):
    r, x = cliff2_point(rn, rd, xn, xd)
    op = GradingOperator(cliff2_family(r, x), r)
    sp = splitting_from_grading(op, SS2)
    assert check_splitting(sp)["ok"]
    assert grading_from_splitting(sp) == op


def test_zero_grading_reproduces_the_flat_lift():
    ring = CLIFF1.ring
    z = ring.zero
    op = GradingOperator([[z, z], [z, z]], z)
    sp = splitting_from_grading(op, SS1)
    for i in (0, 1):
        assert sp.image[i] == SS1.image[i]
    assert grading_from_splitting(SS1) == op


def test_grading_extraction_chain_level_agrees():
    # strip the composed lift down to a bare user object: extraction must
    # walk the chains and still find the same operator
    ep = grading_from_euler_powers(CLIFF1, basis=BASIS1)
    sp = splitting_from_grading(ep, SS1)
    bare = Splitting(sp.basis, sp.u_order, sp.image, "user")
    assert grading_from_splitting(bare) == ep
    rep = check_splitting(bare)
    assert rep["ok"]
    assert rep["weight"] == ep.weight


def test_composed_lift_truncates_consistently():
    # a shorter composition window is the truncation of the longer one
    ep = grading_from_euler_powers(CLIFF1, basis=BASIS1)
    sp6 = splitting_from_grading(ep, SS1)
    sp3 = splitting_from_grading(ep, SS1, order=3)
    assert sp3.u_order == 3
    for i in (0, 1):
        for p in range(4):
            assert sp3.image[i].u_coefficient(p) == sp6.image[i].u_coefficient(p)
    assert grading_from_splitting(sp3) == ep


def test_check_splitting_flags_swapped_images():
    swapped = Splitting(BASIS1, SS1.u_order, [SS1.image[1], SS1.image[0]], "user")
    rep = check_splitting(swapped)
    assert not rep["ok"]
    kinds = {f["check"] for f in rep["failures"]}
    assert "projection" in kinds
    assert "pairing" in kinds
    assert "homogeneity" in kinds


def test_check_splitting_flags_rescaled_image():
    ring = CLIFF1.ring
    bad = Splitting(
        BASIS1,
        SS1.u_order,
        [SS1.image[0].scale(ring.rational(2)), SS1.image[1]],
        "user",
    )
    rep = check_splitting(bad)
    assert not rep["ok"]
    assert {"check": "projection", "class": 0} in rep["failures"]
    assert any(f["check"] == "pairing" for f in rep["failures"])
