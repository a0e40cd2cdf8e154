"""Splittings of the u-filtration on negative cyclic chains.

A splitting lifts each homology class to a closed truncated u-power
series of chains whose constant term represents the class.  The
distinguished lift built here is flat for the u-connection against the
block curvature, solved order by order with one exact boundary solve per
u-power.  Grading operators on the class basis parametrize every other
good lift through a matrix recursion, also solved order by order.
"""

from ._linalg import (
    InconsistentSystemError,
    PivotError,
    identity_matrix,
    mat_add,
    mat_inverse,
    mat_mul,
    mat_scale,
    mat_sub,
    mat_transpose,
    mat_vec,
    solve_columns,
)
from .hochschild import (
    Chain,
    NegCyclicElement,
    _apply_contraction,
    _block_contraction,
    _iter_block_words,
    _structure_tail_is_zero,
    b,
    cap_B,
    cap_b,
    check_M_vanishing,
    connes_B,
    cup,
    cyclic_differential,
    duality_D,
    euler_cochain,
    homology,
    hres,
    idempotent_cochain,
    length_operator,
    mukai,
    structure_cochain,
    u_connection,
    unit_cochain,
    zero_chain,
)

__all__ = [
    "GradingOperator",
    "HodgeBasis",
    "RMatrixSeries",
    "Splitting",
    "SplittingError",
    "check_grading",
    "check_splitting",
    "check_symplectic",
    "grading_from_euler_powers",
    "grading_from_splitting",
    "grading_space",
    "hodge_basis",
    "r_matrix",
    "semisimple_splitting",
    "solve_boundary",
    "splitting_coordinates",
    "splitting_from_grading",
]


class SplittingError(ArithmeticError):
    """A splitting-level solve failed or a certificate did not hold."""


def _madd(acc, key, val):
    cur = acc.get(key)
    if cur is None:
        acc[key] = val
        return
    s = cur + val
    if s.is_zero():
        del acc[key]
    else:
        acc[key] = s


def _rebound(el, u_min, u_order):
    """Same coefficients under new u-bounds (top overflow drops)."""
    return NegCyclicElement(el.cat, el.max_length, dict(el.coeffs), u_min, u_order)


def _zero_element(cat, max_length, u_order):
    return NegCyclicElement(cat, max_length, {}, 0, u_order)


# ---------------------------------------------------------------------------
# boundary solving

_DENSE_WORD_CAP = 60000


def _stratum_zero_solve(cat, bi, rows, L):
    """Preimage of a length-zero residue over the length-one words."""
    blk = cat.blocks[bi]
    columns = {}
    for w in _iter_block_words(blk, 1, 1):
        col = b(Chain.from_word(cat, L, bi, w)).terms
        if col:
            columns[w] = {wk: c for (_, wk), c in col.items()}
    try:
        sol, _ = solve_columns(columns, rows, cat.ring.one)
    except InconsistentSystemError as exc:
        raise SplittingError(
            f"length-zero residue in block {bi} is not a boundary: {exc}"
        ) from exc
    return Chain(cat, L, {(bi, w): c for w, c in sol.items()}, _checked=True)


def _contraction_solve(cat, bi, part, L):
    """Preimage through the verified insertion homotopy, or None.

    The homotopy inverts b away from word length zero; the length-zero
    rows go through a small echelon solve.  The caller re-checks the
    candidate, so a block where the homotopy exists but the splice does
    not land on part (mixed-arity differentials) simply falls through."""
    data = _block_contraction(cat, bi, L)
    if data is None:
        return None
    sig, eterms = data
    acc = {}
    zero_rows = {}
    for w, c in part.items():
        if len(w) == 1:
            zero_rows[w] = c
            continue
        for w2, c2 in _apply_contraction(cat, bi, sig, eterms, w).items():
            _madd(acc, (bi, w2), c2 * c)
    y = Chain(cat, L, acc, _checked=True)
    if zero_rows:
        y = y + _stratum_zero_solve(cat, bi, zero_rows, L)
    return y


def _dense_solve(cat, bi, part, L):
    blk = cat.blocks[bi]
    red = len(blk.reduced)
    count = sum(blk.dim * (red ** r) for r in range(L + 1))
    if count > _DENSE_WORD_CAP:
        raise SplittingError(
            f"block {bi} has no verified homotopy and {count} candidate words "
            f"exceed the dense solve cap"
        )
    columns = {}
    for w in _iter_block_words(blk, 0, L):
        col = b(Chain.from_word(cat, L, bi, w)).terms
        if col:
            columns[w] = {wk: c for (_, wk), c in col.items()}
    try:
        sol, _ = solve_columns(columns, part, cat.ring.one)
    except InconsistentSystemError as exc:
        raise SplittingError(f"not a boundary in block {bi}: {exc}") from exc
    return Chain(cat, L, {(bi, w): c for w, c in sol.items()}, _checked=True)


def solve_boundary(cat, rho):
    """One exact preimage of rho under b inside the truncated complex.

    Works block by block: the insertion homotopy answers instantly where
    it is available and correct (re-checked against rho, never trusted),
    the dense echelon solve covers the rest.  Raises SplittingError when
    rho is not a boundary within the word-length window.
    """
    L = rho.max_length
    if rho.is_zero():
        return zero_chain(cat, L)
    by_block = {}
    for (bi, w), c in rho.terms.items():
        by_block.setdefault(bi, {})[w] = c
    total = zero_chain(cat, L)
    for bi in sorted(by_block):
        part = by_block[bi]
        y = _contraction_solve(cat, bi, part, L)
        if y is not None:
            got = {w: c for (_, w), c in b(y).terms.items()}
            if got != part:
                y = None
        if y is None:
            y = _dense_solve(cat, bi, part, L)
        total = total + y
    return total


# ---------------------------------------------------------------------------
# the class basis

class HodgeBasis:
    """Ordered basis of homology classes with pairing and curvature data.

    classes holds the duality image of each block idempotent; gram is
    their pairwise trace pairing; xi the diagonal matrix of block
    curvatures.  Pairs of equal curvature values form the grouped
    diagonal that grading operators must annihilate.  omega, the class
    of the unit, is the all-ones coordinate vector in this basis.
    """

    def __init__(self, cat, hom, dmap, classes, curvatures):
        self.cat = cat
        self.hom = hom
        self.dmap = dmap
        self.classes = classes
        self.curvatures = curvatures
        self.gram = [[mukai(x, y) for y in classes] for x in classes]
        n = len(classes)
        zero = cat.ring.zero
        self.xi = [
            [curvatures[i] if i == j else zero for j in range(n)] for i in range(n)
        ]
        self.omega = dmap.omega
        self._cols = {}
        for j, cls in enumerate(classes):
            col = hom.project(cls)
            if not col:
                raise SplittingError(f"class {j} projects to zero")
            self._cols[j] = col

    def __len__(self):
        return len(self.classes)

    def coords(self, chain):
        """Coordinates of a cycle's class, as a dense scalar list."""
        ring = self.cat.ring
        proj = self.hom.project(chain)
        proj = {k: c for k, c in proj.items() if not c.is_zero()}
        if not proj:
            return [ring.zero] * len(self.classes)
        try:
            sol, _ = solve_columns(self._cols, proj, ring.one)
        except InconsistentSystemError as exc:
            raise SplittingError(f"class outside the basis span: {exc}") from exc
        return [sol.get(j, ring.zero) for j in range(len(self.classes))]

    def chain(self, coords):
        out = zero_chain(self.cat, self.hom.max_length)
        for j, c in enumerate(coords):
            if not c.is_zero():
                out = out + self.classes[j].scale(c)
        return out

    def __repr__(self):
        return f"HodgeBasis({len(self.classes)} classes)"


def hodge_basis(cat, hom=None, max_length=None):
    """The default class basis: one duality image per block idempotent."""
    if hom is None:
        hom = homology(cat, max_length or 2 * len(cat.blocks))
    if hom.rank != len(cat.blocks):
        raise SplittingError(
            f"expected one class per block, got rank {hom.rank} "
            f"over {len(cat.blocks)} blocks"
        )
    dmap = duality_D(cat, hom)
    classes = [dmap(idempotent_cochain(cat, k)) for k in range(len(cat.blocks))]
    curvatures = [blk.curvature for blk in cat.blocks]
    return HodgeBasis(cat, hom, dmap, classes, curvatures)


# ---------------------------------------------------------------------------
# grading operators

class GradingOperator:
    """Square scalar matrix on the class basis with the weight it gives
    the unit class."""

    __slots__ = ("mu", "weight")

    def __init__(self, mu, weight):
        self.mu = [list(row) for row in mu]
        self.weight = weight

    def __eq__(self, other):
        return (
            isinstance(other, GradingOperator)
            and self.mu == other.mu
            and self.weight == other.weight
        )

    def __repr__(self):
        return f"GradingOperator({len(self.mu)}x{len(self.mu)}, weight={self.weight})"


def check_grading(op, basis):
    """Anti-symmetry against the gram matrix, vanishing on equal-curvature
    pairs, and the unit class as a weight eigenvector."""
    ring = basis.cat.ring
    zero = ring.zero
    mu = op.mu
    n = len(basis.classes)
    failures = []
    skew = mat_add(
        mat_mul(mat_transpose(mu), basis.gram, zero),
        mat_mul(basis.gram, mu, zero),
    )
    for i in range(n):
        for j in range(i, n):
            if not skew[i][j].is_zero():
                failures.append({"check": "gram-antisymmetry", "entry": (i, j)})
    for i in range(n):
        for j in range(n):
            if basis.curvatures[i] == basis.curvatures[j] and not mu[i][j].is_zero():
                failures.append({"check": "grouped-diagonal", "entry": (i, j)})
    w = basis.coords(basis.omega)
    v = mat_vec(mu, w, zero)
    for i in range(n):
        if v[i] != op.weight * w[i]:
            failures.append({"check": "unit-class-eigenvector", "entry": i})
            break
    return {"ok": not failures, "failures": failures}


def grading_space(cat, basis=None, hom=None, max_length=None):
    """Basis of the solution space of the grading constraints.

    Unknowns are the matrix entries off the grouped diagonal plus the
    weight; all three conditions are linear in them, so the family is the
    span of the returned operators (zero always belongs).
    """
    if basis is None:
        basis = hodge_basis(cat, hom=hom, max_length=max_length)
    ring = basis.cat.ring
    zero = ring.zero
    n = len(basis.classes)
    G = basis.gram
    w = basis.coords(basis.omega)
    unknowns = [
        ("m", i, j)
        for i in range(n)
        for j in range(n)
        if basis.curvatures[i] != basis.curvatures[j]
    ]
    unknowns.append(("r",))
    columns = {}
    for key in unknowns:
        rows = {}
        if key[0] == "m":
            i, j = key[1], key[2]
            elem = [[zero] * n for _ in range(n)]
            elem[i][j] = ring.one
            skew = mat_add(
                mat_mul(mat_transpose(elem), G, zero), mat_mul(G, elem, zero)
            )
            for k in range(n):
                for l in range(k, n):
                    if not skew[k][l].is_zero():
                        rows[("a", k, l)] = skew[k][l]
            if not w[j].is_zero():
                rows[("c", i)] = w[j]
        else:
            for k in range(n):
                if not w[k].is_zero():
                    rows[("c", k)] = -w[k]
        columns[key] = rows
    _, null = solve_columns(columns, {}, ring.one, want_nullspace=True)
    out = []
    for vec in null:
        mu = [[zero] * n for _ in range(n)]
        for key, c in vec.items():
            if key[0] == "m":
                mu[key[1]][key[2]] = c
        out.append(GradingOperator(mu, vec.get(("r",), zero)))
    return out


def grading_from_euler_powers(cat, basis=None, hom=None, max_length=None):
    """Grading diagonalized by the cap images of cup powers of the
    curvature cochain.

    The m-th power class gets eigenvalue m - (n-1)/2 for n classes, so
    the unit class (the zeroth power) carries weight -(n-1)/2; the change
    of basis is one exact matrix inversion.
    """
    if basis is None:
        basis = hodge_basis(cat, hom=hom, max_length=max_length)
    ring = basis.cat.ring
    zero = ring.zero
    n = len(basis.classes)
    phi = unit_cochain(cat)
    E = euler_cochain(cat)
    power_coords = []
    for m in range(n):
        if m:
            phi = cup(phi, E)
        power_coords.append(basis.coords(basis.dmap(phi)))
    V = [[power_coords[m][k] for m in range(n)] for k in range(n)]
    try:
        W = mat_inverse(V, ring.one, zero)
    except PivotError as exc:
        raise SplittingError(
            f"curvature powers do not span the class basis: {exc}"
        ) from exc
    D = [
        [ring.rational(2 * m - (n - 1), 2) if m == k else zero for k in range(n)]
        for m in range(n)
    ]
    mu = mat_mul(mat_mul(V, D, zero), W, zero)
    return GradingOperator(mu, ring.rational(-(n - 1), 2))


# ---------------------------------------------------------------------------
# the matrix recursion

class RMatrixSeries:
    """Matrices R_0 = id, R_1, ..., R_order of one grading's recursion."""

    __slots__ = ("R", "order")

    def __init__(self, R, order):
        self.R = R
        self.order = order

    def __repr__(self):
        return f"RMatrixSeries(order={self.order}, size={len(self.R[0])})"


def _like_ring(sample):
    return sample.ring


def _lift_like(c, sample):
    if type(c) is type(sample):
        return c
    return sample.ring.from_scalar(c)


def _frac_like(p, q, sample):
    ring = sample.ring
    if hasattr(ring, "rational"):
        return ring.rational(p, q)
    return ring.from_scalar(ring.scalars.rational(p, q))


def r_matrix(mu, basis, order):
    """Solve the staircase recursion of a grading to the given order.

    Entries over distinct curvature values come from the commutator
    equation by exact division; entries over equal values from the next
    order's averaging identity, which is well-posed precisely because a
    grading vanishes there (violations raise "ambiguous diagonal").
    Entry arithmetic follows mu's element type, so a matrix of truncated
    series in a formal weight variable works unchanged.
    """
    mat = mu.mu if isinstance(mu, GradingOperator) else [list(r) for r in mu]
    n = len(mat)
    sample = None
    for row in mat:
        for c in row:
            sample = c
            break
        break
    one = _like_ring(sample).one
    zero = _like_ring(sample).zero
    curv = basis.curvatures
    same = [[curv[i] == curv[j] for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if same[i][j] and not mat[i][j].is_zero():
                raise SplittingError(
                    f"ambiguous diagonal: entry ({i}, {j}) sits over equal "
                    f"curvatures and must vanish"
                )
    inv_diff = {}
    for i in range(n):
        for j in range(n):
            if not same[i][j]:
                inv_diff[(i, j)] = _lift_like((curv[i] - curv[j]).inverse(), sample)
    Rs = [identity_matrix(n, one, zero)]
    for k in range(order):
        Rk = Rs[-1]
        nxt = [[zero] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                if same[i][j]:
                    continue
                s = zero
                for l in range(n):
                    s = s + Rk[i][l] * mat[l][j]
                if k:
                    s = s - Rk[i][j] * _frac_like(k, 1, sample)
                nxt[i][j] = inv_diff[(i, j)] * s
        for i in range(n):
            for j in range(n):
                if not same[i][j]:
                    continue
                s = zero
                for l in range(n):
                    if same[l][j]:
                        continue
                    s = s + nxt[i][l] * mat[l][j]
                nxt[i][j] = s * _frac_like(1, k + 1, sample)
        Rs.append(nxt)
    return RMatrixSeries(Rs, order)


def check_symplectic(rms, gram):
    """The gram-adjoint alternating convolution of the matrix series must
    vanish at every positive order; failures list the bad orders."""
    Rs = rms.R
    sample = Rs[0][0][0]
    one = _like_ring(sample).one
    zero = _like_ring(sample).zero
    n = len(Rs[0])
    G = [[_lift_like(c, sample) for c in row] for row in gram]
    Ginv = mat_inverse(G, one, zero)
    failures = []
    for m in range(1, rms.order + 1):
        P = [[zero] * n for _ in range(n)]
        for j in range(m + 1):
            adj = mat_mul(mat_mul(Ginv, mat_transpose(Rs[j]), zero), G, zero)
            term = mat_mul(adj, Rs[m - j], zero)
            if j & 1:
                term = [[-x for x in row] for row in term]
            P = mat_add(P, term)
        if any(not x.is_zero() for row in P for x in row):
            failures.append(m)
    return {"ok": not failures, "order": rms.order, "failures": failures}


# ---------------------------------------------------------------------------
# splittings

class Splitting:
    """Closed u-series lifts of the class basis.

    image[k] lifts classes[k] with u-powers 0..u_order; kind tags the
    provenance ("semi-simple", "from-grading", "user").  certificates,
    when present, hold the boundary preimages witnessing each order of
    the flatness equation (all zero on the shipped fixtures);
    flat_exact records that every certificate vanished, so the lift
    satisfies the curvature-flat equation on the nose and operations on
    anything combined from it may run on coordinates instead of chains.
    base and rmatrix tie a composed lift back to the flat one it was
    built from.
    """

    __slots__ = (
        "basis", "u_order", "image", "kind", "certificates",
        "flat_exact", "base", "rmatrix",
    )

    def __init__(self, basis, u_order, image, kind, certificates=None,
                 flat_exact=False, base=None, rmatrix=None):
        self.basis = basis
        self.u_order = u_order
        self.image = image
        self.kind = kind
        self.certificates = certificates
        self.flat_exact = flat_exact
        self.base = base
        self.rmatrix = rmatrix

    def apply_coords(self, coords):
        acc = None
        for j, c in enumerate(coords):
            if c.is_zero():
                continue
            t = self.image[j].scale(c)
            acc = t if acc is None else acc + t
        if acc is None:
            img = self.image[0]
            return _zero_element(img.cat, img.max_length, self.u_order + 1)
        return acc

    def apply(self, chain):
        return self.apply_coords(self.basis.coords(chain))

    def __repr__(self):
        return (
            f"Splitting(kind={self.kind!r}, classes={len(self.image)}, "
            f"u_order={self.u_order})"
        )


def semisimple_splitting(cat, u_order=6, max_length=None, hom=None, basis=None):
    """Curvature-flat lift of every basis class, one boundary solve per
    u-order.

    Each order's coefficient is the homotopy preimage of the rotation
    differential of the previous one; the flatness defect of the result
    is then re-computed exactly, harmonic drift is removed through the
    class equation, and whatever exact remainder survives is certified by
    its own boundary preimage.  On the shipped fixtures every defect is
    zero on the nose, and the returned object records the certificates so
    that claim stays checkable.
    """
    L = max_length if max_length is not None else 2 * u_order + 2
    if basis is None:
        if hom is None:
            hom = homology(cat, L)
        basis = hodge_basis(cat, hom=hom)
    hom = basis.hom
    residue = check_M_vanishing(cat, hom=hom)
    if not residue["ok"]:
        raise SplittingError(
            f"homology-level residue obstruction: {residue['failures'][:3]!r}"
        )
    ring = cat.ring
    half = ring.rational(1, 2)
    prime = structure_cochain(cat, lambda k: 2 - k)
    # With no operations above arity two the reweighted structure is twice
    # the curvature term alone: its inner insertion multiplies each head by
    # the block curvature and its outer insertion parks a unit in a reduced
    # tail slot and dies.  Both contractions are then known without being
    # computed; anything with a structure tail takes the full path.
    pure_binary = _structure_tail_is_zero(cat)

    def eigen_defect(ch, lam):
        if pure_binary:
            return zero_chain(cat, ch.max_length)
        return cap_b(prime, ch).scale(half) - ch.scale(lam)

    def flat_source(ch, n):
        out = length_operator(ch).scale(half)
        if not pure_binary:
            out = out + cap_B(prime, ch).scale(half)
        if n:
            out = out + ch.scale_int(n)
        return out

    # harmonic correction data, per homology rep
    reps_L = [Chain(cat, L, r.terms, _checked=True) for r in hom.reps]
    rep_block = [next(iter(r.terms))[0] for r in reps_L]
    rep_ok = []
    rep_aux = []
    for j, r in enumerate(reps_L):
        lam = cat.blocks[rep_block[j]].curvature
        ok = b(r).is_zero() and eigen_defect(r, lam).is_zero()
        aux = flat_source(r, 0)
        if ok and not b(aux).is_zero():
            ok = False
        rep_ok.append(ok)
        rep_aux.append((aux, hom.project(aux)) if ok else None)

    def remove_drift(idx, block, n, y, rho):
        cls = {k: c for k, c in hom.project(rho).items() if not c.is_zero()}
        if not cls:
            return y, rho
        cols = {}
        for j in range(len(reps_L)):
            if rep_block[j] != block or not rep_ok[j]:
                continue
            col = dict(rep_aux[j][1])
            _madd(col, j, ring.rational(n))
            cols[j] = {k: c for k, c in col.items() if not c.is_zero()}
        try:
            sol, _ = solve_columns(cols, {k: -c for k, c in cls.items()}, ring.one)
        except InconsistentSystemError as exc:
            raise SplittingError(
                f"flatness class obstruction at u-order {n} of class {idx}: {exc}"
            ) from exc
        for j, c in sol.items():
            if c.is_zero():
                continue
            y = y + reps_L[j].scale(c)
            rho = rho + rep_aux[j][0].scale(c) + reps_L[j].scale(c).scale_int(n)
        return y, rho

    def certificate(rho, n, idx):
        if rho.is_zero():
            return zero_chain(cat, L)
        if not b(rho).is_zero():
            raise SplittingError(
                f"flatness source is not a cycle at u-order {n} of class {idx}"
            )
        try:
            return solve_boundary(cat, rho)
        except SplittingError as exc:
            raise SplittingError(
                f"flatness source is not exact at u-order {n} of class {idx}: {exc}"
            ) from exc

    images = []
    certificates = []
    for idx, theta in enumerate(basis.classes):
        lam = basis.curvatures[idx]
        block = next(iter(theta.terms))[0]
        x = Chain(cat, L, theta.terms, _checked=True)
        if not b(x).is_zero():
            raise SplittingError(f"class {idx} representative is not a cycle")
        full = cap_b(prime, x).scale(half) - x.scale(lam)
        if not full.is_zero() or (pure_binary and not cap_B(prime, x).is_zero()):
            raise SplittingError(
                f"curvature contraction is not scalar on class {idx}"
            )
        xs = [x]
        kappas = [certificate(flat_source(x, 0), 0, idx)]
        for n in range(1, u_order + 1):
            try:
                y = solve_boundary(cat, -connes_B(xs[-1]))
            except SplittingError as exc:
                raise SplittingError(
                    f"truncation too small: boundary solve failed at u-order {n} "
                    f"(max_length={L}): {exc}"
                ) from exc
            if not eigen_defect(y, lam).is_zero():
                raise SplittingError(
                    f"curvature contraction drifts at u-order {n} of class {idx}"
                )
            rho = flat_source(y, n) - connes_B(kappas[-1])
            y, rho = remove_drift(idx, block, n, y, rho)
            kappas.append(certificate(rho, n, idx))
            xs.append(y)
        images.append(
            NegCyclicElement(cat, L, dict(enumerate(xs)), 0, u_order + 1)
        )
        certificates.append(kappas)
    exact = all(k.is_zero() for ks in certificates for k in ks)
    return Splitting(
        basis, u_order, images, "semi-simple", certificates, flat_exact=exact
    )


def splitting_coordinates(split, x, up_to=None):
    """Expand a closed truncated element in a splitting's image basis.

    Returns one {u-exponent: scalar} dict per class such that x equals
    the u-weighted combination of the images plus an exact remainder,
    with every u-coefficient below the window consumed.  Raises when x
    is not closed or escapes the span within the window.
    """
    basis = split.basis
    cat = basis.cat
    window = x.u_order if up_to is None else min(up_to, x.u_order)
    diff = cyclic_differential(x)
    for p in diff.sorted_exponents():
        if p < window:
            raise SplittingError(f"element is not closed at u-order {p}")
    work = {p: ch for p, ch in x.coeffs.items() if p < window}
    out = [dict() for _ in basis.classes]
    while work:
        p = min(work)
        residue = work.pop(p)
        if residue.is_zero():
            continue
        coords = basis.coords(residue)
        for j, c in enumerate(coords):
            if c.is_zero():
                continue
            out[j][p] = c
            for q, ch in split.image[j].coeffs.items():
                if q == 0:
                    residue = residue - ch.scale(c)
                elif p + q < window:
                    cur = work.get(p + q)
                    sub = ch.scale(c)
                    work[p + q] = (cur - sub) if cur is not None else -sub
        if residue.is_zero():
            continue
        try:
            z = solve_boundary(cat, residue)
        except SplittingError as exc:
            raise SplittingError(
                f"element escapes the splitting span at u-order {p}: {exc}"
            ) from exc
        nxt = connes_B(z)
        if nxt and p + 1 < window:
            cur = work.get(p + 1)
            work[p + 1] = (cur - nxt) if cur is not None else -nxt
    return out


def splitting_from_grading(mu, s_ss, order=None):
    """Compose a lift with the matrix series of a grading: each class's
    new lift is the u-weighted combination of the base lift along R."""
    basis = s_ss.basis
    cat = basis.cat
    n = len(basis.classes)
    N = s_ss.u_order if order is None else min(order, s_ss.u_order)
    rms = r_matrix(mu, basis, N)
    max_length = s_ss.image[0].max_length
    images = []
    for i in range(n):
        per_exp = {}
        for k, Rk in enumerate(rms.R):
            for j in range(n):
                c = Rk[j][i]
                if c.is_zero():
                    continue
                for q, ch in s_ss.image[j].coeffs.items():
                    if k + q > N:
                        continue
                    acc = per_exp.setdefault(k + q, {})
                    for key, val in ch.terms.items():
                        _madd(acc, key, val * c)
        coeffs = {
            p: Chain(cat, max_length, terms, _checked=True)
            for p, terms in per_exp.items()
        }
        images.append(NegCyclicElement(cat, max_length, coeffs, 0, N + 1))
    return Splitting(basis, N, images, "from-grading", base=s_ss, rmatrix=rms)


def _weight_from_mu(basis, mu):
    ring = basis.cat.ring
    zero = ring.zero
    n = len(basis.classes)
    w = basis.coords(basis.omega)
    v = mat_vec(mu, w, zero)
    weight = None
    for k in range(n):
        if not w[k].is_zero():
            weight = v[k] * w[k].inverse()
            break
    if weight is None:
        raise SplittingError("unit class has no coordinates in the basis")
    for k in range(n):
        if v[k] != weight * w[k]:
            raise SplittingError(
                "unit class is not an eigenvector of the extracted grading"
            )
    return weight


def _grading_matrix_path(split):
    """Backward map on coordinates: with the base lift exactly flat, the
    scaled connection derivative of the composed lift expands through the
    matrix series alone, one triangular solve per u-order."""
    basis = split.basis
    ring = basis.cat.ring
    zero = ring.zero
    Rs = split.rmatrix.R
    order = split.rmatrix.order
    xi = basis.xi
    C = {}
    for P in range(-1, order):
        rhs = mat_mul(xi, Rs[P + 1], zero)
        if P > 0:
            rhs = mat_add(rhs, mat_scale(Rs[P], ring.rational(P)))
        for m in range(-1, P):
            rhs = mat_sub(rhs, mat_mul(Rs[P - m], C[m], zero))
        C[P] = rhs
    for P in range(1, order):
        if any(not c.is_zero() for row in C[P] for c in row):
            raise SplittingError(
                f"connection image escapes the window at u-order {P}; "
                f"the lift fails homogeneity"
            )
    mu = C[0]
    return GradingOperator(mu, _weight_from_mu(basis, mu))


def grading_from_splitting(split):
    """Read the grading off a lift: expand its scaled connection
    derivative in the lift's own basis; the constant coefficients form
    the matrix, the pole coefficients must reproduce the curvatures, and
    anything else means the lift fails homogeneity.

    An exactly flat lift is its own certificate for the zero grading; a
    lift composed from one runs on coordinates through the matrix series;
    anything else takes the chain-level expansion."""
    basis = split.basis
    ring = basis.cat.ring
    zero = ring.zero
    n = len(basis.classes)
    if split.flat_exact:
        return GradingOperator([[zero] * n for _ in range(n)], ring.zero)
    if (
        split.base is not None
        and split.base.flat_exact
        and split.rmatrix is not None
    ):
        return _grading_matrix_path(split)
    window = split.u_order
    mu = [[zero] * n for _ in range(n)]
    for i in range(n):
        nab = u_connection(split.image[i], mode="raw")
        nab = _rebound(nab, nab.u_min, nab.u_order + 1).shift_u(1)
        coeffs = splitting_coordinates(split, nab, up_to=window)
        for j, table in enumerate(coeffs):
            for p, c in table.items():
                if c.is_zero():
                    continue
                if p == 0:
                    mu[j][i] = c
                elif p == -1:
                    if j != i or c != basis.curvatures[i]:
                        raise SplittingError(
                            f"pole part of class {i} is not its curvature; "
                            f"the lift is not homogeneous"
                        )
                else:
                    raise SplittingError(
                        f"connection image of class {i} escapes the window at "
                        f"u-order {p}; the lift fails homogeneity"
                    )
    return GradingOperator(mu, _weight_from_mu(basis, mu))


def check_splitting(split, series_ring=None):
    """All four lift conditions: leading term, pairing flatness,
    homogeneity of the connection derivative, and the unit-class weight.
    Returns {"ok", "failures", "weight"}.

    The pairing is compared only through the splitting's own u-order;
    higher coefficients of the residue pairing depend on dropped terms
    of the lift and carry no information (a caller-provided series ring
    sets its own window the same way)."""
    from .scalars import SeriesRing

    basis = split.basis
    cat = basis.cat
    ring = cat.ring
    n = len(basis.classes)
    failures = []
    # a composition of an exactly flat lift with a matrix series is closed
    # term by term because every base coefficient already satisfied the
    # verified boundary equations; only free-standing lifts need the sweep
    inherited = (
        split.base is not None
        and split.base.flat_exact
        and split.rmatrix is not None
    )
    for i, img in enumerate(split.image):
        if not (inherited or split.flat_exact) and not cyclic_differential(
            img
        ).is_zero():
            failures.append({"check": "closed", "class": i})
        coords = basis.coords(img.u_coefficient(0))
        want = [ring.one if j == i else ring.zero for j in range(n)]
        if coords != want:
            failures.append({"check": "projection", "class": i})
    sr = series_ring or SeriesRing(ring, (), 0, split.u_order, 0)
    for i in range(n):
        for j in range(i, n):
            val = hres(split.image[i], split.image[j], sr)
            if val != sr.from_scalar(basis.gram[i][j]):
                failures.append({"check": "pairing", "pair": (i, j)})
    weight = None
    try:
        op = grading_from_splitting(split)
        weight = op.weight
        rep = check_grading(op, basis)
        if not rep["ok"]:
            failures.append({"check": "grading", "failures": rep["failures"]})
    except SplittingError as exc:
        failures.append({"check": "homogeneity", "error": str(exc)})
    return {"ok": not failures, "failures": failures, "weight": weight}
