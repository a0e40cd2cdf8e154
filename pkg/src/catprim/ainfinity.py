"""Cyclic A-infinity algebras and categories.

A category here is an orthogonal direct sum of Z/2-graded, strictly unital,
weakly curved (m_0 = lambda * unit), finite-dimensional cyclic A-infinity
algebras, one block per object.  Everything downstream (Hochschild chains,
pairings, splittings) splits over blocks, so blocks never interact except
through shared scalars.

Conventions, fixed here once and checked by `validate`:
  - shifted parity |a|' = |a| + 1 mod 2;
  - strict unit: m_2(1,a) = a, m_2(a,1) = (-1)^{|a|} a, all other insertions
    of the unit give 0;
  - cyclic symmetry <m_k(a_0..a_{k-1}), a_k> = (-1)^{heart} <m_k(a_1..a_k), a_0>
    with heart = |a_0|'(|a_1|'+...+|a_k|');
  - pairing symmetry <a,b> = -(-1)^{|a|'|b|'} <b,a>.  The last sign is the
    one compatible with non-degeneracy on the Clifford fixtures; the
    plus-sign variant forces the pairing to vanish identically there.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import _linalg
from .scalars import CycloField, ScalarRing


def shifted(parity):
    return (parity + 1) % 2


class Block:
    """One object's endomorphism algebra: basis data plus sparse tensors.

    ops[k] maps a k-tuple of non-unit basis indices to a sparse output
    vector {index: scalar}.  Unit-containing inputs are never stored; they
    are produced by the strict-unit rule in `apply_m`.
    """

    def __init__(self, degrees, unit, curvature, ops, pairing):
        self.degrees = tuple(degrees)
        self.unit = unit
        self.curvature = curvature
        self.ops = ops
        self.pairing = pairing  # dict (i,j) -> scalar
        self.dim = len(self.degrees)
        self.reduced = tuple(i for i in range(self.dim) if i != unit)

    def deg(self, i):
        return self.degrees[i]


class CyclicAInfCategory:
    def __init__(self, ring, blocks, parity, max_arity=2, labels=None):
        self.ring = ring
        self.blocks = list(blocks)
        self.parity = parity  # pairing parity d
        self.max_arity = max_arity
        self.labels = labels or [f"block{i}" for i in range(len(self.blocks))]

    # basis bookkeeping; a basis id is the pair (block index, element index)

    def basis(self):
        for b, blk in enumerate(self.blocks):
            for i in range(blk.dim):
                yield (b, i)

    def deg(self, b, i):
        return self.blocks[b].degrees[i]

    def degp(self, b, i):
        return shifted(self.blocks[b].degrees[i])

    def unit_vector(self, b):
        return {self.blocks[b].unit: self.ring.one}

    def apply_m(self, b, args):
        """m_k on a tuple of basis indices of block b, as a sparse vector.

        Handles unit inputs by the strict-unit rule; k = 0 is the curvature
        m_0 = lambda * unit.
        """
        blk = self.blocks[b]
        k = len(args)
        if k == 0:
            lam = blk.curvature
            if lam.is_zero():
                return {}
            return {blk.unit: lam}
        unit_positions = [p for p, i in enumerate(args) if i == blk.unit]
        if unit_positions:
            if k != 2:
                return {}
            if args[0] == blk.unit:
                return {args[1]: self.ring.one}
            # m_2(a, 1) = (-1)^{|a|} a
            if blk.degrees[args[0]] % 2 == 0:
                return {args[0]: self.ring.one}
            return {args[0]: -self.ring.one}
        table = blk.ops.get(k)
        if not table:
            return {}
        return table.get(args, {})

    def apply_m_vectors(self, b, arg_vectors):
        """Multilinear extension of apply_m to sparse vectors."""
        out = {}
        # expand the product of supports depth-first
        def rec(pos, idxs, coeff):
            if pos == len(arg_vectors):
                img = self.apply_m(b, tuple(idxs))
                for i, c in img.items():
                    p = coeff * c
                    if not p:
                        continue
                    if i in out:
                        s = out[i] + p
                        if s.is_zero():
                            del out[i]
                        else:
                            out[i] = s
                    else:
                        out[i] = p
                return
            for i, c in arg_vectors[pos].items():
                rec(pos + 1, idxs + [i], coeff * c)

        rec(0, [], self.ring.one)
        return out

    def pair(self, b, i, j):
        return self.blocks[b].pairing.get((i, j), self.ring.zero)

    def pair_vectors(self, b, x, y):
        s = self.ring.zero
        for i, ci in x.items():
            for j, cj in y.items():
                p = self.pair(b, i, j)
                if p:
                    s = s + ci * cj * p
        return s

    def product(self, b, i, j):
        """Sign-twisted associative product a*b = (-1)^{|a|} m_2(a,b)."""
        img = self.apply_m(b, (i, j))
        if self.deg(b, i) % 2 == 0:
            return img
        return {k: -c for k, c in img.items()}

    def gram(self, b):
        blk = self.blocks[b]
        return [
            [self.pair(b, i, j) for j in range(blk.dim)] for i in range(blk.dim)
        ]


def _ainf_relation(cat, b, args):
    """Sum over splittings of the curved A-infinity relation at `args`."""
    out = {}
    k = len(args)
    for j in range(0, k + 1):
        for n in range(0, k - j + 1):
            inner = cat.apply_m(b, args[n:n + j])
            if not inner:
                continue
            sign = sum(cat.degp(b, a) for a in args[:n]) % 2
            for mid, cmid in inner.items():
                outer_args = [{a: cat.ring.one} for a in args[:n]]
                outer_args.append({mid: cat.ring.one})
                outer_args += [{a: cat.ring.one} for a in args[n + j:]]
                img = cat.apply_m_vectors(b, outer_args)
                for i, c in img.items():
                    p = cmid * c
                    if sign:
                        p = -p
                    if not p:
                        continue
                    if i in out:
                        s = out[i] + p
                        if s.is_zero():
                            del out[i]
                        else:
                            out[i] = s
                    else:
                        out[i] = p
    return out


def validate(cat, arity_bound=None):
    """Diagnostic report: list of violation records, empty iff valid."""
    report = []
    ring = cat.ring
    if arity_bound is None:
        arity_bound = 2 * cat.max_arity

    for b, blk in enumerate(cat.blocks):
        if blk.degrees[blk.unit] % 2 != 0:
            report.append({"check": "unit-parity", "block": b, "witness": blk.unit})
        for k, table in blk.ops.items():
            for args, img in table.items():
                if blk.unit in args:
                    report.append(
                        {"check": "stored-unit-input", "block": b, "witness": (k, args)}
                    )
                want = (2 - k + sum(blk.degrees[a] for a in args)) % 2
                for i, c in img.items():
                    if c and blk.degrees[i] % 2 != want:
                        report.append(
                            {
                                "check": "operation-parity",
                                "block": b,
                                "witness": (k, args, i),
                            }
                        )

    # curved A-infinity relations on all basis tuples up to the arity bound
    for b, blk in enumerate(cat.blocks):
        tuples = [()]
        for k in range(0, arity_bound + 1):
            for args in tuples:
                res = _ainf_relation(cat, b, args)
                if res:
                    report.append(
                        {"check": "ainf-relation", "block": b, "witness": args,
                         "residual": {i: str(c) for i, c in res.items()}}
                    )
            tuples = [t + (i,) for t in tuples for i in range(blk.dim)]

    # cyclic symmetry of each operation
    for b, blk in enumerate(cat.blocks):
        for k in range(1, cat.max_arity + 1):
            tuples = [()]
            for _ in range(k + 1):
                tuples = [t + (i,) for t in tuples for i in range(blk.dim)]
            for args in tuples:
                lhs = ring.zero
                img = cat.apply_m(b, args[:-1])
                for i, c in img.items():
                    p = cat.pair(b, i, args[-1])
                    if p:
                        lhs = lhs + c * p
                rot = args[1:] + (args[0],)
                rhs = ring.zero
                img = cat.apply_m(b, rot[:-1])
                for i, c in img.items():
                    p = cat.pair(b, i, rot[-1])
                    if p:
                        rhs = rhs + c * p
                heart = cat.degp(b, args[0]) * (
                    sum(cat.degp(b, a) for a in args[1:]) % 2
                )
                if heart % 2:
                    rhs = -rhs
                if not (lhs - rhs).is_zero():
                    report.append(
                        {"check": "cyclicity", "block": b, "witness": (k, args)}
                    )

    # pairing: parity, shifted antisymmetry, block non-degeneracy
    d = cat.parity
    for b, blk in enumerate(cat.blocks):
        for (i, j), c in blk.pairing.items():
            if not c:
                continue
            if (blk.degrees[i] + blk.degrees[j]) % 2 != d % 2:
                report.append({"check": "pairing-parity", "block": b, "witness": (i, j)})
            back = cat.pair(b, j, i)
            sign = shifted(blk.degrees[i]) * shifted(blk.degrees[j])
            want = -back if sign % 2 == 0 else back
            if not (c - want).is_zero():
                report.append(
                    {"check": "pairing-antisymmetry", "block": b, "witness": (i, j)}
                )
        try:
            _linalg.mat_inverse(cat.gram(b), ring.one, ring.zero)
        except _linalg.PivotError:
            report.append({"check": "pairing-nondegenerate", "block": b, "witness": None})

    return report


# Clifford fixtures: the mirror model of projective space.
# Block k is the Clifford algebra on n odd generators with
# e_i e_j + e_j e_i = -(1 + delta_ij) c_k,  c_k = T^{1/(n+1)} eps^k,
# curvature (n+1) c_k, and the cyclic pairing fixed by its value on the
# top word.


def _subset_basis(n):
    subsets = []
    for mask in range(1 << n):
        gens = tuple(i + 1 for i in range(n) if mask & (1 << i))
        subsets.append(gens)
    subsets.sort(key=lambda g: (len(g), g))
    return subsets


def _cliff_mul_gen(word, g, c, ring, cache):
    """Right-multiply the sorted generator word by e_g; returns {word: coeff}."""
    key = (word, g)
    if key in cache:
        return cache[key]
    if not word or word[-1] < g:
        out = {word + (g,): ring.one}
    elif word[-1] == g:
        out = {word[:-1]: -c}
    else:
        last = word[-1]
        out = {}
        for w2, coef in _cliff_mul_gen(word[:-1], g, c, ring, cache).items():
            out[w2 + (last,)] = -coef
        head = word[:-1]
        prev = out.get(head, ring.zero) - c
        if prev.is_zero():
            out.pop(head, None)
        else:
            out[head] = prev
    cache[key] = out
    return out


def _cliff_mul(wa, wb, c, ring, cache):
    acc = {wa: ring.one}
    for g in wb:
        nxt = {}
        for w, coef in acc.items():
            for w2, coef2 in _cliff_mul_gen(w, g, c, ring, cache).items():
                p = coef * coef2
                if not p:
                    continue
                prev = nxt.get(w2, ring.zero) + p
                if prev.is_zero():
                    nxt.pop(w2, None)
                else:
                    nxt[w2] = prev
        acc = nxt
    return acc


def clifford_model(n):
    """The weakly curved cyclic category with n+1 Clifford blocks."""
    assert n >= 1
    field_order = 4 * (n + 1) // _gcd(4, n + 1)  # lcm(4, n+1)
    ring = ScalarRing(field_order, 2 * (n + 1))
    subsets = _subset_basis(n)
    index = {s: i for i, s in enumerate(subsets)}
    degrees = [len(s) % 2 for s in subsets]
    top = subsets[-1]
    # v = <1, gamma_top> = (-sqrt(-1))^{n(n+1)/2}
    i_unit = ring.zeta(field_order // 4)
    v = ring.one
    for _ in range(n * (n + 1) // 2):
        v = v * (-i_unit)

    def gamma_sign(s):
        m = len(s)
        return -1 if (m * (m - 1) // 2) % 2 else 1

    blocks = []
    for k in range(n + 1):
        # c_k = T^{1/(n+1)} eps^k with eps = zeta_{n+1}
        eps_k = ring.zeta((field_order // (n + 1)) * k)
        c = ring.monomial(2) * eps_k
        cache = {}
        m2 = {}
        pairing = {}
        prods = {}
        for sa in subsets:
            for sb in subsets:
                raw = _cliff_mul(sa, sb, c, ring, cache)
                # m_2(gamma_a, gamma_b) = (-1)^{|a|} sign_a sign_b sum coeff_U e_U
                sgn = gamma_sign(sa) * gamma_sign(sb) * (-1 if len(sa) % 2 else 1)
                img = {}
                for w, coef in raw.items():
                    val = coef * (sgn * gamma_sign(w))
                    if val:
                        img[index[w]] = val
                prods[(index[sa], index[sb])] = img
                if sa and sb:
                    m2[(index[sa], index[sb])] = img
                top_coeff = img.get(index[top])
                if top_coeff:
                    pairing[(index[sa], index[sb])] = v * top_coeff
        lam = c * (n + 1)
        blocks.append(Block(degrees, 0, lam, {2: m2}, pairing))
    return CyclicAInfCategory(ring, blocks, parity=n % 2, max_arity=2)


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def deform_canonical(cat, series_ring):
    """Deformed category over truncated series: block k curvature becomes
    lambda_k - t_k; everything else is lifted unchanged."""
    assert len(series_ring.tvars) == len(cat.blocks), "one t-variable per block"
    blocks = []
    for k, blk in enumerate(cat.blocks):
        ops = {
            a: {
                args: {i: series_ring.from_scalar(c) for i, c in img.items()}
                for args, img in table.items()
            }
            for a, table in blk.ops.items()
        }
        pairing = {
            key: series_ring.from_scalar(c) for key, c in blk.pairing.items()
        }
        curv = series_ring.from_scalar(blk.curvature) - series_ring.var(
            series_ring.tvars[k]
        )
        blocks.append(Block(blk.degrees, blk.unit, curv, ops, pairing))
    return CyclicAInfCategory(
        series_ring, blocks, cat.parity, cat.max_arity, list(cat.labels)
    )


def scale_pairing(cat, factor):
    """Same category with the cyclic pairing multiplied by a scalar."""
    blocks = []
    for blk in cat.blocks:
        pairing = {key: c * factor for key, c in blk.pairing.items()}
        blocks.append(Block(blk.degrees, blk.unit, blk.curvature, blk.ops, pairing))
    return CyclicAInfCategory(cat.ring, blocks, cat.parity, cat.max_arity, list(cat.labels))


# description files: JSON with explicit exact scalars


def _scalar_to_json(s):
    return [[k, [str(f) for f in c.coeffs]] for k, c in sorted(s.terms.items())]


def _scalar_from_json(ring, data):
    from .scalars import CycloRational, PuiseuxScalar

    terms = {}
    for k, coeffs in data:
        fracs = tuple(Fraction(f) for f in coeffs)
        assert len(fracs) == ring.field.degree, "coefficient vector length mismatch"
        c = CycloRational(ring.field, fracs)
        if not c.is_zero():
            terms[int(k)] = c
    return PuiseuxScalar(ring, terms)


def save_algebra(cat, path):
    data = {
        "field_order": cat.ring.field.n,
        "puiseux_denom": cat.ring.denom,
        "parity": cat.parity,
        "max_arity": cat.max_arity,
        "blocks": [],
    }
    for blk in cat.blocks:
        ops = []
        for k, table in sorted(blk.ops.items()):
            for args, img in sorted(table.items()):
                for i, c in sorted(img.items()):
                    ops.append([k, list(args), i, _scalar_to_json(c)])
        pairing = [
            [i, j, _scalar_to_json(c)] for (i, j), c in sorted(blk.pairing.items())
        ]
        data["blocks"].append(
            {
                "parities": list(blk.degrees),
                "unit": blk.unit,
                "curvature": _scalar_to_json(blk.curvature),
                "operations": ops,
                "pairing": pairing,
            }
        )
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


class SchemaError(ValueError):
    pass


def load_algebra(path):
    """Load and eagerly validate a category description file."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        ring = ScalarRing(int(data["field_order"]), int(data["puiseux_denom"]))
        blocks = []
        for bi, bdata in enumerate(data["blocks"]):
            degrees = [int(p) % 2 for p in bdata["parities"]]
            unit = int(bdata["unit"])
            curv = _scalar_from_json(ring, bdata["curvature"])
            ops = {}
            for k, args, out, scal in bdata["operations"]:
                entry = ops.setdefault(int(k), {}).setdefault(tuple(args), {})
                entry[int(out)] = _scalar_from_json(ring, scal)
            pairing = {}
            for i, j, scal in bdata["pairing"]:
                pairing[(int(i), int(j))] = _scalar_from_json(ring, scal)
            blocks.append(Block(degrees, unit, curv, ops, pairing))
        max_arity = int(data.get("max_arity", max((max(b.ops, default=2) for b in blocks), default=2)))
        cat = CyclicAInfCategory(ring, blocks, int(data["parity"]), max_arity)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed algebra description: {exc}") from exc
    report = validate(cat)
    if report:
        raise SchemaError(f"algebra fails validation: {report[:3]}")
    return cat
