"""Exact scalar arithmetic.

Three layers, each built on the previous one:

  CycloRational   -- element of Q(zeta_N), stored as the canonical residue
                     mod the N-th cyclotomic polynomial.
  PuiseuxScalar   -- finite sum of CycloRational coefficients times powers
                     T^(k/m) of a formal Puiseux monomial (fixed denominator m).
  TruncatedSeries -- element of R[u, u^-1, t_1..t_r] with eager truncation:
                     a hard lower bound on the u exponent (exceeding it is an
                     error, not a truncation), an upper u cutoff and a total
                     t-degree cutoff (both lossy by design).

Everything is immutable by discipline: no method mutates a published value.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd


def _poly_trim(c):
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return c


def _poly_divmod(a, b):
    # exact division of integer/rational coefficient lists, b monic-led
    a = list(a)
    q = [Fraction(0)] * max(0, len(a) - len(b) + 1)
    lead = b[-1]
    for i in range(len(a) - len(b), -1, -1):
        coef = Fraction(a[i + len(b) - 1], 1) / lead
        if coef:
            q[i] = coef
            for j, bj in enumerate(b):
                a[i + j] -= coef * bj
    return q, _poly_trim(a)


def cyclotomic_poly(n):
    """Coefficient list (ascending) of the n-th cyclotomic polynomial.

    Computed by exact division of x^n - 1 by the product of Phi_d over
    proper divisors d of n.  Integer output, small n only.
    """
    num = [-1] + [0] * (n - 1) + [1]
    den = [1]
    for d in range(1, n):
        if n % d == 0:
            phi_d = cyclotomic_poly(d)
            out = [0] * (len(den) + len(phi_d) - 1)
            for i, a in enumerate(den):
                for j, b in enumerate(phi_d):
                    out[i + j] += a * b
            den = out
    q, r = _poly_divmod(num, den)
    assert not r, "cyclotomic division must be exact"
    return [int(c) for c in q]


class CycloField:
    """The field Q(zeta_N).  Holds the reduction data shared by its elements."""

    _cache = {}

    def __new__(cls, n):
        if n in cls._cache:
            return cls._cache[n]
        self = object.__new__(cls)
        self.n = n
        phi = cyclotomic_poly(n)
        self.modulus = phi
        self.degree = len(phi) - 1
        # reduction table: x^k mod Phi_N for k in [degree, 2*degree-2]
        red = {}
        for k in range(self.degree, 2 * self.degree - 1):
            column = [0] * k + [1]
            _, rem = _poly_divmod(column, phi)
            rem = [int(c) for c in rem]
            red[k] = tuple(rem + [0] * (self.degree - len(rem)))
        self._reduction = red
        self.zero = _cyclo_raw(self, (0,) * self.degree, 1)
        self.one = _cyclo_raw(self, (1,) + (0,) * (self.degree - 1), 1)
        cls._cache[n] = self
        return self

    # field contexts are immutable singletons
    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self

    def rational(self, p, q=1):
        v = Fraction(p, q)
        num = [0] * self.degree
        num[0] = v.numerator
        return _cyclo_norm(self, num, v.denominator)

    def zeta(self, power=1):
        """zeta_N^power as a field element."""
        power %= self.n
        if power < self.degree:
            num = [0] * self.degree
            num[power] = 1
            return _cyclo_raw(self, tuple(num), 1)
        # reduce by repeated multiplication with x
        out = self.one
        for _ in range(power):
            out = out._mul_x()
        return out

    def __repr__(self):
        return f"CycloField({self.n})"


def _cyclo_raw(field, num, den):
    self = object.__new__(CycloRational)
    self.field = field
    self.num = num
    self.den = den
    return self


def _cyclo_norm(field, num, den):
    if not any(num):
        return _cyclo_raw(field, (0,) * field.degree, 1)
    g = den
    for a in num:
        if a:
            g = gcd(g, a)
            if g == 1:
                return _cyclo_raw(field, tuple(num), den)
    return _cyclo_raw(field, tuple(a // g for a in num), den // g)


class CycloRational:
    """Canonical residue mod Phi_N: one integer vector over a positive
    common denominator, in lowest terms."""

    __slots__ = ("field", "num", "den")

    def __init__(self, field, coeffs):
        vals = [c if isinstance(c, Fraction) else Fraction(c) for c in coeffs]
        if len(vals) < field.degree:
            vals += [Fraction(0)] * (field.degree - len(vals))
        den = 1
        for v in vals:
            d = v.denominator
            den = den // gcd(den, d) * d
        num = [v.numerator * (den // v.denominator) for v in vals]
        norm = _cyclo_norm(field, num, den)
        self.field = field
        self.num = norm.num
        self.den = norm.den

    @property
    def coeffs(self):
        d = self.den
        return tuple(Fraction(a, d) for a in self.num)

    def __deepcopy__(self, memo):
        return self

    def is_zero(self):
        return not any(self.num)

    def __bool__(self):
        return any(self.num)

    def __eq__(self, other):
        return (
            isinstance(other, CycloRational)
            and self.field is other.field
            and self.num == other.num
            and self.den == other.den
        )

    def __hash__(self):
        return hash((self.field.n, self.num, self.den))

    def __add__(self, other):
        assert self.field is other.field
        d1, d2 = self.den, other.den
        if d1 == d2:
            num = [a + b for a, b in zip(self.num, other.num)]
            return _cyclo_norm(self.field, num, d1)
        g = gcd(d1, d2)
        m1, m2 = d2 // g, d1 // g
        num = [a * m1 + b * m2 for a, b in zip(self.num, other.num)]
        return _cyclo_norm(self.field, num, d1 * m1)

    def __sub__(self, other):
        assert self.field is other.field
        d1, d2 = self.den, other.den
        if d1 == d2:
            num = [a - b for a, b in zip(self.num, other.num)]
            return _cyclo_norm(self.field, num, d1)
        g = gcd(d1, d2)
        m1, m2 = d2 // g, d1 // g
        num = [a * m1 - b * m2 for a, b in zip(self.num, other.num)]
        return _cyclo_norm(self.field, num, d1 * m1)

    def __neg__(self):
        return _cyclo_raw(self.field, tuple(-a for a in self.num), self.den)

    def _mul_x(self):
        d = self.field.degree
        shifted = (0,) + self.num
        out = list(shifted[:d])
        if shifted[d]:
            row = self.field._reduction[d]
            top = shifted[d]
            out = [a + top * r for a, r in zip(out, row)]
        return _cyclo_norm(self.field, out, self.den)

    def __mul__(self, other):
        if isinstance(other, int):
            if other == 0:
                return self.field.zero
            return _cyclo_norm(
                self.field, [a * other for a in self.num], self.den
            )
        if isinstance(other, Fraction):
            if not other:
                return self.field.zero
            return _cyclo_norm(
                self.field,
                [a * other.numerator for a in self.num],
                self.den * other.denominator,
            )
        assert self.field is other.field
        d = self.field.degree
        a, b = self.num, other.num
        prod = [0] * (2 * d - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        prod[i + j] += ai * bj
        out = prod[:d]
        red = self.field._reduction
        for k in range(d, 2 * d - 1):
            if prod[k]:
                row = red[k]
                pk = prod[k]
                out = [x + pk * r for x, r in zip(out, row)]
        return _cyclo_norm(self.field, out, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self):
        """Inverse via the extended Euclidean algorithm in Q[x]/Phi_N."""
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero cyclotomic element")
        # xgcd(self-as-poly, Phi_N)
        r0 = [Fraction(c) for c in self.field.modulus]
        r1 = _poly_trim(self.coeffs)
        s0, s1 = [], [Fraction(1)]
        while True:
            if len(r1) == 1:
                inv_lead = 1 / r1[0]
                c = [x * inv_lead for x in s1]
                c = c[: self.field.degree]
                c += [Fraction(0)] * (self.field.degree - len(c))
                return CycloRational(self.field, tuple(c))
            q, r = _poly_divmod(r0, r1)
            # s_new = s0 - q*s1
            s_new = list(s0) + [Fraction(0)] * max(0, len(q) + len(s1) - 1 - len(s0))
            for i, qi in enumerate(q):
                if qi:
                    for j, sj in enumerate(s1):
                        s_new[i + j] -= qi * sj
            r0, r1 = r1, r
            s0, s1 = s1, _poly_trim(s_new)
            if not r1:
                raise ZeroDivisionError("element not invertible (degenerate modulus?)")

    def __str__(self):
        if self.is_zero():
            return "0"
        parts = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if k == 0:
                parts.append(str(c))
            elif k == 1:
                parts.append(f"{c}*z")
            else:
                parts.append(f"{c}*z^{k}")
        return " + ".join(parts)

    __repr__ = __str__


class ScalarRing:
    """Context for PuiseuxScalar values: a field Q(zeta_N) and a fixed
    Puiseux denominator m, so exponents of T live in (1/m)Z.

    Instances are cached so that equal parameters give the identical ring;
    scalar equality checks ring identity.
    """

    _cache = {}

    def __new__(cls, field_order, puiseux_denom):
        key = (field_order, puiseux_denom)
        if key in cls._cache:
            return cls._cache[key]
        self = object.__new__(cls)
        self.field = CycloField(field_order)
        self.denom = puiseux_denom
        self.zero = PuiseuxScalar(self, {})
        self.one = PuiseuxScalar(self, {0: self.field.one})
        cls._cache[key] = self
        return self

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self

    def rational(self, p, q=1):
        v = Fraction(p, q)
        if v == 0:
            return self.zero
        return PuiseuxScalar(self, {0: self.field.rational(v.numerator, v.denominator)})

    def zeta(self, power=1):
        return PuiseuxScalar(self, {0: self.field.zeta(power)})

    def from_cyclo(self, c):
        if c.is_zero():
            return self.zero
        return PuiseuxScalar(self, {0: c})

    def monomial(self, texp_num, coeff=None):
        """coeff * T^(texp_num/denom); coeff defaults to 1."""
        c = coeff if coeff is not None else self.field.one
        if isinstance(c, PuiseuxScalar):
            return c * PuiseuxScalar(self, {texp_num: self.field.one})
        if c.is_zero():
            return self.zero
        return PuiseuxScalar(self, {texp_num: c})

    def __repr__(self):
        return f"ScalarRing(zeta_{self.field.n}, T^(1/{self.denom}))"


class PuiseuxScalar:
    """Finite K-linear combination of Puiseux monomials T^(k/m), K = Q(zeta_N).

    terms maps the integer numerator k (exponent k/m) to a nonzero
    CycloRational.  The zero scalar has no terms.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms):
        self.ring = ring
        self.terms = terms

    def __deepcopy__(self, memo):
        return self

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return (
            isinstance(other, PuiseuxScalar)
            and self.ring is other.ring
            and self.terms == other.terms
        )

    __hash__ = None

    def __add__(self, other):
        assert self.ring is other.ring
        if not self.terms:
            return other
        if not other.terms:
            return self
        out = dict(self.terms)
        for k, c in other.terms.items():
            if k in out:
                s = out[k] + c
                if s.is_zero():
                    del out[k]
                else:
                    out[k] = s
            else:
                out[k] = c
        return PuiseuxScalar(self.ring, out)

    def __neg__(self):
        return PuiseuxScalar(self.ring, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return self.ring.zero
            return PuiseuxScalar(self.ring, {k: c * other for k, c in self.terms.items()})
        if isinstance(other, CycloRational):
            if other.is_zero():
                return self.ring.zero
            out = {}
            for k, c in self.terms.items():
                p = c * other
                if not p.is_zero():
                    out[k] = p
            return PuiseuxScalar(self.ring, out)
        assert self.ring is other.ring
        if not self.terms or not other.terms:
            return self.ring.zero
        out = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                p = c1 * c2
                if p.is_zero():
                    continue
                k = k1 + k2
                if k in out:
                    s = out[k] + p
                    if s.is_zero():
                        del out[k]
                    else:
                        out[k] = s
                else:
                    out[k] = p
        return PuiseuxScalar(self.ring, out)

    __rmul__ = __mul__

    def is_monomial(self):
        return len(self.terms) == 1

    def inverse(self):
        """Inverse of a monomial scalar.  General multi-term Puiseux sums have
        no inverse inside this finite-sum type; callers must arrange monomial
        pivots (the CP^n fixtures are T-homogeneous, so they always can)."""
        if not self.is_monomial():
            raise ZeroDivisionError(
                "only monomial Puiseux scalars are invertible; got " + str(self)
            )
        (k, c), = self.terms.items()
        return PuiseuxScalar(self.ring, {-k: c.inverse()})

    def __truediv__(self, other):
        return self * other.inverse()

    def t_exponents(self):
        return sorted(self.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        m = self.ring.denom
        parts = []
        for k in sorted(self.terms):
            c = self.terms[k]
            body = f"[{c}]"
            if k == 0:
                parts.append(body)
            else:
                e = Fraction(k, m)
                parts.append(f"{body}*T^({e})")
        return " + ".join(parts)

    __repr__ = __str__


class SeriesRing:
    """Context for truncated Laurent-in-u, power-in-t series over a ScalarRing.

    u_min is a hard pole bound: producing a u-exponent below it raises
    (deep poles are data, not noise).  u_order and t_order are truncation
    cutoffs: terms beyond them are dropped silently (that is the point).
    """

    def __init__(self, scalars, tvars=(), t_order=0, u_order=0, u_min=0):
        self.scalars = scalars
        self.tvars = tuple(tvars)
        self.t_order = t_order
        self.u_order = u_order
        self.u_min = u_min
        self.zero = TruncatedSeries(self, {})
        zkey = (0, (0,) * len(self.tvars))
        self.one = TruncatedSeries(self, {zkey: scalars.one})

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self

    def _key(self, u_exp, t_exps):
        t_exps = tuple(t_exps) if t_exps else (0,) * len(self.tvars)
        assert len(t_exps) == len(self.tvars)
        return (u_exp, t_exps)

    def from_scalar(self, s):
        if s.is_zero():
            return self.zero
        return TruncatedSeries(self, {self._key(0, None): s})

    def term(self, coeff, u_exp=0, t_exps=None):
        """coeff * u^u_exp * t^t_exps, validated against the bounds."""
        key = self._key(u_exp, t_exps)
        if coeff.is_zero() or key[0] > self.u_order or sum(key[1]) > self.t_order:
            return self.zero
        if key[0] < self.u_min:
            raise ArithmeticError("u-pole overflow: exponent %d < u_min %d" % (key[0], self.u_min))
        return TruncatedSeries(self, {key: coeff})

    def var(self, name):
        if name == "u":
            return self.term(self.scalars.one, u_exp=1)
        i = self.tvars.index(name)
        exps = [0] * len(self.tvars)
        exps[i] = 1
        return self.term(self.scalars.one, t_exps=exps)

    def __repr__(self):
        return (
            f"SeriesRing(t={list(self.tvars)}, tOrder={self.t_order}, "
            f"u in [{self.u_min},{self.u_order}])"
        )


class TruncatedSeries:
    """Truncated series with PuiseuxScalar coefficients.

    Keys are (u_exp, t_exps).  All arithmetic truncates eagerly at the
    ring's u_order / t_order and raises on u-exponents below u_min.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms):
        self.ring = ring
        self.terms = terms

    def __deepcopy__(self, memo):
        return self

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return (
            isinstance(other, TruncatedSeries)
            and self.ring is other.ring
            and self.terms == other.terms
        )

    __hash__ = None

    def __add__(self, other):
        assert self.ring is other.ring
        if not self.terms:
            return other
        if not other.terms:
            return self
        out = dict(self.terms)
        for k, c in other.terms.items():
            if k in out:
                s = out[k] + c
                if s.is_zero():
                    del out[k]
                else:
                    out[k] = s
            else:
                out[k] = c
        return TruncatedSeries(self.ring, out)

    def __neg__(self):
        return TruncatedSeries(self.ring, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        ring = self.ring
        if isinstance(other, (int, Fraction, PuiseuxScalar, CycloRational)):
            if isinstance(other, int) and other == 0:
                return ring.zero
            out = {}
            for k, c in self.terms.items():
                p = c * other
                if p:
                    out[k] = p
            return TruncatedSeries(ring, out)
        assert ring is other.ring
        out = {}
        u_hi, t_hi, u_lo = ring.u_order, ring.t_order, ring.u_min
        for (u1, t1), c1 in self.terms.items():
            for (u2, t2), c2 in other.terms.items():
                u = u1 + u2
                if u > u_hi:
                    continue
                if u < u_lo:
                    raise ArithmeticError(
                        "u-pole overflow: exponent %d < u_min %d" % (u, u_lo)
                    )
                t = tuple(a + b for a, b in zip(t1, t2))
                if sum(t) > t_hi:
                    continue
                p = c1 * c2
                if not p:
                    continue
                key = (u, t)
                if key in out:
                    s = out[key] + p
                    if s.is_zero():
                        del out[key]
                    else:
                        out[key] = s
                else:
                    out[key] = p
        return TruncatedSeries(ring, out)

    __rmul__ = __mul__

    def shift_u(self, k):
        """Multiply by u^k (k may be negative; bounds enforced)."""
        out = {}
        for (u, t), c in self.terms.items():
            u2 = u + k
            if u2 > self.ring.u_order:
                continue
            if u2 < self.ring.u_min:
                raise ArithmeticError(
                    "u-pole overflow: exponent %d < u_min %d" % (u2, self.ring.u_min)
                )
            out[(u2, t)] = c
        return TruncatedSeries(self.ring, out)

    def u_coefficient(self, u_exp):
        """The coefficient of u^u_exp, as a series in t only."""
        out = {}
        for (u, t), c in self.terms.items():
            if u == u_exp:
                out[(0, t)] = c
        return TruncatedSeries(self.ring, out)

    def coefficient(self, u_exp, t_exps):
        return self.terms.get((u_exp, tuple(t_exps)), self.ring.scalars.zero)

    def constant_term(self):
        return self.coefficient(0, (0,) * len(self.ring.tvars))

    def min_u_exponent(self):
        return min((k[0] for k in self.terms), default=0)

    def max_u_exponent(self):
        return max((k[0] for k in self.terms), default=0)

    def has_negative_u(self):
        return any(k[0] < 0 for k in self.terms)

    def t_part(self, total_degree):
        """Terms whose total t-degree equals total_degree."""
        out = {k: c for k, c in self.terms.items() if sum(k[1]) == total_degree}
        return TruncatedSeries(self.ring, out)

    def t_valuation(self):
        return min((sum(k[1]) for k in self.terms), default=self.ring.t_order + 1)

    def d_dt(self, i):
        out = {}
        for (u, t), c in self.terms.items():
            e = t[i]
            if e == 0:
                continue
            t2 = t[:i] + (e - 1,) + t[i + 1:]
            p = c * e
            key = (u, t2)
            if key in out:
                s = out[key] + p
                if s.is_zero():
                    del out[key]
                else:
                    out[key] = s
            else:
                out[key] = p
        return TruncatedSeries(self.ring, out)

    def u_d_du(self):
        """u * d/du: safe on Laurent series (no exponent shift)."""
        out = {}
        for (u, t), c in self.terms.items():
            if u == 0:
                continue
            p = c * u
            if p:
                out[(u, t)] = p
        return TruncatedSeries(self.ring, out)

    def substitute_t(self, replacements):
        """Substitute each t-variable by a series with zero constant term.

        replacements: list of TruncatedSeries, one per t-variable.
        """
        ring = self.ring
        for r in replacements:
            assert r.ring is ring
            assert r.constant_term().is_zero(), "substitution needs zero constant term"
        # precompute powers lazily
        powers = [{0: ring.one} for _ in replacements]

        def power(i, e):
            cache = powers[i]
            if e not in cache:
                cache[e] = power(i, e - 1) * replacements[i]
            return cache[e]

        total = ring.zero
        for (u, t), c in self.terms.items():
            term = ring.term(c, u_exp=u)
            if term.is_zero():
                continue
            for i, e in enumerate(t):
                if e:
                    term = term * power(i, e)
                if term.is_zero():
                    break
            total = total + term
        return total

    def inverse(self):
        """Newton-iteration inverse; requires an invertible constant term
        (a Puiseux monomial) at (u^0, t^0) and no negative u powers."""
        if self.has_negative_u():
            raise ZeroDivisionError("cannot invert a series with u-poles")
        c0 = self.constant_term()
        if c0.is_zero():
            raise ZeroDivisionError("series inverse needs invertible constant term")
        inv0 = self.ring.from_scalar(c0.inverse())
        rest = self - self.ring.from_scalar(c0)
        # x^-1 = inv0 * sum_k (-rest*inv0)^k ; terminates by truncation
        steps = self.ring.t_order + self.ring.u_order + 2
        acc = self.ring.one
        base = -(rest * inv0)
        powterm = self.ring.one
        for _ in range(steps):
            powterm = powterm * base
            if powterm.is_zero():
                break
            acc = acc + powterm
        return acc * inv0

    def exp(self):
        """exp of a series with no (u^0,t^0) constant term and only terms of
        positive t-valuation (so the sum terminates at t_order)."""
        assert self.constant_term().is_zero()
        assert self.t_valuation() >= 1, "exp needs positive t-valuation"
        acc = self.ring.one
        term = self.ring.one
        for k in range(1, self.ring.t_order + 1):
            term = term * self * Fraction(1, k)
            if term.is_zero():
                break
            acc = acc + term
        return acc

    def __str__(self):
        if not self.terms:
            return "0"
        names = self.ring.tvars
        parts = []
        for key in sorted(self.terms, key=lambda k: (k[0], k[1])):
            u, t = key
            c = self.terms[key]
            factors = []
            if u:
                factors.append(f"u^{u}" if u != 1 else "u")
            for name, e in zip(names, t):
                if e:
                    factors.append(f"{name}^{e}" if e != 1 else name)
            head = "*".join(factors)
            parts.append(f"({c})" + ("*" + head if head else ""))
        return " + ".join(parts)

    __repr__ = __str__
