"""Exact arithmetic in number fields Q[x]/(m(x)).

Elements are coordinate vectors in the power basis with ``Fraction``
entries.  Archimedean places come from certified complex roots of the
defining polynomial; non-archimedean places are only offered over Q.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import gcd
from typing import Optional

import mpmath
from sympy import divisors, factorint

from .errors import (DivisionByZero, FieldError, FieldMismatch, InvalidInput,
                     PrecisionFailure, Unsupported)
from . import linalg


# ---------------------------------------------------------------- polynomials
# Dense polynomials over Q, coefficient lists from the constant term upwards.

def ptrim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def padd(a, b):
    n = max(len(a), len(b))
    return ptrim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def psub(a, b):
    return padd(a, [-x for x in b])


def pmul(a, b):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return ptrim(out)


def pdivmod(a, b):
    a = [Fraction(x) for x in ptrim(a)]
    b = ptrim(b)
    if not b:
        raise DivisionByZero("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    lead = Fraction(b[-1])
    while len(a) >= len(b) and a:
        k = len(a) - len(b)
        f = a[-1] / lead
        q[k] = f
        for i, y in enumerate(b):
            a[i + k] -= f * y
        a = ptrim(a)
    return ptrim(q), a


def pderiv(a):
    return ptrim([i * a[i] for i in range(1, len(a))])


def pmonic(a):
    a = ptrim(a)
    lead = Fraction(a[-1])
    return [Fraction(x) / lead for x in a]


def pgcd(a, b):
    a, b = ptrim(a), ptrim(b)
    while b:
        a, b = b, pdivmod(a, b)[1]
    return pmonic(a) if a else []


def peval(a, x):
    acc = 0
    for c in reversed(a):
        acc = acc * x + c
    return acc


def primitive_int(a):
    """Scale a rational polynomial to a primitive integer one with positive lead."""
    a = [Fraction(x) for x in ptrim(a)]
    den = 1
    for x in a:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in a]
    g = 0
    for x in ints:
        g = gcd(g, x)
    ints = [x // g for x in ints]
    if ints[-1] < 0:
        ints = [-x for x in ints]
    return ints


# ---------------------------------------------------------------- places

@dataclass(frozen=True, eq=False)
class Place:
    kind: str                      # "arch" or "nonarch"
    index: int = 0                 # embedding index for archimedean places
    is_real: bool = True
    local_degree: int = 1
    root: Optional[object] = None  # mpmath number
    prime: Optional[int] = None

    def label(self):
        if self.kind == "nonarch":
            return f"p={self.prime}"
        return f"inf{self.index}" + ("" if self.is_real else "c")

    def __repr__(self):
        return f"Place({self.label()})"


def nonarch_place(p):
    p = int(p)
    if p < 2 or len(factorint(p)) != 1 or list(factorint(p).values()) != [1]:
        raise InvalidInput(f"{p} is not prime")
    return Place(kind="nonarch", prime=p)


# ---------------------------------------------------------------- fields

class NumberField:
    """Q[x]/(m) for a monic integer polynomial m given from c0 up to the lead."""

    def __init__(self, min_poly, integral_basis=None, conjugation=None):
        try:
            coeffs = [int(c) for c in min_poly]
        except (TypeError, ValueError):
            raise FieldError("minimal polynomial must have integer coefficients")
        if any(Fraction(c) != Fraction(orig) for c, orig in zip(coeffs, min_poly)):
            raise FieldError("minimal polynomial must have integer coefficients")
        coeffs = ptrim(coeffs)
        if len(coeffs) < 2:
            raise FieldError("minimal polynomial must have degree >= 1")
        if coeffs[-1] != 1:
            raise FieldError("minimal polynomial must be monic")
        self.min_poly = tuple(coeffs)
        self.degree = len(coeffs) - 1
        if self.degree > 1:
            c0 = coeffs[0]
            if c0 == 0:
                raise FieldError("minimal polynomial has the rational root 0")
            for dv in divisors(abs(c0)):
                for r in (dv, -dv):
                    if peval(coeffs, r) == 0:
                        raise FieldError(f"minimal polynomial has the rational root {r}")
            if len(pgcd(coeffs, pderiv(coeffs))) > 1:
                raise FieldError("minimal polynomial is not squarefree")
        d = self.degree
        if integral_basis is None:
            self.integral_basis = [self.power(k) for k in range(d)]
        else:
            basis = [self.coerce(b) for b in integral_basis]
            if len(basis) != d or linalg.rank([list(b.coeffs) for b in basis]) != d:
                raise FieldError("integral basis must have d independent elements")
            self.integral_basis = basis
        self._conj_image = None
        if conjugation is not None:
            img = self.coerce(conjugation)
            if peval([self.coerce(c) for c in coeffs], img) != self.zero:
                raise FieldError("conjugation does not map the generator to a root")
            self._conj_image = img
            if self.conj(self.conj(self.gen)) != self.gen:
                raise FieldError("conjugation is not an involution")
        elif d == 2:
            # the nontrivial automorphism x -> -a1 - x
            self._conj_image = self.element([-coeffs[1], -1])

    # -- constructors
    @classmethod
    def rationals(cls):
        return cls([0, 1])

    @classmethod
    def cyclotomic(cls, q):
        """Q(zeta_q) with complex conjugation zeta -> zeta^(q-1) as involution."""
        phi = cyclotomic_poly(q)
        if len(phi) == 2:
            return cls([int(c) for c in phi])
        field = cls([int(c) for c in phi], conjugation=None if q <= 2 else _unit_power(phi, q - 1))
        return field

    def element(self, coeffs):
        return FieldElement(self, coeffs)

    def coerce(self, x):
        if isinstance(x, FieldElement):
            if x.field != self:
                raise FieldMismatch("element belongs to a different field")
            return x
        if isinstance(x, (list, tuple)):
            return FieldElement(self, x)
        return FieldElement(self, [x])

    def power(self, k):
        return FieldElement(self, _reduce_power(self.min_poly, k))

    @property
    def zero(self):
        return FieldElement(self, [0])

    @property
    def one(self):
        return FieldElement(self, [1])

    @property
    def gen(self):
        return self.power(1)

    @property
    def is_rational(self):
        return self.degree == 1

    def conj(self, x):
        """Field involution used by algebra involutions (identity by default)."""
        x = self.coerce(x)
        if self._conj_image is None:
            return x
        acc = self.zero
        pw = self.one
        for c in x.coeffs:
            if c:
                acc = acc + pw * c
            pw = pw * self._conj_image
        return acc

    @cached_property
    def arch_places(self):
        return archimedean_places(self, 64)

    def signature(self):
        places = self.arch_places
        r = sum(1 for p in places if p.is_real)
        return r, len(places) - r

    def to_json(self):
        doc = {"min_poly": list(self.min_poly)}
        if any(b != self.power(k) for k, b in enumerate(self.integral_basis)):
            doc["integral_basis"] = [[_qstr(c) for c in b.coeffs] for b in self.integral_basis]
        return doc

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict) or "min_poly" not in doc:
            raise InvalidInput("field document needs 'min_poly'")
        field = cls(doc["min_poly"])
        if doc.get("integral_basis"):
            basis = [[Fraction(c) for c in b] for b in doc["integral_basis"]]
            field = cls(doc["min_poly"], integral_basis=basis)
        return field

    def __eq__(self, other):
        return isinstance(other, NumberField) and self.min_poly == other.min_poly

    def __hash__(self):
        return hash(self.min_poly)

    def __repr__(self):
        return f"NumberField({list(self.min_poly)})"


def _qstr(q):
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def _reduce_power(m, k):
    """Coordinates of x**k modulo m."""
    return pdivmod([0] * k + [1], list(m))[1] or [0]


def _unit_power(m, k):
    return [Fraction(c) for c in _reduce_power(m, k)]


def cyclotomic_poly(n):
    """Integer coefficients of the n-th cyclotomic polynomial."""
    return [int(c) for c in _cyclo(n)]


_CYCLO_CACHE = {}


def _cyclo(n):
    if n not in _CYCLO_CACHE:
        f = [-1] + [0] * (n - 1) + [1]
        for d in range(1, n):
            if n % d == 0:
                f = pdivmod(f, _cyclo(d))[0]
        _CYCLO_CACHE[n] = tuple(int(c) for c in f)
    return list(_CYCLO_CACHE[n])


class FieldElement:
    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        d = field.degree
        cs = [Fraction(c) for c in coeffs]
        if len(cs) > d:
            cs = pdivmod(cs, list(field.min_poly))[1]
        cs = list(cs) + [Fraction(0)] * (d - len(cs))
        self.field = field
        self.coeffs = tuple(cs)

    def _other(self, other):
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldMismatch("operands live in different fields")
            return other
        if isinstance(other, (int, Fraction)):
            return FieldElement(self.field, [other])
        return NotImplemented

    def __add__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        if self.field.degree == 1:
            return FieldElement(self.field, [self.coeffs[0] * other.coeffs[0]])
        return FieldElement(self.field, pmul(list(self.coeffs), list(other.coeffs)) or [0])

    __rmul__ = __mul__

    def inv(self):
        if self.is_zero():
            raise DivisionByZero("inverse of zero")
        if self.field.degree == 1:
            return FieldElement(self.field, [1 / self.coeffs[0]])
        # extended Euclid: s*a + t*m = g
        m = [Fraction(c) for c in self.field.min_poly]
        r0, r1 = m, ptrim(list(self.coeffs))
        s0, s1 = [], [Fraction(1)]
        while len(r1) > 1:
            q, r = pdivmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, psub(s0, pmul(q, s1))
        if not r1:
            raise DivisionByZero("element is a zero divisor; the defining polynomial is reducible")
        c = r1[0]
        return FieldElement(self.field, [x / c for x in s1] or [0])

    def __truediv__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return self * other.inv()

    def __rtruediv__(self, other):
        return self.inv() * other

    def __pow__(self, k):
        k = int(k)
        base = self if k >= 0 else self.inv()
        k = abs(k)
        acc = self.field.one
        while k:
            if k & 1:
                acc = acc * base
            base = base * base
            k >>= 1
        return acc

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = FieldElement(self.field, [other])
        if not isinstance(other, FieldElement):
            return NotImplemented
        return self.field == other.field and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.field.min_poly, self.coeffs))

    def is_zero(self):
        return not any(self.coeffs)

    def is_rational(self):
        return not any(self.coeffs[1:])

    def to_rational(self):
        if not self.is_rational():
            raise InvalidInput("element is not rational")
        return self.coeffs[0]

    def conj(self):
        return self.field.conj(self)

    def mult_matrix(self):
        """Matrix of y -> self*y in the power basis (columns are images)."""
        d = self.field.degree
        cols = [(self * self.field.power(k)).coeffs for k in range(d)]
        return [[cols[k][i] for k in range(d)] for i in range(d)]

    def embed(self, place):
        if place.kind != "arch":
            raise Unsupported("embedding needs an archimedean place")
        return peval([mpmath.mpf(c.numerator) / c.denominator for c in self.coeffs], place.root)

    def __repr__(self):
        if self.field.degree == 1:
            return f"{self.coeffs[0]}"
        terms = [f"{c}*a^{k}" if k else f"{c}" for k, c in enumerate(self.coeffs) if c]
        return " + ".join(terms) if terms else "0"


def element_arithmetic(a, b, op):
    """Dispatcher form of the field operations (``add``, ``sub``, ``mul``, ``inv``)."""
    if op == "inv":
        return a.inv()
    if isinstance(a, FieldElement) and isinstance(b, FieldElement) and a.field != b.field:
        raise FieldMismatch("operands live in different fields")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise InvalidInput(f"unknown operation {op!r}")


# ---------------------------------------------------------------- embeddings

def archimedean_places(field, precision=64):
    """Real places and one representative (Im > 0) per complex-conjugate pair."""
    if precision < 64:
        raise InvalidInput("precision must be at least 64 bits")
    m = list(field.min_poly)
    d = field.degree
    if d == 1:
        return [Place("arch", 0, True, 1, mpmath.mpf(-m[0]))]
    with mpmath.workprec(precision + 64):
        try:
            roots = mpmath.polyroots(list(reversed(m)), maxsteps=400, extraprec=2 * precision + 64)
        except mpmath.libmp.libhyper.NoConvergence as exc:
            raise PrecisionFailure(f"root finding did not converge: {exc}")
        dm = pderiv(m)
        refined = []
        for z in roots:
            for _ in range(60):
                fz = peval(m, z)
                dz = peval(dm, z)
                if dz == 0:
                    break
                step = fz / dz
                z -= step
                if abs(step) < mpmath.mpf(2) ** (-(precision + 32)) * max(1, abs(z)):
                    break
            scale = sum(abs(c) * abs(z) ** k for k, c in enumerate(m))
            if abs(peval(m, z)) > scale * mpmath.mpf(2) ** (-precision):
                raise PrecisionFailure("root could not be certified to the requested precision")
            refined.append(z)
        tol = mpmath.mpf(2) ** (-(precision // 2))
        reals, complexes = [], []
        for z in refined:
            if abs(mpmath.im(z)) < tol:
                x = mpmath.re(z)
                for _ in range(60):
                    step = peval(m, x) / peval(dm, x)
                    x -= step
                    if abs(step) < mpmath.mpf(2) ** (-(precision + 32)) * max(1, abs(x)):
                        break
                else:
                    raise PrecisionFailure("real Newton refinement did not converge")
                reals.append(x)
            elif mpmath.im(z) > 0:
                complexes.append(z)
    if len(reals) + 2 * len(complexes) != d:
        raise PrecisionFailure("real/complex classification is inconsistent with the degree")
    reals.sort()
    complexes.sort(key=lambda z: (mpmath.re(z), mpmath.im(z)))
    places = [Place("arch", i, True, 1, r) for i, r in enumerate(reals)]
    places += [Place("arch", len(reals) + i, False, 2, z) for i, z in enumerate(complexes)]
    return places


def all_embeddings(field, precision=64):
    """All d complex roots of the defining polynomial, ordered by (Re, Im)."""
    out = []
    for p in archimedean_places(field, precision):
        out.append(mpmath.mpc(p.root))
        if not p.is_real:
            out.append(mpmath.conj(p.root))
    out.sort(key=lambda z: (float(mpmath.re(z)), float(mpmath.im(z))))
    return out


# ---------------------------------------------------------------- absolute values

def _as_rational(x):
    if isinstance(x, FieldElement):
        if x.field.degree != 1:
            return None
        return x.coeffs[0]
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return None


def valuation(q, p):
    q = Fraction(q)
    if p < 2:
        raise InvalidInput("valuation needs a prime")
    if q == 0:
        raise InvalidInput("valuation of zero")
    v = 0
    n, d = q.numerator, q.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


def absolute_value(x, place):
    """|x|_place, exact (a Fraction) whenever x is rational and the place is real or finite."""
    q = _as_rational(x)
    if place.kind == "nonarch":
        if q is None:
            raise Unsupported("non-archimedean places are only supported over Q")
        if q == 0:
            return Fraction(0)
        return Fraction(place.prime) ** (-valuation(q, place.prime))
    if q is not None and place.is_real:
        return abs(q)
    if isinstance(x, FieldElement):
        return abs(x.embed(place))
    return abs(mpmath.mpf(q.numerator) / q.denominator)


def places_of_rational(x):
    """The infinite place of Q and every prime dividing numerator or denominator."""
    q = Fraction(x)
    if q == 0:
        raise InvalidInput("zero has no finite support of places")
    primes = set(factorint(abs(q.numerator))) | set(factorint(q.denominator))
    primes -= {1, -1}
    inf = Place("arch", 0, True, 1, mpmath.mpf(0))
    return [inf] + [Place("nonarch", prime=p) for p in sorted(primes)]


def product_formula(x):
    """Exact product of |x|_v**d_v over all places of Q; always 1 for x != 0."""
    out = Fraction(1)
    for place in places_of_rational(x):
        out *= absolute_value(x, place) ** place.local_degree
    return out


# ---------------------------------------------------------------- trace and norm

def trace_norm(field, x):
    """(trace, norm) of x from the regular representation."""
    x = field.coerce(x)
    m = x.mult_matrix()
    return sum(m[i][i] for i in range(field.degree)), linalg.det(m)


def charpoly(matrix):
    """Characteristic polynomial det(xI - M), coefficients from c0 upwards."""
    n = len(matrix)
    a = linalg.to_frac_matrix(matrix)
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    mk = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        prod = linalg.matmul(a, mk)
        mk = [[prod[i][j] + (coeffs[n - k + 1] if i == j else 0) for j in range(n)] for i in range(n)]
        am = linalg.matmul(a, mk)
        coeffs[n - k] = -sum(am[i][i] for i in range(n)) / k
    return coeffs


def minimal_polynomial(x):
    """Primitive integer minimal polynomial of a field element."""
    if x.is_zero():
        raise InvalidInput("zero has minimal polynomial x; height undefined")
    f = charpoly(x.mult_matrix())
    rad = pdivmod(f, pgcd(f, pderiv(f)))[0]
    return primitive_int(rad)
