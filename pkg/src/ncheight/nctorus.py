"""Noncommutative torus A_theta generated by unitaries U, V with VU = lambda UV,
lambda = exp(2 pi i theta).

For rational theta = p/q coefficients live in Q(zeta_q) and every identity is
exact; for other theta the coefficients are complex floats.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import cmath
import math
import random

from .errors import InvalidInput, ModeError
from .numfield import NumberField


def _parse_theta(theta):
    if isinstance(theta, Fraction):
        return theta
    if isinstance(theta, int):
        return Fraction(theta)
    if isinstance(theta, str):
        try:
            return Fraction(theta) if "/" in theta or theta.lstrip("-").isdigit() else float(theta)
        except ValueError:
            raise InvalidInput(f"cannot parse theta {theta!r}")
    if isinstance(theta, float):
        return theta
    raise InvalidInput(f"unsupported theta {theta!r}")


class NCTorusAlgebra:
    def __init__(self, theta, mode=None, trace_scale=1):
        th = _parse_theta(theta)
        if mode is None:
            mode = "exact" if isinstance(th, Fraction) else "numeric"
        if mode not in ("exact", "numeric"):
            raise InvalidInput(f"unknown mode {mode!r}")
        self.mode = mode
        self.trace_scale = trace_scale
        if mode == "exact":
            if not isinstance(th, Fraction):
                raise ModeError("exact mode needs a rational theta")
            self.theta = th
            self.q = th.denominator
            self.p = th.numerator % self.q
            self.field = NumberField.cyclotomic(self.q)
            zeta = self.field.gen
            self._phases = [zeta ** k for k in range(self.q)]
        else:
            self.theta = float(th)
            self.field = None
            self._lam = cmath.exp(2j * math.pi * self.theta)

    def __eq__(self, other):
        return isinstance(other, NCTorusAlgebra) and self.mode == other.mode and self.theta == other.theta \
            and self.trace_scale == other.trace_scale

    def __hash__(self):
        return hash((self.mode, self.theta))

    def phase(self, k):
        """lambda ** k."""
        if self.mode == "exact":
            return self._phases[(self.p * k) % self.q]
        return cmath.exp(2j * math.pi * self.theta * k)

    def coerce(self, c):
        if self.mode == "exact":
            if isinstance(c, complex):
                raise ModeError("complex coefficient in exact mode")
            if isinstance(c, str):
                c = Fraction(c)
            if isinstance(c, (list, tuple)):
                c = [Fraction(x) for x in c]
            return self.field.coerce(c)
        if hasattr(c, "field"):
            raise ModeError("number field coefficient in numeric mode")
        if isinstance(c, (list, tuple)):
            return complex(float(c[0]), float(c[1]))
        return complex(c)

    def conj(self, c):
        return self.field.conj(c) if self.mode == "exact" else c.conjugate()

    def _is_zero(self, c):
        return c.is_zero() if self.mode == "exact" else c == 0

    def element(self, terms):
        return NCTorusElement(self, {(int(n), int(m)): self.coerce(c) for (n, m), c in dict(terms).items()})

    def monomial(self, n, m, c=1):
        return self.element({(n, m): c})

    @property
    def one(self):
        return self.monomial(0, 0)

    @property
    def U(self):
        return self.monomial(1, 0)

    @property
    def V(self):
        return self.monomial(0, 1)

    def theta_json(self):
        if self.mode == "exact":
            return f"{self.theta.numerator}/{self.theta.denominator}"
        return repr(self.theta)


class NCTorusElement:
    __slots__ = ("algebra", "terms")

    def __init__(self, algebra, terms):
        self.algebra = algebra
        self.terms = {k: v for k, v in terms.items() if not algebra._is_zero(v)}

    def _same(self, other):
        if not isinstance(other, NCTorusElement):
            return self.algebra.element({(0, 0): other})
        if other.algebra != self.algebra:
            raise ModeError("elements of different noncommutative tori")
        return other

    def __add__(self, other):
        other = self._same(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return NCTorusElement(self.algebra, out)

    def __neg__(self):
        return NCTorusElement(self.algebra, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._same(other))

    def __mul__(self, other):
        other = self._same(other)
        alg = self.algebra
        out = {}
        for (n, m), c in self.terms.items():
            for (p, q), d in other.terms.items():
                k = (n + p, m + q)
                v = c * d * alg.phase(m * p)
                out[k] = out[k] + v if k in out else v
        return NCTorusElement(alg, out)

    def __rmul__(self, other):
        return self._same(other) * self

    def star(self):
        alg = self.algebra
        return NCTorusElement(alg, {(-n, -m): alg.conj(c) * alg.phase(n * m) for (n, m), c in self.terms.items()})

    def trace(self):
        alg = self.algebra
        c = self.terms.get((0, 0))
        if c is None:
            return alg.coerce(0)
        return c * alg.trace_scale

    def __eq__(self, other):
        if not isinstance(other, NCTorusElement):
            return NotImplemented
        return self.algebra == other.algebra and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms)))

    def __repr__(self):
        return "NCTorusElement(" + ", ".join(f"{c}*U^{n}V^{m}" for (n, m), c in sorted(self.terms.items())) + ")"

    def to_json(self):
        alg = self.algebra

        def enc(c):
            if alg.mode == "exact":
                return [str(x) for x in c.coeffs]
            return [repr(c.real), repr(c.imag)]
        return {"theta": alg.theta_json(),
                "terms": [{"n": n, "m": m, "coef": enc(c)} for (n, m), c in sorted(self.terms.items())]}

    @classmethod
    def from_json(cls, doc, trace_scale=1):
        try:
            alg = NCTorusAlgebra(doc["theta"], trace_scale=trace_scale)
            return alg.element({(t["n"], t["m"]): t["coef"] for t in doc["terms"]})
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed torus element: {exc}")


def nct_multiply(a, b):
    return a * b


def nct_star(a):
    return a.star()


def nct_trace(a):
    return a.trace()


def random_element(alg, rng, terms=10, span=3, coef=5, integral=True):
    out = {}
    for _ in range(rng.randint(1, terms)):
        k = (rng.randint(-span, span), rng.randint(-span, span))
        if alg.mode == "exact":
            cs = [rng.randint(-coef, coef) for _ in range(alg.field.degree)]
            if not integral:
                cs = [Fraction(c, rng.randint(1, 4)) for c in cs]
            out[k] = cs
        else:
            out[k] = complex(rng.uniform(-coef, coef), rng.uniform(-coef, coef))
    return alg.element(out)


def _integral(c):
    return all(x.denominator == 1 for x in c.coeffs)


@dataclass
class AxiomReport:
    items: dict = dc_field(default_factory=dict)

    @property
    def all_checkable_pass(self):
        return all(v["status"] == "pass" for v in self.items.values() if v["status"] != "not machine-checked")

    def to_json(self):
        return {"items": self.items, "all_checkable_pass": self.all_checkable_pass}


def verify_arithmetic_axioms(alg, claimed_order_elements=None, seed=0, samples=25, tol=1e-12):
    """Desk-scale checks of the arithmetic structure: order, involution, trace.

    The order is the Z[zeta_q]-span of the monomials U^n V^m (exact mode), whose
    trace values lie in Z[zeta_q], the ring of integers of the coefficient field.
    """
    rng = random.Random(seed)
    rep = {}
    exact = alg.mode == "exact"

    def eq(a, b):
        if exact:
            return a == b
        return all(abs(a.terms.get(k, 0) - b.terms.get(k, 0)) <= tol * (1 + abs(b.terms.get(k, 0)))
                   for k in set(a.terms) | set(b.terms))

    def ok(flag, detail=""):
        return {"status": "pass" if flag else "fail", "detail": detail}

    rep["finite_generation"] = ok(alg.U * alg.U.star() == alg.one and alg.V * alg.V.star() == alg.one,
                                  "generated by U, V and their adjoints; unitarity checked")
    order = [random_element(alg, rng) for _ in range(samples)]
    if not exact:
        rep["torsion_free"] = {"status": "not machine-checked", "detail": "numeric coefficients carry no order"}
        rep["coefficient_extension"] = {"status": "not machine-checked", "detail": "numeric mode"}
        rep["integrality"] = {"status": "not machine-checked", "detail": "numeric mode"}
    else:
        tf = all(not (a * k).terms == {} for a in order if a.terms for k in (2, 3, 5))
        rep["torsion_free"] = ok(tf, "k*a != 0 for sampled nonzero a and k in {2, 3, 5}")
        ext = True
        for a in (random_element(alg, rng, integral=False) for _ in range(samples)):
            den = 1
            for c in a.terms.values():
                for x in c.coeffs:
                    den = den * x.denominator // math.gcd(den, x.denominator)
            ext &= all(_integral(c) for c in (a * den).terms.values())
        rep["coefficient_extension"] = ok(ext, "every sampled algebra element is an order element over an integer")
        claimed = list(claimed_order_elements) if claimed_order_elements is not None else order
        closure = all(_integral(c) for a in order[:8] for b in order[:8] for c in (a * b).terms.values())
        bad = [i for i, a in enumerate(claimed) if not all(_integral(c) for c in a.terms.values())
               or not _integral(a.trace())]
        rep["integrality"] = ok(closure and not bad,
                                "trace maps the order into Z[zeta_q]" + (f"; failing elements {bad}" if bad else ""))
    inv = all(eq(a.star().star(), a) for a in order)
    anti = all(eq((a * b).star(), b.star() * a.star()) for a, b in zip(order, order[1:]))
    rep["involution"] = ok(inv and anti, "(a*)* = a and (ab)* = b*a* on samples")
    one_trace = alg.one.trace()
    rep["normalization"] = ok(one_trace == 1 if exact else abs(one_trace - 1) <= tol, f"tau(1) = {one_trace}")
    if exact:
        trace_ok = all((a * b).trace() == (b * a).trace() for a, b in zip(order, order[1:]))
    else:
        trace_ok = all(abs((a * b).trace() - (b * a).trace()) <= tol * (1 + abs((a * b).trace()))
                       for a, b in zip(order, order[1:]))
    rep["trace_property"] = ok(trace_ok, "tau(ab) = tau(ba) on samples")
    pos = True
    for a in order:
        t = (a.star() * a).trace()
        val = sum(abs(complex(_num(c, alg))) ** 2 for c in a.terms.values())
        tv = _num(t, alg) if exact else t
        pos &= abs(tv.imag) <= 1e-9 * (1 + val) and tv.real > 0
    rep["positivity"] = ok(pos, "tau(a* a) > 0 on samples")
    rep["c_star_completion"] = {"status": "not machine-checked", "detail": "analytic completion"}
    return AxiomReport(rep)


def _num(c, alg):
    """Complex value with zeta -> exp(2 pi i / q)."""
    if alg.mode != "exact":
        return c
    z = cmath.exp(2j * math.pi / alg.q)
    return sum(float(x) * z ** k for k, x in enumerate(c.coeffs))
