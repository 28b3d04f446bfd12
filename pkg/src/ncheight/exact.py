"""Exact positive reals of the form prod p**e with primes p and rational e.

Heights built from rational form values by products, quotients and rational
powers stay inside this set, so identities between them can be tested with
zero tolerance.
"""
from fractions import Fraction
import math

from sympy import factorint


class PowerProduct:
    __slots__ = ("exps",)

    def __init__(self, exps=None):
        self.exps = {p: Fraction(e) for p, e in (exps or {}).items() if e != 0}

    @classmethod
    def from_rational(cls, q):
        q = Fraction(q)
        if q <= 0:
            raise ValueError("PowerProduct needs a positive rational")
        exps = {}
        for p, e in factorint(q.numerator).items():
            exps[p] = exps.get(p, 0) + e
        for p, e in factorint(q.denominator).items():
            exps[p] = exps.get(p, 0) - e
        return cls(exps)

    @classmethod
    def one(cls):
        return cls()

    def __mul__(self, other):
        if not isinstance(other, PowerProduct):
            other = PowerProduct.from_rational(other)
        out = dict(self.exps)
        for p, e in other.exps.items():
            out[p] = out.get(p, 0) + e
        return PowerProduct(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, PowerProduct):
            other = PowerProduct.from_rational(other)
        return self * other ** -1

    def __pow__(self, e):
        e = Fraction(e)
        return PowerProduct({p: x * e for p, x in self.exps.items()})

    def __eq__(self, other):
        if not isinstance(other, PowerProduct):
            try:
                other = PowerProduct.from_rational(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.exps == other.exps

    def __hash__(self):
        return hash(frozenset(self.exps.items()))

    def log(self):
        return math.fsum(float(e) * math.log(p) for p, e in self.exps.items())

    def __float__(self):
        return math.exp(self.log())

    def is_rational(self):
        return all(e.denominator == 1 for e in self.exps.values())

    def as_fraction(self):
        if not self.is_rational():
            return None
        out = Fraction(1)
        for p, e in self.exps.items():
            out *= Fraction(p) ** int(e)
        return out

    def padic_abs(self, p):
        """|x|_p = p**(-v_p(x)) as a PowerProduct."""
        e = self.exps.get(p, Fraction(0))
        return PowerProduct({p: -e}) if e else PowerProduct()

    def to_json(self):
        frac = self.as_fraction()
        if frac is not None:
            return {"exact": f"{frac.numerator}/{frac.denominator}"}
        return {"prime_exponents": {str(p): f"{e.numerator}/{e.denominator}" for p, e in sorted(self.exps.items())}}

    def __repr__(self):
        if not self.exps:
            return "PowerProduct(1)"
        body = " * ".join(f"{p}^({e})" for p, e in sorted(self.exps.items()))
        return f"PowerProduct({body})"
