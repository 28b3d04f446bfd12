"""Heights of algebraic numbers, polynomials and polynomial maps.

Mahler measures are computed from certified roots after removing every
cyclotomic factor by exact division, so measure-one inputs (Kronecker's
case) come out as exactly 1.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import itertools
import math
import time

import mpmath
import numpy as np
from sympy import factorint, totient

from .errors import (BudgetExceeded, ConstraintViolation, InvalidInput, NumericalFailure,
                     PrecisionFailure, Unsupported)
from .numfield import (FieldElement, cyclotomic_poly, minimal_polynomial, pdivmod, pderiv, pgcd,
                       primitive_int, ptrim, valuation)


# ---------------------------------------------------------------- polynomials

class IntPolynomial:
    """Sparse polynomial in ``nvars`` variables with integer or rational coefficients."""

    def __init__(self, terms, nvars=1):
        self.nvars = int(nvars)
        if self.nvars < 1:
            raise InvalidInput("need at least one variable")
        clean = {}
        for exp, c in dict(terms).items():
            exp = (exp,) if isinstance(exp, int) else tuple(int(e) for e in exp)
            if len(exp) != self.nvars or any(e < 0 for e in exp):
                raise InvalidInput(f"bad exponent {exp}")
            c = Fraction(c)
            if c:
                clean[exp] = clean.get(exp, 0) + c
        self.terms = {e: c for e, c in clean.items() if c}

    @classmethod
    def univariate(cls, coeffs):
        """From coefficients listed from the constant term upwards."""
        return cls({(k,): c for k, c in enumerate(coeffs)}, 1)

    def coeffs(self):
        """Dense univariate coefficient list, constant term first."""
        if self.nvars != 1:
            raise InvalidInput("polynomial is not univariate")
        if not self.terms:
            return []
        d = max(e[0] for e in self.terms)
        return [self.terms.get((k,), Fraction(0)) for k in range(d + 1)]

    def is_zero(self):
        return not self.terms

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def __mul__(self, other):
        if self.nvars != other.nvars:
            raise InvalidInput("variable counts differ")
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return IntPolynomial(out, self.nvars)

    def __eq__(self, other):
        return isinstance(other, IntPolynomial) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def to_json(self):
        terms = []
        for e, c in sorted(self.terms.items()):
            coef = str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
            terms.append({"exp": list(e), "coef": coef})
        return {"vars": self.nvars, "terms": terms}

    @classmethod
    def from_json(cls, doc):
        try:
            n = int(doc["vars"])
            terms = {tuple(t["exp"]): Fraction(t["coef"]) for t in doc["terms"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed polynomial document: {exc}")
        return cls(terms, n)

    def __repr__(self):
        return f"IntPolynomial({self.to_json()})"


def _as_poly(f):
    if isinstance(f, IntPolynomial):
        return f
    return IntPolynomial.univariate(f)


# ---------------------------------------------------------------- Mahler measure

_PHI_TABLE = {}


def _cyclotomic_indices(deg):
    """All n with phi(n) <= deg, increasing."""
    if deg not in _PHI_TABLE:
        _PHI_TABLE[deg] = [n for n in range(1, 2 * deg * deg + 3) if totient(n) <= deg]
    return _PHI_TABLE[deg]


def strip_cyclotomic(coeffs):
    """Remove powers of x and all cyclotomic factors from an integer polynomial.

    Returns (rest, {n: multiplicity}, power_of_x).
    """
    f = ptrim([Fraction(c) for c in coeffs])
    if not f:
        raise InvalidInput("zero polynomial")
    k = 0
    while f[0] == 0:
        f = f[1:]
        k += 1
    found = {}
    for n in _cyclotomic_indices(len(f) - 1):
        phi = cyclotomic_poly(n)
        while len(f) >= len(phi):
            q, r = pdivmod(f, phi)
            if r:
                break
            f = q
            found[n] = found.get(n, 0) + 1
    return f, found, k


def _squarefree_parts(f):
    """Yun decomposition: list of (factor, multiplicity)."""
    out = []
    a = [Fraction(c) for c in f]
    b = pgcd(a, pderiv(a))
    if len(b) <= 1:
        return [(a, 1)]
    c = pdivmod(a, b)[0]
    d = ptrim([x - y for x, y in itertools.zip_longest(pdivmod(pderiv(a), b)[0], pderiv(c), fillvalue=0)])
    i = 1
    while len(c) > 1:
        g = pgcd(c, d)
        if len(g) > 1:
            out.append((g, i))
        c = pdivmod(c, g)[0]
        d = ptrim([x - y for x, y in itertools.zip_longest(pdivmod(d, g)[0], pderiv(c), fillvalue=0)])
        i += 1
    return out


def _roots(coeffs, dps):
    """Roots of a squarefree polynomial by mpmath, with a residual check."""
    with mpmath.workdps(dps):
        cs = [mpmath.mpf(c.numerator) / c.denominator for c in reversed(coeffs)]
        try:
            roots = mpmath.polyroots(cs, maxsteps=500, extraprec=4 * dps)
        except mpmath.libmp.libhyper.NoConvergence as exc:
            raise PrecisionFailure(f"root finding did not converge: {exc}")
    return roots


def _measure_of_rest(f, dps=40):
    """log M of a polynomial free of cyclotomic factors (rational coefficients)."""
    lead = abs(Fraction(f[-1]))
    if len(f) == 1:
        return mpmath.log(mpmath.mpf(lead.numerator) / lead.denominator)
    with mpmath.workdps(dps):
        total = mpmath.log(mpmath.mpf(lead.numerator) / lead.denominator)
        for part, mult in _squarefree_parts(f):
            monic = [Fraction(c) / part[-1] for c in part]
            for r in _roots(monic, dps):
                a = abs(r)
                if a > 1:
                    total += mult * mpmath.log(a)
        return +total


def log_mahler_measure(f):
    """(log M(f) as mpf, exact_one) for a univariate polynomial."""
    coeffs = _as_poly(f).coeffs()
    if not coeffs:
        raise InvalidInput("Mahler measure of the zero polynomial")
    coeffs = [Fraction(c) for c in coeffs]
    if all(c.denominator == 1 for c in coeffs):
        rest, _, _ = strip_cyclotomic(coeffs)
        if len(rest) == 1:
            lead = abs(rest[0])
            return mpmath.log(mpmath.mpf(lead.numerator) / lead.denominator), lead == 1
        return _measure_of_rest(rest), False
    f = ptrim(coeffs)
    while f[0] == 0:
        f = f[1:]
    return _measure_of_rest(f), False


def mahler_measure(f):
    """M(f) = |lead| * prod max(1, |root|) for a univariate polynomial."""
    lm, exact_one = log_mahler_measure(f)
    if exact_one:
        return 1.0
    return float(mpmath.exp(lm))


def _torus_log_mean(poly, g, chunk_rows=256):
    n = poly.nvars
    angles = np.exp(2j * np.pi * np.arange(g) / g)
    exps = np.array(list(poly.terms.keys()), dtype=np.int64)
    cs = np.array([float(c) for c in poly.terms.values()])
    last = exps[:, -1]
    last_pows = angles[None, :] ** last[:, None]          # terms x g
    row_sums = []
    singular = 0
    scale = float(np.sum(np.abs(cs)))
    for prefix in itertools.product(range(g), repeat=n - 2):
        pref_val = np.ones(len(cs), dtype=complex) * cs
        for k, idx in enumerate(prefix):
            pref_val = pref_val * angles[idx] ** exps[:, k]
        for start in range(0, g, chunk_rows):
            rows = np.arange(start, min(start + chunk_rows, g))
            # terms x rows
            mid = angles[rows][None, :] ** exps[:, n - 2][:, None]
            coef = pref_val[:, None] * mid                    # terms x rows
            vals = coef.T @ last_pows                           # rows x g
            mag = np.abs(vals)
            bad = mag <= 1e-13 * scale
            singular += int(bad.sum())
            logs = np.where(bad, 0.0, np.log(np.where(bad, 1.0, mag)))
            row_sums.extend(math.fsum(r) for r in logs)
    count = g ** n - singular
    if count == 0:
        raise NumericalFailure("the polynomial vanishes at every grid point")
    return math.fsum(row_sums) / count, singular


def mahler_measure_torus(f, grid=256):
    """Torus-average Mahler measure on a uniform grid.

    Returns (estimate, error_estimate, singular_points).  The error estimate is
    the difference to the run on the half-resolution subgrid.
    """
    poly = _as_poly(f)
    if poly.is_zero():
        raise InvalidInput("zero polynomial")
    if poly.nvars == 1:
        m = mahler_measure(poly)
        return m, 0.0, 0
    g = int(grid)
    if g < 4 or g % 2:
        raise InvalidInput("grid must be an even integer >= 4")
    fine, singular = _torus_log_mean(poly, g)
    coarse, _ = _torus_log_mean(poly, g // 2)
    est = math.exp(fine)
    return est, abs(est - math.exp(coarse)), singular


# ---------------------------------------------------------------- height reports

@dataclass
class HeightReport:
    H: float
    h: float
    per_place: list
    flags: dict = dc_field(default_factory=dict)
    exact_zero: bool = False

    def to_json(self, precision_bits=53):
        return {
            "H": repr(self.H),
            "h": repr(self.h),
            "per_place": [{"place": p, "contribution": repr(float(v))} for p, v in self.per_place],
            "flags": self.flags,
            "precision_bits": precision_bits,
        }


def _report(per_place, flags=None, exact_zero=False):
    h = math.fsum(float(v) for _, v in per_place)
    if exact_zero:
        h = 0.0
    return HeightReport(H=math.exp(h), h=h, per_place=per_place, flags=flags or {}, exact_zero=exact_zero)


def _min_poly_of(alpha):
    """Primitive integer minimal polynomial from any accepted specification."""
    if isinstance(alpha, tuple) and len(alpha) == 2 and isinstance(alpha[1], FieldElement):
        field, elem = alpha
        if elem.is_zero():
            raise InvalidInput("height of zero is undefined")
        return minimal_polynomial(field.coerce(elem))
    if isinstance(alpha, FieldElement):
        if alpha.is_zero():
            raise InvalidInput("height of zero is undefined")
        return minimal_polynomial(alpha)
    if isinstance(alpha, (int, Fraction, str)):
        q = Fraction(alpha)
        if q == 0:
            raise InvalidInput("height of zero is undefined")
        return primitive_int([-q, 1])
    if isinstance(alpha, IntPolynomial):
        alpha = alpha.coeffs()
    coeffs = [Fraction(c) for c in alpha]
    coeffs = ptrim(coeffs)
    if len(coeffs) < 2:
        raise InvalidInput("minimal polynomial must have degree >= 1")
    if any(c.denominator != 1 for c in coeffs):
        raise InvalidInput("minimal polynomial must have integer coefficients")
    ints = [int(c) for c in coeffs]
    g = 0
    for c in ints:
        g = math.gcd(g, c)
    if g != 1:
        raise InvalidInput("minimal polynomial must be primitive (content 1)")
    if ints[0] == 0:
        raise InvalidInput("zero is a root; height of zero is undefined")
    if len(ints) > 2:
        rest, found, _ = strip_cyclotomic(ints)
        if found and len(rest) > 1:
            raise InvalidInput("polynomial is reducible (has a cyclotomic factor)")
    if ints[-1] < 0:
        ints = [-c for c in ints]
    return ints


def _newton_polygon_valuations(coeffs, p):
    """p-adic valuations of the roots (with multiplicity) via the Newton polygon."""
    pts = [(k, valuation(c, p)) for k, c in enumerate(coeffs) if c != 0]
    hull = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    vals = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        slope = Fraction(y2 - y1, x2 - x1)
        vals.extend([-slope] * (x2 - x1))
    return vals


def _place_by_place(ints):
    """Height contributions place by place for degree <= 2."""
    d = len(ints) - 1
    per_place = []
    if d == 1:
        alpha = Fraction(-ints[0], ints[1])
        per_place.append(("inf", math.log(max(1, abs(alpha)))))
        for p in sorted(set(factorint(abs(alpha.numerator))) | set(factorint(alpha.denominator))):
            if p in (1, -1):
                continue
            ap = Fraction(p) ** (-valuation(alpha, p))
            per_place.append((f"p={p}", math.log(max(Fraction(1), ap))))
        return per_place
    with mpmath.workdps(40):
        roots = mpmath.polyroots([mpmath.mpf(c) for c in reversed(ints)], maxsteps=200, extraprec=100)
        idx = 0
        for r in sorted(roots, key=lambda z: (float(mpmath.re(z)), float(mpmath.im(z)))):
            if abs(mpmath.im(r)) < mpmath.mpf(10) ** -20:
                per_place.append((f"inf{idx}", float(mpmath.log(max(1, abs(r)))) / d))
                idx += 1
            elif mpmath.im(r) > 0:
                per_place.append((f"inf{idx}c", 2 * float(mpmath.log(max(1, abs(r)))) / d))
                idx += 1
    for p in sorted(factorint(abs(ints[-1]))):
        if p in (1, -1):
            continue
        vals = _newton_polygon_valuations(ints, p)
        contrib = sum(-v for v in vals if v < 0)
        per_place.append((f"p={p}", float(contrib) * math.log(p) / d))
    return per_place


def height_algebraic_number(alpha):
    """Absolute multiplicative height of an algebraic number.

    ``alpha`` is a rational, a primitive integer minimal polynomial (constant
    term first), a field element, or a pair (field, element).
    """
    ints = _min_poly_of(alpha)
    d = len(ints) - 1
    rest, found, _ = strip_cyclotomic(ints)
    if len(rest) == 1 and found:
        return _report([("all", 0.0)], {"root_of_unity": True, "degree": d}, exact_zero=True)
    lm = float(log_mahler_measure(ints)[0])
    general = lm / d
    flags = {"degree": d, "route": "mahler"}
    if d <= 2:
        per_place = _place_by_place(ints)
        direct = math.fsum(v for _, v in per_place)
        flags["route"] = "place-by-place"
        flags["route_agreement"] = abs(math.exp(direct) - math.exp(general))
        if flags["route_agreement"] > 1e-10 * math.exp(general):
            raise NumericalFailure("place-by-place and Mahler routes disagree")
        return _report(per_place, flags)
    return _report([("mahler", general)], flags)


def height_rational_exact(q):
    """H(p/q) = max(|p|, |q|), exact, from the product over all places of Q."""
    q = Fraction(q)
    if q == 0:
        raise InvalidInput("height of zero is undefined")
    out = max(Fraction(1), abs(q))
    for p in set(factorint(q.denominator)) - {1}:
        out *= max(Fraction(1), Fraction(p) ** (-valuation(q, p)))
    return out


# ---------------------------------------------------------------- polynomial heights

def _nonarch_log_norms(polys):
    """Sum over primes of log max_{i,k} |c_ik|_p."""
    coeffs = [c for f in polys for c in f.terms.values()]
    primes = set()
    for c in coeffs:
        primes |= set(factorint(abs(c.numerator))) | set(factorint(c.denominator))
    primes -= {1, -1}
    out = []
    for p in sorted(primes):
        vmin = min(valuation(c, p) for c in coeffs)
        if vmin:
            out.append((f"p={p}", -vmin * math.log(p)))
    return out


def _log_measure_any(f, grid):
    if f.nvars == 1:
        lm, exact_one = log_mahler_measure(f)
        return 0.0 if exact_one else float(lm), None
    nonconst = [k for k in range(f.nvars) if any(e[k] for e in f.terms)]
    if len(nonconst) <= 1:
        k = nonconst[0] if nonconst else 0
        uni = IntPolynomial({(e[k],): c for e, c in f.terms.items()}, 1)
        lm, exact_one = log_mahler_measure(uni)
        return 0.0 if exact_one else float(lm), None
    if len(f.terms) == 1:
        c = abs(next(iter(f.terms.values())))
        return math.log(c), None
    est, err, _ = mahler_measure_torus(f, grid)
    return math.log(est), err


def polynomial_height(f, field=None, grid=256):
    """h(f): non-archimedean log-norms plus log M(f) at the archimedean place."""
    if field is not None and field.degree != 1:
        raise Unsupported("non-archimedean norms are only supported over Q")
    f = _as_poly(f)
    if f.is_zero():
        raise InvalidInput("height of the zero polynomial")
    per_place = _nonarch_log_norms([f])
    lm, err = _log_measure_any(f, grid)
    per_place.append(("inf", lm))
    flags = {}
    if err is not None:
        flags["quadrature_error"] = err
    return _report(per_place, flags)


def _check_descent(ell, ideal_x, ideal_y):
    import sympy
    r = ell[0].nvars
    xs = sympy.symbols(f"x0:{r}")
    ys = sympy.symbols(f"y0:{len(ell)}")

    def to_expr(p, syms):
        return sum(sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*[s ** e for s, e in zip(syms, ex)])
                   for ex, c in p.terms.items())

    images = [to_expr(p, xs) for p in ell]
    gens_x = [sympy.expand(to_expr(p, xs)) for p in ideal_x]
    gens_y = [to_expr(p, ys) for p in ideal_y]
    pulled = [sympy.expand(g.subs(dict(zip(ys, images)), simultaneous=True)) for g in gens_y]
    if not gens_x:
        ok = all(p == 0 for p in pulled)
        return "validated", ok
    if all(sympy.Poly(g, *xs).total_degree() <= 1 for g in gens_x):
        sol = sympy.solve(gens_x, xs, dict=True)
        if not sol:
            return "validated", True
        ok = all(sympy.expand(p.subs(sol[0])) == 0 for p in pulled)
        return "validated", ok
    if len(gens_x) == 1:
        ok = all(sympy.div(sympy.Poly(p, *xs), sympy.Poly(gens_x[0], *xs))[1].is_zero for p in pulled)
        return "validated", ok
    return "skipped", None


def morphism_height(ell, constraints=None, grid=256):
    """Height of a polynomial map ell = (l_1, ..., l_n).

    Non-archimedean part: log max_i |l_i|_p.  Archimedean part: log max_i M(l_i).
    ``constraints`` is an optional pair (generators of I_X, generators of I_Y).
    """
    ell = [_as_poly(p) for p in ell]
    if not ell or all(p.is_zero() for p in ell):
        raise InvalidInput("the map must have a nonzero component")
    nv = {p.nvars for p in ell}
    if len(nv) != 1:
        raise InvalidInput("all components need the same number of variables")
    live = [p for p in ell if not p.is_zero()]
    per_place = _nonarch_log_norms(live)
    logs = [_log_measure_any(p, grid) for p in live]
    per_place.append(("inf", max(v for v, _ in logs)))
    flags = {"archimedean_rule": "max_i log M(l_i)"}
    if constraints is not None:
        ideal_x, ideal_y = constraints
        status, ok = _check_descent(ell, [_as_poly(g) for g in ideal_x], [_as_poly(g) for g in ideal_y])
        flags["descent"] = status
        if status == "validated" and not ok:
            raise ConstraintViolation("the map does not descend to the quotients")
    return _report(per_place, flags)


# ---------------------------------------------------------------- Lehmer search

def _batch_measure(polys):
    """Numerical M for an array of coefficient rows (constant term first)."""
    polys = np.asarray(polys, dtype=float)
    d = polys.shape[1] - 1
    lead = polys[:, -1]
    if d == 1:
        roots = (-polys[:, 0] / lead)[:, None]
    else:
        comp = np.zeros((len(polys), d, d))
        comp[:, 1:, :-1] = np.eye(d - 1)
        comp[:, :, -1] = -polys[:, :-1] / lead[:, None]
        roots = np.linalg.eigvals(comp)
    return np.abs(lead) * np.prod(np.maximum(1.0, np.abs(roots)), axis=1)


def _candidates(d, coeff_set, reciprocal_only):
    cs = sorted(set(coeff_set))
    symmetric = sorted(-c for c in cs) == cs
    nonzero = [c for c in cs if c != 0]
    lead_choices = [c for c in nonzero if c > 0] if symmetric else nonzero
    if reciprocal_only:
        half = d // 2
        for eps in (1, -1):
            for c0 in lead_choices:
                if eps * c0 not in cs:
                    continue
                for mid in itertools.product(cs, repeat=half):
                    low = (c0,) + mid
                    full = [0] * (d + 1)
                    ok = True
                    for k in range(half + 1):
                        full[k] = low[k] if k < len(low) else 0
                    for k in range(half + 1):
                        j = d - k
                        if j == k:
                            if eps == -1 and full[k] != 0:
                                ok = False
                            continue
                        v = eps * full[k]
                        if v not in cs:
                            ok = False
                            break
                        full[j] = v
                    if ok and full[d] != 0:
                        # a palindrome has lead == c0, fix its sign via symmetry
                        if symmetric and full[d] < 0:
                            continue
                        yield tuple(full)
    else:
        for lead in lead_choices:
            for c0 in nonzero:
                for mid in itertools.product(cs, repeat=d - 1):
                    yield (c0,) + mid + (lead,)


def count_candidates(degree_max, coeff_set, reciprocal_only):
    return sum(sum(1 for _ in _candidates(d, coeff_set, reciprocal_only)) for d in range(1, degree_max + 1))


@dataclass
class LehmerHit:
    coeffs: tuple
    M: float
    degree: int
    seconds: float

    def polynomial(self):
        return IntPolynomial.univariate(self.coeffs)


def lehmer_search(degree_max, coeff_set, reciprocal_only=False, budget=5_000_000):
    """Polynomials of degree <= degree_max with coefficients in coeff_set and least M > 1.

    Measure-one polynomials (products of cyclotomics and x) are excluded.  With
    a symmetric coefficient set only polynomials with positive leading
    coefficient are reported, since f and -f share M.
    """
    coeff_set = sorted(set(int(c) for c in coeff_set))
    if len(coeff_set) > 5 or degree_max > 14:
        raise BudgetExceeded("search box exceeds |coeff_set| <= 5, degree <= 14")
    if degree_max < 1:
        raise InvalidInput("degree_max must be >= 1")
    start = time.perf_counter()
    best = math.inf
    pool = []
    seen = 0
    for d in range(1, degree_max + 1):
        batch = []

        def flush():
            nonlocal best, pool
            if not batch:
                return
            ms = _batch_measure(batch)
            for row, m in zip(batch, ms):
                if m < 1 + 1e-4:
                    rest, _, _ = strip_cyclotomic(row)
                    if len(rest) == 1 and abs(rest[0]) == 1:
                        continue
                if m <= best * (1 + 1e-6) + 1e-9:
                    pool.append((row, m))
                    best = min(best, m)
            pool = [(r, m) for r, m in pool if m <= best * (1 + 1e-6) + 1e-9]
            batch.clear()

        for row in _candidates(d, coeff_set, reciprocal_only):
            seen += 1
            if seen > budget:
                flush()
                raise BudgetExceeded(f"more than {budget} candidates", partial=_finish(pool, start))
            batch.append(row)
            if len(batch) >= 20000:
                flush()
        flush()
    return _finish(pool, start)


def _finish(pool, start):
    hits = []
    for row, _ in pool:
        lm, exact_one = log_mahler_measure(list(row))
        if exact_one:
            continue
        hits.append((row, float(mpmath.exp(lm))))
    if not hits:
        return []
    m = min(v for _, v in hits)
    elapsed = time.perf_counter() - start
    out = [LehmerHit(tuple(int(c) for c in row), v, len(row) - 1, elapsed)
           for row, v in hits if abs(v - m) <= 1e-10 * m]
    out.sort(key=lambda h: (h.degree, h.coeffs))
    return out


def lehmer_csv(hits, timing=True):
    lines = ["degree,coefficients,M" + (",time" if timing else "")]
    for h in hits:
        row = f"{h.degree},\"{' '.join(str(c) for c in h.coeffs)}\",{h.M!r}"
        lines.append(row + (f",{h.seconds:.3f}" if timing else ""))
    return "\n".join(lines) + "\n"
