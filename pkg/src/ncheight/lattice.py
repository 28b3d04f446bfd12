"""Lattices given by a Gram matrix: LLL reduction, orthogonality defect,
k-volumes and Gromov mass.

Gram matrices are kept as exact rationals, so reduction is unimodular in exact
arithmetic and determinants are preserved on the nose.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import math
import random

import mpmath

from . import linalg
from .errors import InvalidInput, NotPositiveDefinite


def _exact_cholesky_ok(gram):
    """Positive definiteness via exact LDL^T pivots."""
    a = linalg.to_frac_matrix(gram)
    n = len(a)
    for c in range(n):
        p = a[c][c]
        if p <= 0:
            return False
        for r in range(c + 1, n):
            f = a[r][c] / p
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return True


class QuadLattice:
    """Rank-k lattice with basis rows and a positive-definite Gram matrix.

    ``basis`` may be omitted when only the Gram matrix is known.  ``transform``
    records the unimodular matrix T with current basis = T * original basis.
    """

    def __init__(self, basis=None, gram=None, transform=None):
        if basis is None and gram is None:
            raise InvalidInput("need a basis or a Gram matrix")
        self.basis = None if basis is None else [tuple(Fraction(x) for x in v) for v in basis]
        if gram is None:
            gram = [[sum((x * y for x, y in zip(u, v)), Fraction(0)) for v in self.basis] for u in self.basis]
        self.gram = [[Fraction(x) for x in row] for row in gram]
        k = len(self.gram)
        if k == 0:
            raise InvalidInput("empty lattice")
        if any(len(row) != k for row in self.gram):
            raise InvalidInput("Gram matrix must be square")
        if any(self.gram[i][j] != self.gram[j][i] for i in range(k) for j in range(i)):
            raise InvalidInput("Gram matrix must be symmetric")
        if self.basis is not None and len(self.basis) != k:
            raise InvalidInput("basis and Gram matrix disagree in rank")
        if not _exact_cholesky_ok(self.gram):
            raise NotPositiveDefinite("Gram matrix is not positive definite")
        self.transform = transform or [[int(i == j) for j in range(k)] for i in range(k)]

    @property
    def rank(self):
        return len(self.gram)

    def det(self):
        return linalg.det(self.gram)

    def norms(self):
        return [mpmath.sqrt(mpmath.mpf(g.numerator) / g.denominator) for g in
                (self.gram[i][i] for i in range(self.rank))]

    def to_json(self):
        doc = {"gram": [[_q(x) for x in row] for row in self.gram]}
        if self.basis is not None:
            doc["basis"] = [[_q(x) for x in v] for v in self.basis]
        return doc

    @classmethod
    def from_json(cls, doc):
        try:
            basis = doc.get("basis")
            gram = doc.get("gram")
            basis = None if basis is None else [[Fraction(x) for x in v] for v in basis]
            gram = None if gram is None else [[Fraction(x) for x in r] for r in gram]
        except (AttributeError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed lattice document: {exc}")
        return cls(basis, gram)


def _q(x):
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _reduced_trace(a):
    """Sum over blocks of Tr_{L|Q} of the matrix trace of an algebra element."""
    total = Fraction(0)
    for mat in a.blocks:
        t = sum((mat[r][r] for r in range(len(mat))), mat[0][0].field.zero)
        total += sum(t.mult_matrix()[i][i] for i in range(t.field.degree))
    return total


def lattice_from_trace_form(elements, form=None):
    """Gram matrix Tr(h(x_i, x_j)) for field or algebra elements.

    The default form is h(x, y) = x y* with the positive involution of the
    ambient algebra (plain multiplication x*conj(y) for number field elements).
    """
    from .numfield import FieldElement
    elements = list(elements)
    if not elements:
        raise InvalidInput("no basis elements")
    if form is None:
        if isinstance(elements[0], FieldElement):
            f = elements[0].field

            def form(x, y):
                return x * _positive_conj(f, y)
        else:
            def form(x, y):
                return x * y.star()

    def trace(v):
        if isinstance(v, FieldElement):
            m = v.mult_matrix()
            return sum(m[i][i] for i in range(v.field.degree))
        return _reduced_trace(v)

    gram = [[trace(form(x, y)) for y in elements] for x in elements]
    return QuadLattice(gram=gram)


def _positive_conj(field, y):
    """Complex conjugation when it is a field automorphism we know exactly."""
    r, s = field.signature()
    if s == 0:
        return y
    if field.degree == 2:
        return field.conj(y)
    raise InvalidInput("no exact complex conjugation for this field; pass an explicit form")


# ---------------------------------------------------------------- LLL

def _gso(gram):
    k = len(gram)
    mu = [[Fraction(0)] * k for _ in range(k)]
    bstar = [Fraction(0)] * k
    for i in range(k):
        for j in range(i):
            s = gram[i][j] - sum((mu[j][l] * mu[i][l] * bstar[l] for l in range(j)), Fraction(0))
            mu[i][j] = s / bstar[j]
        bstar[i] = gram[i][i] - sum((mu[i][l] ** 2 * bstar[l] for l in range(i)), Fraction(0))
    return mu, bstar


def _row_op(gram, t, basis, k, j, q):
    """b_k <- b_k - q b_j on Gram, transform and basis."""
    n = len(gram)
    gkj = gram[j]
    new_row = [gram[k][c] - q * gkj[c] for c in range(n)]
    new_row[k] = gram[k][k] - 2 * q * gram[k][j] + q * q * gram[j][j]
    for c in range(n):
        if c != k:
            gram[c][k] = new_row[c]
    gram[k] = new_row
    t[k] = [a - q * b for a, b in zip(t[k], t[j])]
    if basis is not None:
        basis[k] = tuple(a - q * b for a, b in zip(basis[k], basis[j]))


def _swap(gram, t, basis, k):
    gram[k], gram[k - 1] = gram[k - 1], gram[k]
    for row in gram:
        row[k], row[k - 1] = row[k - 1], row[k]
    t[k], t[k - 1] = t[k - 1], t[k]
    if basis is not None:
        basis[k], basis[k - 1] = basis[k - 1], basis[k]


def lll_reduce(lattice, delta=Fraction(3, 4)):
    """Exact LLL reduction with parameter delta in (1/4, 1)."""
    delta = Fraction(delta)
    if not Fraction(1, 4) < delta < 1:
        raise InvalidInput("delta must lie in (1/4, 1)")
    gram = [list(r) for r in lattice.gram]
    t = [list(r) for r in lattice.transform]
    basis = None if lattice.basis is None else list(lattice.basis)
    n = len(gram)
    k = 1
    while k < n:
        mu, bstar = _gso(gram)
        for j in range(k - 1, -1, -1):
            if abs(mu[k][j]) > Fraction(1, 2):
                q = round(mu[k][j])
                _row_op(gram, t, basis, k, j, q)
                mu, bstar = _gso(gram)
        if bstar[k] >= (delta - mu[k][k - 1] ** 2) * bstar[k - 1]:
            k += 1
        else:
            _swap(gram, t, basis, k)
            k = max(k - 1, 1)
    return QuadLattice(basis, gram, t)


def is_lll_reduced(lattice, delta=Fraction(3, 4)):
    mu, bstar = _gso(lattice.gram)
    n = lattice.rank
    size = all(abs(mu[i][j]) <= Fraction(1, 2) for i in range(n) for j in range(i))
    lovasz = all(bstar[k] >= (Fraction(delta) - mu[k][k - 1] ** 2) * bstar[k - 1] for k in range(1, n))
    return size and lovasz


def orthogonality_defect(lattice):
    """prod ||v_i|| / sqrt(det gram), as a float; always >= 1."""
    return float(mpmath.sqrt(_mp(_defect_sq(lattice.gram))))


def orthogonality_defect_sq(lattice):
    """Exact square of the orthogonality defect."""
    return _defect_sq(lattice.gram)


def _defect_sq(gram):
    prod = Fraction(1)
    for i in range(len(gram)):
        prod *= gram[i][i]
    return prod / linalg.det(gram)


def _mp(q):
    return mpmath.mpf(q.numerator) / q.denominator


# ---------------------------------------------------------------- volumes

@dataclass
class VolumeResult:
    value: float
    lll_value: float
    method: str
    basis_transform: list
    flags: dict = dc_field(default_factory=dict)


def _norm_product_sq(gram, rows):
    out = Fraction(1)
    for r in rows:
        out *= _qform(gram, r)
    return out


def _qform(gram, v):
    n = len(v)
    return sum((v[i] * v[j] * gram[i][j] for i in range(n) for j in range(n) if v[i] and v[j]), Fraction(0))


def short_vectors(gram, bound_sq, budget=200000):
    """All nonzero integer coefficient vectors (up to sign) with v G v^T <= bound_sq.

    Fincke-Pohst enumeration from a floating Cholesky factor with a safety
    margin; every candidate is confirmed with the exact Gram matrix.
    """
    k = len(gram)
    mu, bstar = _gso(gram)
    bs = [float(b) for b in bstar]
    muf = [[float(x) for x in row] for row in mu]
    bound = float(bound_sq) * (1 + 1e-9) + 1e-12
    out = []
    x = [0] * k
    count = 0

    def rec(i, rem):
        nonlocal count
        if i < 0:
            if any(x):
                count += 1
                if count > budget:
                    raise OverflowError
                out.append(tuple(x))
            return
        c = -sum(muf[j][i] * x[j] for j in range(i + 1, k))
        r = math.sqrt(max(rem, 0) / bs[i])
        for xi in range(math.ceil(c - r - 1e-9), math.floor(c + r + 1e-9) + 1):
            x[i] = xi
            used = (xi - c) ** 2 * bs[i]
            if used <= rem + 1e-9 * bound:
                rec(i - 1, rem - used)
        x[i] = 0

    rec(k - 1, bound)
    seen = set()
    uniq = []
    for v in out:
        key = v if next(a for a in v if a) > 0 else tuple(-a for a in v)
        if key in seen:
            continue
        seen.add(key)
        if _qform(gram, key) <= bound_sq:
            uniq.append(key)
    return uniq


def _min_product_basis(gram, best_sq, budget):
    """Search for a basis with smaller squared norm product than ``best_sq``."""
    k = len(gram)
    lam1 = min(gram[i][i] for i in range(k))
    vecs = short_vectors(gram, lam1, budget)
    lam1 = min(_qform(gram, v) for v in vecs)
    # the longest vector of an improving basis obeys ||b||^2 <= P / lambda_1^(k-1)
    radius_sq = best_sq / lam1 ** (k - 1)
    vecs = short_vectors(gram, radius_sq, budget)
    vecs.sort(key=lambda v: (_qform(gram, v), v))
    norms = [_qform(gram, v) for v in vecs]
    best = [best_sq, None]

    def rec(chosen, prod, start):
        if len(chosen) == k:
            d = linalg.det([list(vecs[c]) for c in chosen])
            if abs(d) == 1 and prod < best[0]:
                best[0] = prod
                best[1] = [vecs[c] for c in chosen]
            return
        remaining = k - len(chosen)
        for idx in range(start, len(vecs)):
            # vectors are sorted, so the remaining factors are at least norms[idx]
            if prod * norms[idx] ** remaining >= best[0]:
                break
            rows = [list(vecs[c]) for c in chosen] + [list(vecs[idx])]
            if linalg.rank(rows) < len(rows):
                continue
            rec(chosen + [idx], prod * norms[idx], idx + 1)

    rec([], Fraction(1), 0)
    return best


def k_volume(lattice, exact_for_small=True, budget=200000):
    """Product of basis norms over a reduced basis.

    LLL with delta = 0.99 always runs; for rank <= 4 an enumeration then looks
    for a basis with smaller norm product.
    """
    red = lll_reduce(lattice, Fraction(99, 100))
    lll_sq = _norm_product_sq(red.gram, [[int(i == j) for j in range(red.rank)] for i in range(red.rank)])
    lll_value = float(mpmath.sqrt(_mp(lll_sq)))
    if not exact_for_small or red.rank > 4:
        return VolumeResult(lll_value, lll_value, "lll", red.transform)
    try:
        best_sq, rows = _min_product_basis(red.gram, lll_sq, budget)
    except OverflowError:
        return VolumeResult(lll_value, lll_value, "lll", red.transform, {"enumeration_budget_exceeded": True})
    if rows is None:
        return VolumeResult(lll_value, lll_value, "enumeration", red.transform, {"lll_was_optimal": True})
    t = linalg.matmul([list(r) for r in rows], red.transform)
    return VolumeResult(float(mpmath.sqrt(_mp(best_sq))), lll_value, "enumeration",
                        [[int(x) for x in r] for r in t])


# ---------------------------------------------------------------- Gromov mass

def _vec_norm(v, norm):
    if norm == "euclidean":
        return mpmath.sqrt(sum(mpmath.mpf(x) ** 2 for x in v))
    if norm == "sup":
        return max(abs(mpmath.mpf(x)) for x in v)
    raise InvalidInput(f"unknown norm {norm!r}")


def _mpvec(v):
    return [mpmath.mpf(Fraction(x).numerator) / Fraction(x).denominator for x in v]


def gromov_mass(vectors, norm="euclidean", budget=2000, seed=0, scale=1):
    """Upper estimate for the mass of the simple k-vector scale * v_1 ^ ... ^ v_k.

    Candidates: the input factorization, its LLL reduction, seeded random
    unimodular changes of the reduced basis, and (for the Euclidean norm) the
    Gram-Schmidt factorization, which attains the Hadamard lower bound.
    Returns (estimate, factorization, flags).
    """
    vecs = [[Fraction(x) for x in v] for v in vectors]
    k = len(vecs)
    if k == 0:
        raise InvalidInput("need at least one vector")
    if linalg.rank(vecs) < k:
        raise InvalidInput("vectors are linearly dependent")
    s = abs(Fraction(scale))
    with mpmath.workdps(30):
        def mass(fact):
            return math.prod(float(_vec_norm(_mpvec(w), norm)) for w in fact)

        best_fact = vecs
        best = mass(vecs)
        red = lll_reduce(QuadLattice(vecs), Fraction(99, 100))
        cand = [list(r) for r in red.basis]
        if mass(cand) < best:
            best, best_fact = mass(cand), cand
        rng = random.Random(seed)
        for _ in range(budget):
            i, j = rng.sample(range(k), 2) if k > 1 else (0, 0)
            if i == j:
                break
            q = rng.choice((-1, 1))
            trial = [list(r) for r in best_fact]
            trial[i] = [a + q * b for a, b in zip(trial[i], trial[j])]
            m = mass(trial)
            if m < best:
                best, best_fact = m, trial
        flags = {"upper_bound": True}
        if norm == "euclidean":
            g = [[sum(x * y for x, y in zip(u, v)) for v in vecs] for u in vecs]
            mu, bstar = _gso(g)
            hadamard = math.sqrt(float(linalg.det(g)))
            if hadamard < best * (1 - 1e-15):
                ortho = []
                for i in range(k):
                    w = list(vecs[i])
                    for j in range(i):
                        w = [a - mu[i][j] * b for a, b in zip(w, ortho[j])]
                    ortho.append(w)
                best, best_fact = hadamard, ortho
            flags["attains_lower_bound"] = abs(best - hadamard) <= 1e-12 * hadamard
    return float(s) * best, best_fact, flags
