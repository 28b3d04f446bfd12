"""Semisimple algebras A = M_{n_1}(L_1) + ... + M_{n_s}(L_s) over Q.

Elements are tuples of square matrices with number-field entries.  The
Q-basis of A is e_rc * w_k, with w_k running over the declared integral basis
of the block field, so the default order is spanned by the basis itself.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import math

import mpmath

from . import linalg
from .errors import (FieldError, FieldMismatch, InvalidInput, InvalidScaling, NotFullLattice,
                     NotIdempotent, Unsupported)
from .numfield import NumberField, all_embeddings


QQ = NumberField.rationals()


def _field(desc):
    if isinstance(desc, NumberField):
        return desc
    if desc is None or desc in ("Q", "QQ"):
        return QQ
    try:
        return NumberField(desc)
    except FieldError:
        raise
    except Exception as exc:
        raise FieldError(f"cannot build a number field from {desc!r}: {exc}")


def _involution_map(field, policy):
    if policy == "identity":
        return lambda x: x
    if policy == "galois":
        if field._conj_image is None:
            raise FieldError("field has no declared nontrivial automorphism")
        return field.conj
    if policy != "auto":
        raise InvalidInput(f"unknown involution policy {policy!r}")
    if field.degree == 1 or field.signature()[1] == 0:
        return lambda x: x
    if field.signature()[0] == 0 and field._conj_image is not None:
        return field.conj
    raise Unsupported("no positive involution is known for this field; pick one explicitly")


class AlgebraElement:
    __slots__ = ("algebra", "blocks")

    def __init__(self, algebra, blocks):
        self.algebra = algebra
        self.blocks = tuple(tuple(tuple(row) for row in m) for m in blocks)

    def _check(self, other):
        if not isinstance(other, AlgebraElement):
            return self.algebra.scalar(other)
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise FieldMismatch("elements of different algebras")
        return other

    def __add__(self, other):
        other = self._check(other)
        return AlgebraElement(self.algebra, [[[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(m1, m2)]
                                             for m1, m2 in zip(self.blocks, other.blocks)])

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement(self.algebra, [[[-a for a in r] for r in m] for m in self.blocks])

    def __sub__(self, other):
        return self + (-self._check(other))

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return AlgebraElement(self.algebra, [[[a * other for a in r] for r in m] for m in self.blocks])
        other = self._check(other)
        out = []
        for m1, m2, (n, f) in zip(self.blocks, other.blocks, self.algebra.blocks):
            out.append([[sum((m1[i][k] * m2[k][j] for k in range(n)), f.zero) for j in range(n)]
                        for i in range(n)])
        return AlgebraElement(self.algebra, out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def star(self):
        return self.algebra.star(self)

    def is_zero(self):
        return all(a.is_zero() for m in self.blocks for r in m for a in r)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.algebra.scalar(other)
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.algebra == other.algebra and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"AlgebraElement({[[list(r) for r in m] for m in self.blocks]})"

    def to_json(self):
        return [[[_fe_json(a) for a in r] for r in m] for m in self.blocks]


def _fe_json(a):
    if a.field.degree == 1:
        return _q(a.coeffs[0])
    return [_q(c) for c in a.coeffs]


def _q(x):
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class SemisimpleAlgebra:
    """Direct sum of matrix algebras M_n(L) over Q, with a blockwise involution."""

    def __init__(self, blocks, involution="auto"):
        blocks = list(blocks)
        if not blocks:
            raise FieldError("need at least one block")
        parsed = []
        for b in blocks:
            try:
                n, f = b
            except (TypeError, ValueError):
                raise FieldError(f"block {b!r} is not a pair (n, field)")
            if not isinstance(n, int) or n < 1:
                raise FieldError("block size must be a positive integer")
            parsed.append((n, _field(f)))
        self.blocks = tuple(parsed)
        pols = involution if isinstance(involution, (list, tuple)) else [involution] * len(parsed)
        if len(pols) != len(parsed):
            raise InvalidInput("one involution policy per block")
        self.involution = tuple(pols)
        self._conj = [_involution_map(f, p) for (n, f), p in zip(parsed, pols)]
        self.dim = sum(n * n * f.degree for n, f in parsed)
        self._index = []
        for b, (n, f) in enumerate(parsed):
            for r in range(n):
                for c in range(n):
                    for k in range(f.degree):
                        self._index.append((b, r, c, k))
        # rows of the integral basis in power coordinates, inverted once
        self._ib_inv = []
        for n, f in parsed:
            m = [list(w.coeffs) for w in f.integral_basis]
            self._ib_inv.append(linalg.inverse(m))

    def __eq__(self, other):
        return isinstance(other, SemisimpleAlgebra) and self.blocks == other.blocks \
            and self.involution == other.involution

    def __hash__(self):
        return hash((tuple((n, f.min_poly) for n, f in self.blocks), self.involution))

    def __repr__(self):
        return "SemisimpleAlgebra(" + ", ".join(f"M{n}({f.min_poly})" for n, f in self.blocks) + ")"

    @property
    def center_fields(self):
        return [f for _, f in self.blocks]

    def element(self, blocks):
        out = []
        if len(blocks) != len(self.blocks):
            raise InvalidInput("wrong number of blocks")
        for m, (n, f) in zip(blocks, self.blocks):
            if len(m) != n or any(len(r) != n for r in m):
                raise InvalidInput(f"block must be {n}x{n}")
            out.append([[f.coerce(a) if not isinstance(a, str) else f.coerce(Fraction(a)) for a in r]
                        for r in m])
        return AlgebraElement(self, out)

    def scalar(self, c):
        c = Fraction(c)
        return AlgebraElement(self, [[[f.coerce(c) if i == j else f.zero for j in range(n)] for i in range(n)]
                                     for n, f in self.blocks])

    def zero(self):
        return self.scalar(0)

    def one(self):
        return self.scalar(1)

    def unit(self, b, r, c, value=1):
        """value * e_rc in block b."""
        mats = []
        for i, (n, f) in enumerate(self.blocks):
            v = f.coerce(value) if i == b else None
            mats.append([[v if (i == b and rr == r and cc == c) else f.zero for cc in range(n)]
                         for rr in range(n)])
        return AlgebraElement(self, mats)

    def basis(self):
        return [self.unit(b, r, c, self.blocks[b][1].integral_basis[k]) for b, r, c, k in self._index]

    def coords(self, x):
        out = []
        for b, (m, (n, f)) in enumerate(zip(x.blocks, self.blocks)):
            inv = self._ib_inv[b]
            for r in range(n):
                for c in range(n):
                    v = m[r][c].coeffs
                    # v = sum_k a_k w_k  <=>  a = v * inv
                    out.extend(sum((v[i] * inv[i][k] for i in range(f.degree)), Fraction(0))
                               for k in range(f.degree))
        return out

    def from_coords(self, coords):
        if len(coords) != self.dim:
            raise InvalidInput("wrong number of coordinates")
        mats = [[[f.zero for _ in range(n)] for _ in range(n)] for n, f in self.blocks]
        for (b, r, c, k), a in zip(self._index, coords):
            if a:
                mats[b][r][c] = mats[b][r][c] + self.blocks[b][1].integral_basis[k] * Fraction(a)
        return AlgebraElement(self, mats)

    def star(self, x):
        return AlgebraElement(self, [[[conj(m[c][r]) for c in range(n)] for r in range(n)]
                                     for m, (n, f), conj in zip(x.blocks, self.blocks, self._conj)])

    def conj_scalar(self, b, a):
        return self._conj[b](a)

    def to_json(self):
        return {"base": QQ.to_json(),
                "blocks": [{"n": n, "ext_min_poly": list(f.min_poly)} for n, f in self.blocks]}

    @classmethod
    def from_json(cls, doc):
        try:
            blocks = [(int(b["n"]), b.get("ext_min_poly", [0, 1])) for b in doc["blocks"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed algebra document: {exc}")
        base = doc.get("base")
        if base is not None and list(NumberField.from_json(base).min_poly) != [0, 1]:
            raise Unsupported("only the base field Q is supported")
        return cls(blocks)


@dataclass
class Order:
    algebra: SemisimpleAlgebra
    basis: list

    @property
    def matrix(self):
        return [self.algebra.coords(b) for b in self.basis]

    def coords_in(self, x):
        """Coordinates of x in the order basis (rational, None if outside the Q-span)."""
        return linalg.solve(linalg.transpose(self.matrix), self.algebra.coords(x))


def make_algebra(blocks, involution="auto"):
    alg = SemisimpleAlgebra(blocks, involution)
    return alg, Order(alg, alg.basis())


def validate_order(algebra, basis):
    """List of violations (empty when the basis spans an order)."""
    basis = list(basis)
    problems = []
    mat = [algebra.coords(b) for b in basis]
    if not mat or linalg.rank(mat) < algebra.dim:
        problems.append(f"fullness: rank {linalg.rank(mat) if mat else 0} < dim {algebra.dim}")
        return problems
    if len(basis) > algebra.dim:
        problems.append("independence: more generators than the dimension")
        return problems
    mt = linalg.transpose(mat)

    def integral(x):
        sol = linalg.solve(mt, algebra.coords(x))
        return sol is not None and all(c.denominator == 1 for c in sol)

    if not integral(algebra.one()):
        problems.append("unit: 1 is not in the integer span")
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if not integral(a * b):
                problems.append(f"closure: product of basis elements {i} and {j} leaves the integer span")
    return problems


def left_mult_matrix(algebra, x):
    cols = [algebra.coords(x * b) for b in algebra.basis()]
    return linalg.transpose(cols)


def regular_trace_norm(algebra, x):
    m = left_mult_matrix(algebra, x)
    return sum((m[i][i] for i in range(len(m))), Fraction(0)), linalg.det(m)


@dataclass
class NormDegree:
    N: Fraction
    deg: float
    abs_N: Fraction
    flags: dict = dc_field(default_factory=dict)


def _index_of(order, elements):
    """#(O / span_Z(elements)), after checking containment and fullness."""
    alg = order.algebra
    mt = linalg.transpose(order.matrix)
    rows = []
    for x in elements:
        sol = linalg.solve(mt, alg.coords(x))
        if sol is None or any(c.denominator != 1 for c in sol):
            raise InvalidScaling("scaled ideal is not contained in the order")
        rows.append([int(c) for c in sol])
    inv = linalg.smith_invariants(rows)
    if len(inv) < alg.dim:
        raise NotFullLattice(f"ideal spans rank {len(inv)} < {alg.dim}")
    return math.prod(inv)


def ideal_norm_degree(order, generators, r=1, a_inf=None, r_alt=None):
    """Norm N(a) = #(O/a r) / #(O/O r) of the left ideal a = sum O g, and deg = -log N."""
    alg = order.algebra
    gens = list(generators)
    if not gens:
        raise NotFullLattice("no generators")

    def norm_for(rr):
        rr = Fraction(rr)
        if rr == 0 or rr.denominator != 1:
            raise InvalidScaling("scaling must be a nonzero integer")
        num = _index_of(order, [o * g * rr for o in order.basis for g in gens])
        den = _index_of(order, [o * rr for o in order.basis])
        return Fraction(num, den)

    n = norm_for(r)
    flags = {}
    if r_alt is not None:
        flags["r_independent"] = norm_for(r_alt) == n
    abs_n = n
    if a_inf is not None:
        _, na = regular_trace_norm(alg, a_inf)
        if na == 0:
            raise InvalidInput("archimedean component must be invertible")
        abs_n = n * abs(na)
    return NormDegree(n, -math.log(n.numerator) + math.log(n.denominator), abs_n, flags)


# ---------------------------------------------------------------- HH_0 and ranks

class CenterElement:
    """Element of L_1 + ... + L_s, one component per block."""

    __slots__ = ("fields", "comps")

    def __init__(self, fields, comps):
        self.fields = tuple(fields)
        self.comps = tuple(f.coerce(c) for f, c in zip(self.fields, comps))
        if len(self.comps) != len(self.fields):
            raise InvalidInput("one component per block")

    def __add__(self, other):
        return CenterElement(self.fields, [a + b for a, b in zip(self.comps, other.comps)])

    def __mul__(self, other):
        return CenterElement(self.fields, [a * b for a, b in zip(self.comps, other.comps)])

    def __eq__(self, other):
        return isinstance(other, CenterElement) and self.comps == other.comps

    def __hash__(self):
        return hash(self.comps)

    def __repr__(self):
        return f"CenterElement({list(self.comps)})"

    def is_rational(self):
        return all(c.is_rational() for c in self.comps)

    def rational_comps(self):
        return [c.to_rational() for c in self.comps]

    def to_json(self):
        return [_fe_json(c) for c in self.comps]


def hh0_class(x):
    """Class of x in HH_0(A): the matrix trace of each block."""
    alg = x.algebra
    return CenterElement(alg.center_fields,
                         [sum((m[i][i] for i in range(n)), f.zero) for m, (n, f) in zip(x.blocks, alg.blocks)])


def _flatten(matrix_of_elements):
    """An m x m matrix over A as the block list of M_m(A) = sum M_{m n_i}(L_i)."""
    m = len(matrix_of_elements)
    alg = matrix_of_elements[0][0].algebra
    out = []
    for b, (n, f) in enumerate(alg.blocks):
        big = [[None] * (m * n) for _ in range(m * n)]
        for i in range(m):
            for j in range(m):
                blk = matrix_of_elements[i][j].blocks[b]
                for r in range(n):
                    for c in range(n):
                        big[i * n + r][j * n + c] = blk[r][c]
        out.append((big, f))
    return out


def _matmul_f(a, b, f):
    n = len(a)
    return [[sum((a[i][k] * b[k][j] for k in range(n)), f.zero) for j in range(n)] for i in range(n)]


def hattori_stallings_rank(algebra, e=None, generators=None, duals=None):
    """Rank of a finitely generated projective module as an element of HH_0(A).

    Either an idempotent ``e`` (an element of A or a square matrix over A) or a
    generator family x_k in A^m (rows) with dual functionals xi_k given as
    columns in A^m, xi_k(x) = sum_j x_j xi_kj.
    """
    if e is not None:
        mat = [[e]] if isinstance(e, AlgebraElement) else [list(r) for r in e]
        if any(len(r) != len(mat) for r in mat):
            raise InvalidInput("idempotent must be a square matrix over A")
        comps = []
        for big, f in _flatten(mat):
            if _matmul_f(big, big, f) != big:
                raise NotIdempotent("e*e != e")
            comps.append(sum((big[i][i] for i in range(len(big))), f.zero))
        return CenterElement(algebra.center_fields, comps)
    if generators is None or duals is None:
        raise InvalidInput("need an idempotent or a generator/dual family")
    gens = [list(g) for g in generators]
    dls = [list(d) for d in duals]
    if len(gens) != len(dls):
        raise InvalidInput("one dual functional per generator")
    if not gens:
        return CenterElement(algebra.center_fields, [f.zero for f in algebra.center_fields])

    def apply(xi, x):
        acc = algebra.zero()
        for a, b in zip(x, xi):
            acc = acc + a * b
        return acc

    for x in gens:
        rebuilt = [algebra.zero() for _ in x]
        for g, xi in zip(gens, dls):
            c = apply(xi, x)
            rebuilt = [u + c * v for u, v in zip(rebuilt, g)]
        if rebuilt != x:
            raise NotIdempotent("dual family does not reproduce the generators")
    total = algebra.zero()
    for g, xi in zip(gens, dls):
        total = total + apply(xi, g)
    return hh0_class(total)


class CenterEmbedding:
    """sigma(r) = sum_i sigma_i(r_i) for a chosen complex root of each block field."""

    def __init__(self, algebra, policy="largest"):
        if policy not in ("first", "largest"):
            raise InvalidInput(f"unknown policy {policy!r}")
        self.policy = policy
        self.roots = []
        for f in algebra.center_fields:
            roots = all_embeddings(f)
            self.roots.append(roots[-1] if policy == "largest" else roots[0])

    def __call__(self, z):
        return sum((mpmath.polyval(list(reversed([mpmath.mpf(c.numerator) / c.denominator for c in comp.coeffs])),
                                   root) for comp, root in zip(z.comps, self.roots)), mpmath.mpf(0))

    def real(self, z, tol=1e-30):
        """(real part, flags) with a flag when the value is not real."""
        v = mpmath.mpc(self(z))
        return mpmath.re(v), {"nonreal": abs(mpmath.im(v)) > tol}

    def to_json(self):
        return {"policy": self.policy, "roots": [mpmath.nstr(r, 20) for r in self.roots]}


def embed_center(algebra, policy="largest"):
    return CenterEmbedding(algebra, policy)
