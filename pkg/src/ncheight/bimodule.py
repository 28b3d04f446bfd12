"""Hermitian bimodules between semisimple algebras over Q, their tensor
products, and height functionals.

Model.  For left block i = M_n(L) and right block j = M_m(L) over the same
field L, a component is the space of n x d x m arrays over L; A acts on the
first index, B on the last.  The middle (multiplicity) index carries diagonal
positive weights P (left form) and Q (right form):

    h_A(x, y)[r, r'] = sum_{a,s} x[r,a,s] P_a conj(y[r',a,s])
    h_B(x, y)[s, s'] = sum_{r,a} conj(x[r,a,s]) Q_a y[r,a,s']

Multiplicities (N, M) in the input give d = N*M.  A bimodule stores at most one
component per block pair; components for the same pair are concatenated.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache
import math
import random

import mpmath

from . import linalg
from .errors import (BudgetExceeded, CompositionError, FieldMismatch, InvalidInput,
                     NotInvertible, NotPositive, NotReconstructing, PositivityViolation, Unsupported,
                     ZeroModule)
from .exact import PowerProduct
from .lattice import QuadLattice, k_volume, lattice_from_trace_form
from .numfield import FieldElement, all_embeddings
from .ssalgebra import AlgebraElement, SemisimpleAlgebra, hattori_stallings_rank


# ---------------------------------------------------------------- scalars

@lru_cache(maxsize=None)
def _roots(min_poly):
    from .numfield import NumberField
    return tuple(all_embeddings(NumberField(list(min_poly))))


def _embed(x, which=-1):
    """sigma~(x) for the root chosen by the 'largest' policy."""
    f = x.field
    if f.degree == 1:
        c = x.coeffs[0]
        return mpmath.mpf(c.numerator) / c.denominator
    root = _roots(f.min_poly)[which]
    return mpmath.polyval([mpmath.mpf(c.numerator) / c.denominator for c in reversed(x.coeffs)], root)


def _is_positive(x, conj):
    if conj(x) != x:
        return False
    if x.is_rational():
        return x.coeffs[0] > 0
    for root in _roots(x.field.min_poly):
        v = mpmath.polyval([mpmath.mpf(c.numerator) / c.denominator for c in reversed(x.coeffs)], root)
        if abs(mpmath.im(v)) > mpmath.mpf(10) ** -20 or mpmath.re(v) <= 0:
            return False
    return True


def _scalar_json(x):
    if x.field.degree == 1:
        c = x.coeffs[0]
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return [str(c) for c in x.coeffs]


def _coerce_scalar(field, v):
    if isinstance(v, str):
        return field.coerce(Fraction(v))
    if isinstance(v, (list, tuple)) and v and not isinstance(v[0], (list, tuple)):
        return field.coerce([Fraction(c) for c in v])
    return field.coerce(v)


# ---------------------------------------------------------------- components

@dataclass(frozen=True)
class Component:
    i: int
    j: int
    P: tuple
    Q: tuple
    central: bool = True

    @property
    def d(self):
        return len(self.P)

    @property
    def field(self):
        return self.P[0].field


def _weight_from_beta(field, n, beta, conj, side):
    """Scalar weight and centrality flag from beta in L or in M_n(L).

    Left weights use beta beta*, right weights beta* beta.
    """
    if beta is None:
        return field.one, True
    if isinstance(beta, (list, tuple)) and beta and isinstance(beta[0], (list, tuple)):
        mat = [[_coerce_scalar(field, v) for v in row] for row in beta]
        if len(mat) != n or any(len(r) != n for r in mat):
            raise InvalidInput(f"beta must be a {n}x{n} matrix")
        if _field_det(mat, field).is_zero():
            raise NotInvertible("beta is singular")
        star = [[conj(mat[c][r]) for c in range(n)] for r in range(n)]
        a, b = (mat, star) if side == "left" else (star, mat)
        prod = [[sum((a[r][k] * b[k][c] for k in range(n)), field.zero) for c in range(n)] for r in range(n)]
        lam = prod[0][0]
        central = all(prod[r][c] == (lam if r == c else field.zero) for r in range(n) for c in range(n))
        if central:
            return lam, True
        return sum((prod[r][r] for r in range(n)), field.zero) / n, False
    b = _coerce_scalar(field, beta)
    if b.is_zero():
        raise NotInvertible("beta = 0 is not invertible")
    return b * conj(b), True


def _field_det(mat, field):
    n = len(mat)
    a = [list(r) for r in mat]
    det = field.one
    for c in range(n):
        piv = next((r for r in range(c, n) if not a[r][c].is_zero()), None)
        if piv is None:
            return field.zero
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det = det * a[c][c]
        inv = a[c][c].inv()
        for r in range(c + 1, n):
            if not a[r][c].is_zero():
                f = a[r][c] * inv
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


class HermitianBimodule:
    """A-B bimodule with standard hermitian structures; see the module docstring."""

    def __init__(self, left, right, components):
        self.left = left
        self.right = right
        merged = {}
        for c in components:
            if not (0 <= c.i < len(left.blocks)) or not (0 <= c.j < len(right.blocks)):
                raise InvalidInput(f"component ({c.i}, {c.j}) refers to a missing block")
            if left.blocks[c.i][1] != right.blocks[c.j][1]:
                raise FieldMismatch(f"blocks {c.i} and {c.j} have different centers")
            if len(c.P) != len(c.Q) or not c.P:
                raise InvalidInput("a component needs equally many left and right weights")
            lconj = lambda x, b=c.i: left.conj_scalar(b, x)
            rconj = lambda x, b=c.j: right.conj_scalar(b, x)
            for w in c.P:
                if not _is_positive(w, lconj):
                    raise NotPositive(f"left weight {w} is not totally positive")
            for w in c.Q:
                if not _is_positive(w, rconj):
                    raise NotPositive(f"right weight {w} is not totally positive")
            key = (c.i, c.j)
            if key in merged:
                old = merged[key]
                c = Component(c.i, c.j, old.P + c.P, old.Q + c.Q, old.central and c.central)
            merged[key] = c
        self.components = tuple(merged[k] for k in sorted(merged))

    # -- bookkeeping
    def n(self, i):
        return self.left.blocks[i][0]

    def m(self, j):
        return self.right.blocks[j][0]

    def dim(self):
        return sum(self.n(c.i) * c.d * self.m(c.j) * c.field.degree for c in self.components)

    def multiplicity_data(self):
        return tuple((c.i, c.j, c.d) for c in self.components)

    def key(self, refined=False):
        """Isomorphism key: multiplicity data, optionally with the weight multisets."""
        base = (hash(self.left), hash(self.right), self.multiplicity_data())
        if not refined:
            return base
        weights = tuple(tuple(sorted((p.coeffs, q.coeffs) for p, q in zip(c.P, c.Q))) for c in self.components)
        return base + (weights,)

    def component(self, i, j):
        return next((c for c in self.components if (c.i, c.j) == (i, j)), None)

    def __eq__(self, other):
        return isinstance(other, HermitianBimodule) and self.left == other.left and \
            self.right == other.right and self.components == other.components

    def __hash__(self):
        return hash((self.left, self.right, self.components))

    def __repr__(self):
        return f"HermitianBimodule({list(self.multiplicity_data())})"

    # -- elements: dict (i, j) -> n x d x m nested lists
    def zero_element(self):
        return {(c.i, c.j): [[[c.field.zero] * self.m(c.j) for _ in range(c.d)] for _ in range(self.n(c.i))]
                for c in self.components}

    def basis_elements(self):
        """Q-basis: unit arrays times power-basis monomials, in coordinate order."""
        out = []
        for c in self.components:
            for r in range(self.n(c.i)):
                for a in range(c.d):
                    for s in range(self.m(c.j)):
                        for k in range(c.field.degree):
                            x = self.zero_element()
                            x[(c.i, c.j)][r][a][s] = c.field.power(k)
                            out.append(x)
        return out

    def coords(self, x):
        out = []
        for c in self.components:
            for plane in x[(c.i, c.j)]:
                for row in plane:
                    for v in row:
                        out.extend(v.coeffs)
        return out

    def random_element(self, rng, lo=-3, hi=3):
        x = self.zero_element()
        for c in self.components:
            arr = x[(c.i, c.j)]
            for r in range(self.n(c.i)):
                for a in range(c.d):
                    for s in range(self.m(c.j)):
                        arr[r][a][s] = c.field.element([rng.randint(lo, hi) for _ in range(c.field.degree)])
        return x

    def act_left(self, g, x):
        out = self.zero_element()
        for c in self.components:
            blk = g.blocks[c.i]
            n, arr = self.n(c.i), x[(c.i, c.j)]
            res = out[(c.i, c.j)]
            for r in range(n):
                for a in range(c.d):
                    for s in range(self.m(c.j)):
                        res[r][a][s] = sum((blk[r][t] * arr[t][a][s] for t in range(n)), c.field.zero)
        return out

    def act_right(self, x, b):
        out = self.zero_element()
        for c in self.components:
            blk = b.blocks[c.j]
            m, arr = self.m(c.j), x[(c.i, c.j)]
            res = out[(c.i, c.j)]
            for r in range(self.n(c.i)):
                for a in range(c.d):
                    for s in range(m):
                        res[r][a][s] = sum((arr[r][a][t] * blk[t][s] for t in range(m)), c.field.zero)
        return out

    def h_left(self, x, y):
        mats = [[[f.zero] * n for _ in range(n)] for n, f in self.left.blocks]
        for c in self.components:
            conj = lambda v, b=c.i: self.left.conj_scalar(b, v)
            xa, ya = x[(c.i, c.j)], y[(c.i, c.j)]
            n, m = self.n(c.i), self.m(c.j)
            for r in range(n):
                for r2 in range(n):
                    acc = mats[c.i][r][r2]
                    for a in range(c.d):
                        acc = acc + sum((xa[r][a][s] * conj(ya[r2][a][s]) for s in range(m)), c.field.zero) * c.P[a]
                    mats[c.i][r][r2] = acc
        return AlgebraElement(self.left, mats)

    def h_right(self, x, y):
        mats = [[[f.zero] * m for _ in range(m)] for m, f in self.right.blocks]
        for c in self.components:
            conj = lambda v, b=c.j: self.right.conj_scalar(b, v)
            xa, ya = x[(c.i, c.j)], y[(c.i, c.j)]
            n, m = self.n(c.i), self.m(c.j)
            for s in range(m):
                for s2 in range(m):
                    acc = mats[c.j][s][s2]
                    for a in range(c.d):
                        acc = acc + sum((conj(xa[r][a][s]) * ya[r][a][s2] for r in range(n)), c.field.zero) * c.Q[a]
                    mats[c.j][s][s2] = acc
        return AlgebraElement(self.right, mats)

    # -- canonical bases
    def canonical_left_basis(self):
        """Left A-module generators e_1 (x) v_a (x) f_s with h_A value P_a."""
        out = []
        for c in self.components:
            for a in range(c.d):
                for s in range(self.m(c.j)):
                    x = self.zero_element()
                    x[(c.i, c.j)][0][a][s] = c.field.one
                    out.append((x, c.P[a], c))
        return out

    def canonical_right_basis(self):
        """Right B-module generators e_r (x) v_a (x) f_1 with h_B value Q_a."""
        out = []
        for c in self.components:
            for r in range(self.n(c.i)):
                for a in range(c.d):
                    x = self.zero_element()
                    x[(c.i, c.j)][r][a][0] = c.field.one
                    out.append((x, c.Q[a], c))
        return out

    # -- serialization
    def to_json(self):
        return {"left": self.left.to_json(), "right": self.right.to_json(),
                "components": [{"i": c.i, "j": c.j, "d": c.d, "P": [_scalar_json(p) for p in c.P],
                                "Q": [_scalar_json(q) for q in c.Q], "central": c.central}
                               for c in self.components]}

    @classmethod
    def from_json(cls, doc):
        try:
            left = SemisimpleAlgebra.from_json(doc["left"])
            right = SemisimpleAlgebra.from_json(doc["right"])
            comps = doc["components"]
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed bimodule document: {exc}")
        return make_hermitian_bimodule(left, right, comps, doc.get("beta_A"), doc.get("beta_B"))


def _per_block(beta, count):
    if beta is None:
        return [None] * count
    if isinstance(beta, dict):
        return [beta.get(k, beta.get(str(k))) for k in range(count)]
    if isinstance(beta, (list, tuple)) and len(beta) == count:
        return list(beta)
    if count == 1:
        return [beta]
    raise InvalidInput("beta data must give one entry per block")


def make_hermitian_bimodule(A, B, components, beta_A=None, beta_B=None):
    """Build a bimodule from multiplicity data and beta elements.

    ``components`` entries are (i, j, N, M) tuples or dicts with keys i, j and
    either N/M or d, optionally with explicit weight lists P and Q.
    """
    ba = _per_block(beta_A, len(A.blocks))
    bb = _per_block(beta_B, len(B.blocks))
    comps = []
    for entry in components:
        if isinstance(entry, dict):
            i, j = int(entry["i"]), int(entry["j"])
            d = int(entry["d"]) if "d" in entry else int(entry.get("N", 1)) * int(entry.get("M", 1))
            P, Q = entry.get("P"), entry.get("Q")
        else:
            i, j, N, M = entry
            d, P, Q = int(N) * int(M), None, None
        if d < 1:
            raise InvalidInput("multiplicities must be positive")
        if not (0 <= i < len(A.blocks) and 0 <= j < len(B.blocks)):
            raise InvalidInput(f"component ({i}, {j}) refers to a missing block")
        f = A.blocks[i][1]
        if f != B.blocks[j][1]:
            raise FieldMismatch(f"blocks {i} and {j} have different centers")
        central = True
        if P is None:
            w, ok = _weight_from_beta(f, A.blocks[i][0], ba[i], lambda x: A.conj_scalar(i, x), "left")
            P, central = [w] * d, central and ok
        else:
            P = [_coerce_scalar(f, v) for v in P]
        if Q is None:
            w, ok = _weight_from_beta(f, B.blocks[j][0], bb[j], lambda x: B.conj_scalar(j, x), "right")
            Q, central = [w] * d, central and ok
        else:
            Q = [_coerce_scalar(f, v) for v in Q]
        if len(P) != d or len(Q) != d:
            raise InvalidInput("weight lists must have d entries")
        if any(w.is_zero() for w in P + Q):
            raise NotInvertible("zero weight")
        if isinstance(entry, dict):
            central = central and bool(entry.get("central", True))
        comps.append(Component(i, j, tuple(P), tuple(Q), central))
    return HermitianBimodule(A, B, comps)


def unit_bimodule(A):
    """A as an A-A bimodule with beta = 1."""
    return HermitianBimodule(A, A, [Component(i, i, (f.one,), (f.one,)) for i, (n, f) in enumerate(A.blocks)])


# ---------------------------------------------------------------- HKZ membership

@dataclass
class HKZReport:
    member: bool
    iota: dict
    reasons: list


def check_HKZ(E, iota=None):
    """Membership of E in the subcategory of center-symmetric bimodules."""
    A, B = E.left, E.right
    reasons = []
    if iota is None:
        iota = _find_iota(A, B)
        if iota is None:
            reasons.append("no identification of the centers: block fields do not match")
            return HKZReport(False, {}, reasons)
    else:
        iota = {int(k): int(v) for k, v in dict(iota).items()}
        if sorted(iota) != list(range(len(A.blocks))) or sorted(iota.values()) != list(range(len(B.blocks))):
            reasons.append("iota is not a bijection between the blocks")
        elif any(A.blocks[i][1] != B.blocks[j][1] for i, j in iota.items()):
            reasons.append("iota pairs blocks with different centers")
    for c in E.components:
        if not c.central:
            reasons.append(f"component ({c.i}, {c.j}): form values are not central")
        if iota.get(c.i) != c.j:
            reasons.append(f"component ({c.i}, {c.j}) is off the iota-diagonal; left and right center actions differ")
    return HKZReport(not reasons, iota, reasons)


def _find_iota(A, B):
    if len(A.blocks) != len(B.blocks):
        return None
    fa = [f.min_poly for _, f in A.blocks]
    fb = [f.min_poly for _, f in B.blocks]
    if sorted(fa) != sorted(fb):
        return None
    used = set()
    iota = {}
    for i, p in enumerate(fa):
        j = next(j for j, q in enumerate(fb) if q == p and j not in used)
        used.add(j)
        iota[i] = j
    return iota


# ---------------------------------------------------------------- tensor products

def _layout(E, F):
    """(i, k) -> list of (j, offset, d, e) describing the merged middle index."""
    out = {}
    for c in E.components:
        for g in F.components:
            if g.i != c.j:
                continue
            lst = out.setdefault((c.i, g.j), [])
            off = sum(dd * ee for _, _, dd, ee in lst)
            lst.append((c.j, off, c.d, g.d))
    for key in out:
        out[key].sort()
        off = 0
        fixed = []
        for j, _, dd, ee in out[key]:
            fixed.append((j, off, dd, ee))
            off += dd * ee
        out[key] = fixed
    return out


def tensor_bimodules(E, F):
    """E (x)_B F for an A-B bimodule E and a B-C bimodule F."""
    if E.right != F.left:
        raise CompositionError("the right algebra of E differs from the left algebra of F")
    comps = []
    for (i, k), parts in sorted(_layout(E, F).items()):
        P, Q, central = [], [], True
        for j, _, _, _ in parts:
            c, g = E.component(i, j), F.component(j, k)
            P += [p * p2 for p in c.P for p2 in g.P]
            Q += [q * q2 for q in c.Q for q2 in g.Q]
            central = central and c.central and g.central
        comps.append(Component(i, k, tuple(P), tuple(Q), central))
    return HermitianBimodule(E.left, F.right, comps)


def tensor_elements(E, F, x, y):
    """Image of x (x) y in the model of E (x)_B F."""
    T = tensor_bimodules(E, F)
    out = T.zero_element()
    for (i, k), parts in _layout(E, F).items():
        res = out[(i, k)]
        f = E.left.blocks[i][1]
        for j, off, d, e in parts:
            xa, ya = x[(i, j)], y[(j, k)]
            m = E.m(j)
            for r in range(E.n(i)):
                for a in range(d):
                    for b in range(e):
                        for u in range(F.m(k)):
                            res[r][off + a * e + b][u] = sum((xa[r][a][s] * ya[s][b][u] for s in range(m)), f.zero)
    return T, out


def fusion_multiplicities(E, F):
    """Multiplicity data of the product by the fusion rule c_ik = sum_j c_ij c'_jk."""
    out = {}
    for c in E.components:
        for g in F.components:
            if c.j == g.i:
                out[(c.i, g.j)] = out.get((c.i, g.j), 0) + c.d * g.d
    return tuple((i, k, d) for (i, k), d in sorted(out.items()))


def _restrict(E, left_block=None, right_block=None):
    comps = [c for c in E.components if (left_block is None or c.i == left_block)
             and (right_block is None or c.j == right_block)]
    return HermitianBimodule(E.left, E.right, comps)


@dataclass
class OracleResult:
    dim: int
    block_dims: dict
    samples: list = dc_field(default_factory=list)


def _action_matrices(E, algebra_basis, side):
    """For each algebra basis element, the map on E's Q-coordinates as sparse rows."""
    basis = E.basis_elements()
    mats = []
    for b in algebra_basis:
        rows = []
        for x in basis:
            img = E.act_right(x, b) if side == "right" else E.act_left(b, x)
            rows.append({k: v for k, v in enumerate(E.coords(img)) if v})
        mats.append(rows)
    return mats


def _balanced_dim(E, F):
    dE, dF = E.dim(), F.dim()
    if dE == 0 or dF == 0:
        return 0
    B = E.right
    bb = B.basis()
    right = _action_matrices(E, bb, "right")
    left = _action_matrices(F, bb, "left")
    ech = linalg.SparseEchelon()
    for rmat, lmat in zip(right, left):
        for alpha in range(dE):
            for beta in range(dF):
                row = {}
                for g, v in rmat[alpha].items():
                    key = g * dF + beta
                    row[key] = row.get(key, 0) + v
                for dl, v in lmat[beta].items():
                    key = alpha * dF + dl
                    row[key] = row.get(key, 0) - v
                ech.add(row)
                if ech.rank == dE * dF:
                    return 0
    return dE * dF - ech.rank


def concrete_tensor_oracle(E, F, budget=4096, samples=3, seed=0):
    """Dimension of E (x)_B F as the quotient of E (x)_Q F by the balancing relations.

    The construction uses only the actions of B on E and F.  Block dimensions are
    obtained by restricting E to one left block and F to one right block.  Form
    samples evaluate h'_A(x' h''_B(x'', y''), y') and h''_C(x'', h'_B(x', y') y'').
    """
    if E.right != F.left:
        raise CompositionError("the right algebra of E differs from the left algebra of F")
    if E.dim() * F.dim() > budget:
        raise BudgetExceeded(f"dim(E)*dim(F) = {E.dim() * F.dim()} exceeds the budget {budget}")
    total = _balanced_dim(E, F)
    blocks = {}
    for i in range(len(E.left.blocks)):
        Ei = _restrict(E, left_block=i)
        if not Ei.components:
            continue
        for k in range(len(F.right.blocks)):
            Fk = _restrict(F, right_block=k)
            if not Fk.components:
                continue
            dk = _balanced_dim(Ei, Fk)
            if dk:
                blocks[(i, k)] = dk
    out = []
    rng = random.Random(seed)
    for _ in range(samples if E.components and F.components else 0):
        x1, y1 = E.random_element(rng), E.random_element(rng)
        x2, y2 = F.random_element(rng), F.random_element(rng)
        hA = E.h_left(E.act_right(x1, F.h_left(x2, y2)), y1)
        hC = F.h_right(x2, F.act_left(E.h_right(x1, y1), y2))
        out.append({"x": (x1, x2), "y": (y1, y2), "h_left": hA, "h_right": hC})
    return OracleResult(total, blocks, out)


def multiplicities_from_oracle(E, F, oracle):
    """Convert oracle block dimensions into (i, k, d) multiplicity data."""
    out = []
    for (i, k), dk in sorted(oracle.block_dims.items()):
        n, f = E.left.blocks[i]
        m = F.right.blocks[k][0]
        if dk % (n * m * f.degree):
            raise InvalidInput("oracle dimension is not a multiple of the block size")
        out.append((i, k, dk // (n * m * f.degree)))
    return tuple(out)


# ---------------------------------------------------------------- heights

@dataclass
class HeightResult:
    value: float
    exact: object = None
    mode: str = "canonical"
    per_place: list = dc_field(default_factory=list)
    flags: dict = dc_field(default_factory=dict)

    def to_json(self):
        doc = {"value": repr(self.value), "mode": self.mode,
               "per_place": self.per_place, "flags": self.flags}
        if self.exact is not None:
            doc["exact"] = self.exact.to_json()
        return doc


def _side_values(E):
    """Per block pair: (left weights with multiplicity m_j, right weights with multiplicity n_i)."""
    return [(c, E.m(c.j), E.n(c.i)) for c in E.components]


def _check_positive_embedded(values):
    for v in values:
        if v <= 0:
            raise PositivityViolation("an embedded form value is not positive")


def canonical_basis_height(E, normalized=True, search_budget=0, seed=0):
    """Height from the canonical bases.

    normalized=True: per block pair, the geometric mean of right values over
    the geometric mean of left values, multiplied over pairs.  This is the
    variant that is multiplicative under tensor products.
    normalized=False: the plain product over all canonical basis elements.
    """
    if not E.components:
        raise ZeroModule("zero bimodule has no height")
    rational = all(w.is_rational() for c in E.components for w in c.P + c.Q)
    exact = PowerProduct.one() if rational else None
    logv = mpmath.mpf(0)
    with mpmath.workdps(40):
        for c, m, n in _side_values(E):
            pe = [_embed(w) for w in c.P]
            qe = [_embed(w) for w in c.Q]
            _check_positive_embedded([mpmath.re(v) for v in pe + qe])
            if normalized:
                logv += mpmath.fsum(mpmath.log(mpmath.re(v)) for v in qe) / len(qe)
                logv -= mpmath.fsum(mpmath.log(mpmath.re(v)) for v in pe) / len(pe)
            else:
                logv += n * mpmath.fsum(mpmath.log(mpmath.re(v)) for v in qe)
                logv -= m * mpmath.fsum(mpmath.log(mpmath.re(v)) for v in pe)
            if exact is not None:
                num = PowerProduct.one()
                den = PowerProduct.one()
                for w in c.Q:
                    num = num * PowerProduct.from_rational(w.to_rational())
                for w in c.P:
                    den = den * PowerProduct.from_rational(w.to_rational())
                if normalized:
                    exact = exact * num ** Fraction(1, len(c.Q)) / den ** Fraction(1, len(c.P))
                else:
                    exact = exact * num ** n / den ** m
        value = float(mpmath.exp(logv))
    flags = {"hkz_member": check_HKZ(E).member, "normalized": normalized}
    if not flags["hkz_member"]:
        flags["approximate_inf"] = True
    if any(not c.central for c in E.components):
        flags["noncentral_values_use_reduced_trace"] = True
    res = HeightResult(float(exact) if exact is not None else value, exact, "canonical",
                       [{"place": "inf", "value": repr(value)}], flags)
    if search_budget:
        best = _searched_height(E, normalized, search_budget, seed)
        res.flags["canonical_value"] = res.value
        if best < res.value:
            res.value, res.exact = best, None
        else:
            res.flags["no_improvement"] = True
        res.mode = "searched"
    return res


def _searched_height(E, normalized, budget, seed):
    """Randomized unimodular changes of the multiplicity basis on each side.

    Each side's basis is driven towards a smaller value product; a
    transformed basis vector u = sum U_a e_a has value sum U_a^2 w_a.
    """
    rng = random.Random(seed)
    logv = 0.0
    for c, m, n in _side_values(E):
        sides = []
        for ws, mult in ((c.Q, n), (c.P, m)):
            w = [float(mpmath.re(_embed(x))) for x in ws]
            d = len(w)
            U = [[int(a == b) for b in range(d)] for a in range(d)]

            def vals(U):
                return [sum(U[k][a] ** 2 * w[a] for a in range(d)) for k in range(d)]

            def score(U):
                v = vals(U)
                s = math.fsum(math.log(x) for x in v)
                return s / d if normalized else s * mult

            best = score(U)
            for _ in range(budget if d > 1 else 0):
                a, b = rng.sample(range(d), 2)
                q = rng.choice((-1, 1))
                T = [row[:] for row in U]
                T[a] = [x + q * y for x, y in zip(T[a], T[b])]
                sc = score(T)
                if sc < best:
                    best, U = sc, T
            sides.append(best)
        logv += sides[0] - sides[1]
    return math.exp(logv)


def _trace_form_gram(E, side):
    """Block-diagonal Gram of Tr_{L|Q}(trace h) on the standard coordinate lattice.

    Returns a list of orthogonal diagonal blocks with their multiplicities.
    """
    blocks = []
    for c in E.components:
        f = c.field
        conj = (lambda v, b=c.i: E.left.conj_scalar(b, v)) if side == "left" else \
            (lambda v, b=c.j: E.right.conj_scalar(b, v))
        weights = c.P if side == "left" else c.Q
        for w in weights:
            basis = [f.power(k) for k in range(f.degree)]
            gram = [[_tr(x * w * conj(y)) for y in basis] for x in basis]
            blocks.append((gram, E.n(c.i) * E.m(c.j)))
    return blocks


def _tr(x):
    m = x.mult_matrix()
    return sum(m[i][i] for i in range(x.field.degree))


def _coord_gram(E, side):
    """Full Gram matrix in the coordinates used by ``HermitianBimodule.coords``."""
    basis = E.basis_elements()
    h = E.h_left if side == "left" else E.h_right
    out = []
    for x in basis:
        row = []
        for y in basis:
            v = h(x, y)
            row.append(sum((_tr(m[r][r]) for m in v.blocks for r in range(len(m))), Fraction(0)))
        out.append(row)
    return out


@dataclass
class LatticeHeight:
    normalized: float
    raw: float
    vol_left: float
    vol_right: float
    flags: dict = dc_field(default_factory=dict)


def _volume_of(E, side, lattice):
    if lattice is None:
        vol = 1.0
        for gram, mult in _trace_form_gram(E, side):
            vol *= k_volume(QuadLattice(gram=gram)).value ** mult
        return vol
    g = _coord_gram(E, side)
    rows = [[Fraction(v) for v in r] for r in lattice]
    if len(rows) != E.dim() or linalg.rank(rows) < E.dim():
        raise InvalidInput("lattice must be given by dim(E) independent coordinate vectors")
    gram = linalg.matmul(linalg.matmul(rows, g), linalg.transpose(rows))
    return k_volume(QuadLattice(gram=gram)).value


def order_volume(A):
    """Volume of the default order under the trace form Tr(x y*)."""
    return k_volume(lattice_from_trace_form(A.basis())).value


def lattice_volume_height(E, left_lattice=None, right_lattice=None):
    """vol_B / vol_A for trace-form lattices, raw and normalized by vol(O)^sigma(r)."""
    if not E.components:
        raise ZeroModule("zero bimodule has no height")
    va = _volume_of(E, "left", left_lattice)
    vb = _volume_of(E, "right", right_lattice)
    raw = vb / va
    ra, rb = _rank_sums(E)
    oa, ob = order_volume(E.left), order_volume(E.right)
    norm = (vb / ob ** float(rb)) / (va / oa ** float(ra))
    return LatticeHeight(norm, raw, va, vb, {"rank_left": str(ra), "rank_right": str(rb),
                                             "order_volume_left": oa, "order_volume_right": ob})


# -- Hattori-Stallings ranks

def _diag_idempotent(alg, counts):
    """A square matrix over alg whose flattened blocks hold counts[b] ones on the diagonal."""
    t = max([1] + [-(-k // n) for k, (n, _) in zip(counts, alg.blocks)])
    mat = [[alg.zero() for _ in range(t)] for _ in range(t)]
    for b, (k, (n, f)) in enumerate(zip(counts, alg.blocks)):
        for pos in range(k):
            i, r = divmod(pos, n)
            mat[i][i] = mat[i][i] + alg.unit(b, r, r)
    return mat


def module_ranks(E):
    """Hattori-Stallings ranks of E as left A-module and as right B-module."""
    A, B = E.left, E.right
    left_counts = [0] * len(A.blocks)
    right_counts = [0] * len(B.blocks)
    for c in E.components:
        left_counts[c.i] += c.d * E.m(c.j)
        right_counts[c.j] += c.d * E.n(c.i)
    ra = hattori_stallings_rank(A, _diag_idempotent(A, left_counts))
    rb = hattori_stallings_rank(B, _diag_idempotent(B, right_counts))
    return ra, rb


def _rank_sums(E):
    ra, rb = module_ranks(E)
    return sum(ra.rational_comps(), Fraction(0)), sum(rb.rational_comps(), Fraction(0))


def hs_height(E):
    """sigma(r_B(E)) / sigma(r_A(E)) as an exact rational."""
    if not E.components:
        raise ZeroModule("zero bimodule: the rank height is undefined")
    sa, sb = _rank_sums(E)
    return sb / sa


# -- Jones indices

@dataclass
class JonesResult:
    ind_left: list
    ind_right: list
    height: object
    reason: str = ""
    validated: bool = True

    def to_json(self):
        def enc(v):
            return _scalar_json(v) if isinstance(v, FieldElement) else str(v)
        return {"ind_A": [enc(v) for v in self.ind_left], "ind_B": [enc(v) for v in self.ind_right],
                "jones_height": None if self.height is None else str(self.height), "reason": self.reason}


def _elements_equal(x, y):
    return all(x[k] == y[k] for k in x)


def _add(E, x, y):
    return {k: [[[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(p1, p2)] for p1, p2 in zip(x[k], y[k])]
            for k in x}


def _scale_elem(x, s):
    return {k: [[[a * s for a in r] for r in p] for p in v] for k, v in x.items()}


def _central_scalars(alg, z):
    out = []
    for (n, f), m in zip(alg.blocks, z.blocks):
        lam = m[0][0]
        if any(m[r][c] != (lam if r == c else f.zero) for r in range(n) for c in range(n)):
            raise NotReconstructing("index element is not central")
        out.append(lam.to_rational() if lam.is_rational() else lam)
    return out


def jones_index(E, right_basis=None, left_basis=None):
    """Left and right indices from frames satisfying the reconstruction identities.

    Right frame (for Ind_A): x = sum_u u h_B(u~, x) for all x; Ind_A = sum h_A(u, u~).
    Left frame (for Ind_B):  x = sum_v h_A(x, v~) v;         Ind_B = sum h_B(v~, v).
    Supplied bases are treated as Parseval frames (u~ = u).
    """
    if not E.components:
        raise ZeroModule("zero bimodule")
    if right_basis is None:
        rf = [(u, _scale_elem(u, q.inv())) for u, q, _ in E.canonical_right_basis()]
    else:
        rf = [(u, u) for u in right_basis]
    if left_basis is None:
        lf = [(v, _scale_elem(v, p.inv())) for v, p, _ in E.canonical_left_basis()]
    else:
        lf = [(v, v) for v in left_basis]
    for x in E.basis_elements():
        acc = E.zero_element()
        for u, ut in rf:
            acc = _add(E, acc, E.act_right(u, E.h_right(ut, x)))
        if not _elements_equal(acc, x):
            raise NotReconstructing("right frame does not reconstruct the module")
        acc = E.zero_element()
        for v, vt in lf:
            acc = _add(E, acc, E.act_left(E.h_left(x, vt), v))
        if not _elements_equal(acc, x):
            raise NotReconstructing("left frame does not reconstruct the module")
    ind_a = E.left.zero()
    for u, ut in rf:
        ind_a = ind_a + E.h_left(u, ut)
    ind_b = E.right.zero()
    for v, vt in lf:
        ind_b = ind_b + E.h_right(vt, v)
    ia = _central_scalars(E.left, ind_a)
    ib = _central_scalars(E.right, ind_b)
    simple_q = len(E.left.blocks) == 1 and len(E.right.blocks) == 1 and \
        E.left.blocks[0][1].degree == 1 and E.right.blocks[0][1].degree == 1
    if simple_q:
        return JonesResult(ia, ib, Fraction(ib[0]) / Fraction(ia[0]))
    return JonesResult(ia, ib, None, "height needs simple algebras with center Q")


# ---------------------------------------------------------------- 2-morphisms

class TwoMorphism:
    """Morphism E -> E~ acting by integer matrices on the multiplicity index of each block pair."""

    def __init__(self, source, target, matrices):
        if source.left != target.left or source.right != target.right:
            raise CompositionError("source and target must be bimodules over the same algebras")
        self.source = source
        self.target = target
        self.matrices = {tuple(k): [[int(v) for v in row] for row in m] for k, m in matrices.items()}
        self.validation = self._validate()

    def _validate(self):
        rec = {"shapes": True, "left_form": True, "right_form": True}
        for c in self.source.components:
            U = self.matrices.get((c.i, c.j))
            t = self.target.component(c.i, c.j)
            if U is None or t is None or len(U) != t.d or any(len(r) != c.d for r in U):
                rec["shapes"] = False
                continue
            for wname, ws, wt in (("left_form", c.P, t.P), ("right_form", c.Q, t.Q)):
                for a in range(c.d):
                    for b in range(c.d):
                        val = sum((wt[k] * (U[k][a] * U[k][b]) for k in range(t.d)), c.field.zero)
                        if val != (ws[a] if a == b else c.field.zero):
                            rec[wname] = False
        rec["valid"] = all(rec.values())
        return rec

    @classmethod
    def identity(cls, E):
        return cls(E, E, {(c.i, c.j): [[int(a == b) for b in range(c.d)] for a in range(c.d)]
                          for c in E.components})

    def key(self):
        return (self.source.key(True), self.target.key(True),
                tuple(sorted((k, tuple(map(tuple, v))) for k, v in self.matrices.items())))

    def __eq__(self, other):
        return isinstance(other, TwoMorphism) and self.source == other.source and \
            self.target == other.target and self.matrices == other.matrices

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"TwoMorphism({self.source!r} -> {self.target!r})"


def compose_vertical(psi, phi):
    """psi o phi for phi: E -> F and psi: F -> G."""
    if phi.target != psi.source:
        raise CompositionError("target of the first morphism differs from the source of the second")
    mats = {}
    for k, U in phi.matrices.items():
        V = psi.matrices[k]
        mats[k] = [[sum(V[r][t] * U[t][c] for t in range(len(U))) for c in range(len(U[0]))] for r in range(len(V))]
    return TwoMorphism(phi.source, psi.target, mats)


def compose_horizontal(phi, psi):
    """phi (x) psi : E (x) F -> E~ (x) F~ (block-diagonal Kronecker products)."""
    src = tensor_bimodules(phi.source, psi.source)
    tgt = tensor_bimodules(phi.target, psi.target)
    ls = _layout(phi.source, psi.source)
    lt = _layout(phi.target, psi.target)
    mats = {}
    for key, parts in ls.items():
        tparts = {j: (off, d, e) for j, off, d, e in lt[key]}
        total_t = sum(d * e for _, _, d, e in lt[key])
        total_s = sum(d * e for _, _, d, e in parts)
        M = [[0] * total_s for _ in range(total_t)]
        for j, off, d, e in parts:
            U = phi.matrices[(key[0], j)]
            V = psi.matrices[(j, key[1])]
            toff, td, te = tparts[j]
            for a2 in range(td):
                for b2 in range(te):
                    for a in range(d):
                        for b in range(e):
                            M[toff + a2 * te + b2][off + a * e + b] = U[a2][a] * V[b2][b]
        mats[key] = M
    return TwoMorphism(src, tgt, mats)


def relative_height(phi, height="canonical"):
    """H(target) / H(source) under the chosen functional."""
    fn = HEIGHT_FUNCTIONALS[height] if isinstance(height, str) else height
    hs, ht = fn(phi.source), fn(phi.target)
    if isinstance(hs, PowerProduct) and isinstance(ht, PowerProduct):
        return ht / hs
    if isinstance(hs, Fraction) and isinstance(ht, Fraction):
        return ht / hs
    return float(ht) / float(hs)


def _canonical_value(E):
    r = canonical_basis_height(E)
    return r.exact if r.exact is not None else r.value


def _jones_value(E):
    h = jones_index(E).height
    if h is None:
        raise Unsupported("jones height is not defined for this bimodule")
    return h


HEIGHT_FUNCTIONALS = {
    "canonical": _canonical_value,
    "lattice": lambda E: lattice_volume_height(E).normalized,
    "hs": hs_height,
    "jones": _jones_value,
}


# ---------------------------------------------------------------- non-archimedean components

def _rational_weights(E):
    out = []
    for c in E.components:
        if not all(w.is_rational() for w in c.P + c.Q):
            raise Unsupported("non-archimedean components need rational form values")
        out.append((c, [w.to_rational() for w in c.P], [w.to_rational() for w in c.Q]))
    return out


def nonarch_height_component(E, p, kind="volume", normalized=True):
    """p-adic counterpart of the canonical height (volume kind) or the max-coefficient form (rank kind)."""
    if p < 2 or any(p % q == 0 for q in range(2, int(p ** 0.5) + 1)):
        raise InvalidInput("p must be prime")
    data = _rational_weights(E)
    if kind == "rank":
        qmax = max(PowerProduct.from_rational(abs(q)).padic_abs(p).as_fraction() for _, _, Q in data for q in Q)
        pmax = max(PowerProduct.from_rational(abs(x)).padic_abs(p).as_fraction() for _, P, _ in data for x in P)
        return PowerProduct.from_rational(qmax / pmax)
    if kind != "volume":
        raise InvalidInput(f"unknown kind {kind!r}")
    out = PowerProduct.one()
    for c, P, Q in data:
        num = PowerProduct.one()
        den = PowerProduct.one()
        for q in Q:
            num = num * PowerProduct.from_rational(q).padic_abs(p)
        for x in P:
            den = den * PowerProduct.from_rational(x).padic_abs(p)
        if normalized:
            out = out * num ** Fraction(1, len(Q)) / den ** Fraction(1, len(P))
        else:
            out = out * num ** E.n(c.i) / den ** E.m(c.j)
    return out


def global_height_product(E, normalized=True):
    """Archimedean canonical height times all p-adic volume components (equals 1)."""
    arch = canonical_basis_height(E, normalized=normalized).exact
    if arch is None:
        raise Unsupported("global product needs rational form values")
    primes = set()
    for _, P, Q in _rational_weights(E):
        for w in P + Q:
            primes |= set(PowerProduct.from_rational(w).exps)
    total = arch
    for p in sorted(primes):
        total = total * nonarch_height_component(E, p, "volume", normalized)
    return total
