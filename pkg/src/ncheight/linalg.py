"""Exact linear algebra over the rationals and the integers.

Matrices are lists of rows; entries are ``Fraction`` or ``int``.
"""
from fractions import Fraction
from math import gcd


def to_frac_matrix(rows):
    return [[Fraction(x) for x in row] for row in rows]


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def matmul(a, b):
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def transpose(a):
    return [list(r) for r in zip(*a)]


def det(m):
    """Determinant by fraction-exact Gaussian elimination."""
    a = to_frac_matrix(m)
    n = len(a)
    if n == 0:
        return Fraction(1)
    sign = 1
    result = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            sign = -sign
        p = a[c][c]
        result *= p
        for r in range(c + 1, n):
            if a[r][c] != 0:
                f = a[r][c] / p
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return result * sign


def rref(m):
    """Reduced row echelon form. Returns (rows, pivot columns)."""
    a = to_frac_matrix(m)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        p = a[r][c]
        a[r] = [x / p for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return a, pivots


def rank(m):
    if not m:
        return 0
    return len(rref(m)[1])


def solve(a, b):
    """Solve ``a x = b`` exactly; returns one solution or ``None``."""
    n = len(a[0])
    aug = [list(row) + [rhs] for row, rhs in zip(a, b)]
    red, piv = rref(aug)
    if n in piv:
        return None
    x = [Fraction(0)] * n
    for row, c in zip(red, piv):
        x[c] = row[n]
    return x


def inverse(m):
    n = len(m)
    aug = [list(row) + list(e) for row, e in zip(to_frac_matrix(m), identity(n))]
    red, piv = rref(aug)
    if piv[:n] != list(range(n)):
        return None
    return [row[n:] for row in red]


class SparseEchelon:
    """Incrementally maintained echelon basis of sparse rational row vectors.

    Rows are dicts ``column -> Fraction``; :meth:`add` returns True when the
    row enlarged the span.
    """

    def __init__(self):
        self.pivots = {}

    def reduce(self, row):
        row = {k: Fraction(v) for k, v in row.items() if v != 0}
        while row:
            c = min(row)
            basis = self.pivots.get(c)
            if basis is None:
                return row
            f = row[c]
            for k, v in basis.items():
                nv = row.get(k, 0) - f * v
                if nv == 0:
                    row.pop(k, None)
                else:
                    row[k] = nv
        return row

    def add(self, row):
        row = self.reduce(row)
        if not row:
            return False
        c = min(row)
        p = row[c]
        self.pivots[c] = {k: v / p for k, v in row.items()}
        return True

    @property
    def rank(self):
        return len(self.pivots)


def hermite_rows(rows):
    """Row-style Hermite normal form of an integer matrix (nonzero rows only)."""
    a = [[int(x) for x in r] for r in rows]
    if not a:
        return []
    ncols = len(a[0])
    out = []
    r0 = 0
    for c in range(ncols):
        live = [i for i in range(r0, len(a)) if a[i][c] != 0]
        if not live:
            continue
        while True:
            live = [i for i in range(r0, len(a)) if a[i][c] != 0]
            i_min = min(live, key=lambda i: abs(a[i][c]))
            a[r0], a[i_min] = a[i_min], a[r0]
            done = True
            for i in range(r0 + 1, len(a)):
                if a[i][c] != 0:
                    q = a[i][c] // a[r0][c]
                    a[i] = [x - q * y for x, y in zip(a[i], a[r0])]
                    if a[i][c] != 0:
                        done = False
            if done:
                break
        if a[r0][c] < 0:
            a[r0] = [-x for x in a[r0]]
        for i in range(r0):
            q = a[i][c] // a[r0][c]
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[r0])]
        r0 += 1
        if r0 == len(a):
            break
    out = [row for row in a[:r0]]
    return out


def smith_invariants(rows):
    """Nonzero Smith invariants d1 | d2 | ... of an integer matrix."""
    a = [[int(x) for x in r] for r in rows]
    a = [r for r in a if any(r)]
    if not a:
        return []
    m, n = len(a), len(a[0])
    invariants = []
    t = 0
    while t < min(m, n):
        nz = [(abs(a[i][j]), i, j) for i in range(t, m) for j in range(t, n) if a[i][j] != 0]
        if not nz:
            break
        _, i, j = min(nz)
        a[t], a[i] = a[i], a[t]
        for row in a:
            row[t], row[j] = row[j], row[t]
        while True:
            p = a[t][t]
            clean = True
            for i in range(t + 1, m):
                if a[i][t]:
                    q = a[i][t] // p
                    a[i] = [x - q * y for x, y in zip(a[i], a[t])]
                    if a[i][t]:
                        clean = False
            for j in range(t + 1, n):
                if a[t][j]:
                    q = a[t][j] // p
                    for row in a:
                        row[j] -= q * row[t]
                    if a[t][j]:
                        clean = False
            if clean:
                bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n) if a[i][j] % p), None)
                if bad is None:
                    break
                a[t] = [x + y for x, y in zip(a[t], a[bad[0]])]
                continue
            nz = [(abs(a[i][j]), i, j) for i in range(t, m) for j in range(t, n)
                  if a[i][j] != 0 and (i == t or j == t)]
            _, i, j = min(nz)
            a[t], a[i] = a[i], a[t]
            for row in a:
                row[t], row[j] = row[j], row[t]
        invariants.append(abs(a[t][t]))
        t += 1
    return invariants


def lcm(a, b):
    return a // gcd(a, b) * b if a and b else 0
