"""Convolution algebras on finite bimodule universes and their height-driven
time evolutions, Hamiltonian spectra and partition functions.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import cmath
import csv
import io
import math

from .bimodule import (HEIGHT_FUNCTIONALS, CompositionError, TwoMorphism, canonical_basis_height,
                       compose_horizontal, compose_vertical, relative_height, tensor_bimodules)
from .errors import InvalidInput, InvalidTwoCategory
from .exact import PowerProduct


def _as_exact(h):
    if isinstance(h, PowerProduct):
        return h
    if isinstance(h, (int, Fraction)):
        return PowerProduct.from_rational(h)
    return None


def _log(h):
    ex = _as_exact(h)
    return ex.log() if ex is not None else math.log(float(h))


def _heights_agree(a, b, rel=1e-9):
    ea, eb = _as_exact(a), _as_exact(b)
    if ea is not None and eb is not None:
        return ea == eb
    fa, fb = float(a), float(b)
    return abs(fa - fb) <= rel * max(abs(fa), abs(fb))


@dataclass
class Universe:
    members: list
    heights: list
    table: dict
    functional: str
    closure: dict = dc_field(default_factory=dict)
    height_consistent: bool = True
    notes: list = dc_field(default_factory=list)

    def __len__(self):
        return len(self.members)

    def log_heights(self):
        return [_log(h) for h in self.heights]

    def to_json(self):
        return {"functional": self.functional,
                "members": [m.to_json() for m in self.members],
                "heights": [_height_json(h) for h in self.heights],
                "factorizations": {str(k): [list(p) for p in v] for k, v in sorted(self.table.items())},
                "closure": self.closure, "height_consistent": self.height_consistent, "notes": self.notes}


def _height_json(h):
    ex = _as_exact(h)
    if ex is not None:
        doc = ex.to_json()
        doc["value"] = repr(float(ex))
        return doc
    return {"value": repr(float(h))}


def build_universe(bimodules, height="canonical", refined=None):
    """Members, heights and the factorization table E = E_a (x) E_b within the list.

    Isomorphism classes are keyed on multiplicity data.  For form-dependent
    functionals the key is refined by the weight multisets (``refined``).
    """
    fn = HEIGHT_FUNCTIONALS[height] if isinstance(height, str) else height
    name = height if isinstance(height, str) else getattr(height, "__name__", "custom")
    if refined is None:
        refined = name != "hs"
    members, keys, notes = [], {}, []
    for E in bimodules:
        k = E.key(refined)
        if k in keys:
            notes.append(f"duplicate class dropped (same key as member {keys[k]})")
            continue
        keys[k] = len(members)
        members.append(E)
    heights = [fn(E) for E in members]
    table = {i: [] for i in range(len(members))}
    outside = []
    consistent = True
    for a, Ea in enumerate(members):
        for b, Eb in enumerate(members):
            if Ea.right != Eb.left:
                continue
            T = tensor_bimodules(Ea, Eb)
            idx = keys.get(T.key(refined))
            if idx is None:
                outside.append((a, b))
                continue
            table[idx].append((a, b))
            prod = _mul(heights[a], heights[b])
            if not _heights_agree(heights[idx], prod):
                consistent = False
    if refined:
        notes.append("keys refined by hermitian weight data")
    closure = {"closed": not outside, "products_outside": [list(p) for p in outside]}
    return Universe(members, heights, table, name, closure, consistent, notes)


def _mul(a, b):
    ea, eb = _as_exact(a), _as_exact(b)
    if ea is not None and eb is not None:
        return ea * eb
    return float(a) * float(b)


# ---------------------------------------------------------------- convolution algebra

def _check_support(f, size):
    for k in f:
        if not (isinstance(k, int) and 0 <= k < size):
            raise InvalidInput(f"observable support {k!r} is outside the universe")


def delta(i):
    return {i: 1}


def convolve(f, g, universe):
    """(f * g)(E) = sum over E = E' (x) E'' of f(E') g(E'')."""
    n = len(universe)
    _check_support(f, n)
    _check_support(g, n)
    out = {}
    for idx, pairs in universe.table.items():
        acc = 0j
        hit = False
        for a, b in pairs:
            if a in f and b in g:
                acc += f[a] * g[b]
                hit = True
        if hit:
            out[idx] = acc
    return out


def time_evolve(f, t, universe):
    """alpha_t(f)(E) = H(E)^{it} f(E)."""
    _check_support(f, len(universe))
    logs = universe.log_heights()
    return {k: cmath.exp(1j * t * logs[k]) * v for k, v in f.items()}


def max_deviation(f, g):
    keys = set(f) | set(g)
    return max((abs(f.get(k, 0) - g.get(k, 0)) for k in keys), default=0.0)


# ---------------------------------------------------------------- spectra

@dataclass
class Spectrum:
    levels: list
    excluded: list = dc_field(default_factory=list)
    exact: bool = False

    def to_json(self):
        return {"levels": [{"log_H": repr(e), "multiplicity": m} for e, m in self.levels],
                "excluded": self.excluded, "exact_grouping": self.exact}


def _left_normalized(E):
    """True when the left (A-side) canonical value product is 1."""
    A_only = canonical_basis_height(_swap_sides_left(E))
    return _heights_agree(A_only.exact if A_only.exact is not None else A_only.value, 1)


def _swap_sides_left(E):
    from .bimodule import Component, HermitianBimodule
    comps = [Component(c.i, c.j, c.P, tuple(c.field.one for _ in c.P), c.central) for c in E.components]
    return HermitianBimodule(E.left, E.right, comps)


def hamiltonian_spectrum(source, constraint=None, tol=1e-10):
    """Sorted (log H, multiplicity) pairs.

    ``source`` is a Universe or a plain list of heights.  Exact heights are
    grouped exactly; otherwise logs closer than ``tol`` are merged.
    """
    excluded = []
    if isinstance(source, Universe):
        heights = []
        for i, (E, h) in enumerate(zip(source.members, source.heights)):
            if constraint == "left-normalized" and not _left_normalized(E):
                excluded.append(i)
                continue
            heights.append(h)
    else:
        if constraint is not None:
            raise InvalidInput("constraints need a universe")
        heights = list(source)
    if any(float(h) <= 0 for h in heights):
        raise InvalidInput("heights must be positive")
    exact = [_as_exact(h) for h in heights]
    if heights and all(e is not None for e in exact):
        groups = {}
        for e in exact:
            groups[e] = groups.get(e, 0) + 1
        levels = sorted(((e.log(), m) for e, m in groups.items()))
        return Spectrum(levels, excluded, True)
    logs = sorted(_log(h) for h in heights)
    levels = []
    for v in logs:
        if levels and v - levels[-1][0] <= tol:
            levels[-1][1] += 1
        else:
            levels.append([v, 1])
    return Spectrum([(v, m) for v, m in levels], excluded, False)


def rank_multiplicity(n, r):
    """#{(N_j) >= 0 : sum n_j N_j = r}."""
    n = [int(x) for x in n]
    if any(x < 1 for x in n) or r < 0:
        raise InvalidInput("block sizes must be positive and r nonnegative")
    ways = [1] + [0] * r
    for size in n:
        for total in range(size, r + 1):
            ways[total] += ways[total - size]
    return ways[r]


@dataclass
class PartitionValue:
    value: float
    tail_bound: object = None
    terms: int = 0

    def to_json(self):
        return {"Z": repr(self.value), "tail_bound": None if self.tail_bound is None else repr(self.tail_bound),
                "terms": self.terms}


def partition_function(spectrum=None, beta=1.0, blocks=None, R=None):
    """Z(beta) = sum mult * H^{-beta} over a spectrum, or the rank version
    sum_{r <= R} rank_multiplicity(blocks, r) r^{-beta}.

    For the rank version with beta > k (k = number of blocks) and R >= k - 1 the
    tail is at most 2^{k-1} R^{k-beta} / (beta - k).
    """
    if beta <= 0:
        raise InvalidInput("beta must be positive")
    if blocks is not None:
        if R is None or R < 1:
            raise InvalidInput("rank version needs a truncation R >= 1")
        k = len(blocks)
        n = [int(x) for x in blocks]
        if any(x < 1 for x in n):
            raise InvalidInput("block sizes must be positive")
        ways = [1] + [0] * R
        for size in n:
            for total in range(size, R + 1):
                ways[total] += ways[total - size]
        val = math.fsum(ways[r] * r ** (-beta) for r in range(1, R + 1) if ways[r])
        tail = None
        if beta > k and R >= k - 1:
            tail = 2 ** (k - 1) * R ** (k - beta) / (beta - k)
        return PartitionValue(val, tail, R)
    levels = spectrum.levels if isinstance(spectrum, Spectrum) else spectrum
    val = math.fsum(m * math.exp(-beta * e) for e, m in levels)
    return PartitionValue(val, 0.0, len(levels))


def partition_sweep_csv(spectrum, betas):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "Z"])
    for b in betas:
        w.writerow([repr(float(b)), repr(partition_function(spectrum, b).value)])
    return buf.getvalue()


# ---------------------------------------------------------------- 2-morphism algebra

@dataclass
class TwoTable:
    """Finite set of 2-morphisms with declared vertical and horizontal composition tables.

    ``vertical[(p, q)] = r`` means morphisms[p] o morphisms[q] = morphisms[r].
    """
    morphisms: list
    vertical: dict
    horizontal: dict
    heights: list


def _index(morphisms):
    return {m: i for i, m in enumerate(morphisms)}


def derive_two_table(morphisms, height="canonical"):
    """Composition tables computed from the morphisms themselves, then validated."""
    idx = _index(morphisms)
    vert, hor = {}, {}
    for p, a in enumerate(morphisms):
        for q, b in enumerate(morphisms):
            if b.target == a.source:
                r = idx.get(compose_vertical(a, b))
                if r is not None:
                    vert[(p, q)] = r
            if a.source.right == b.source.left:
                try:
                    r = idx.get(compose_horizontal(a, b))
                except (CompositionError, KeyError):
                    r = None
                if r is not None:
                    hor[(p, q)] = r
    return make_two_table(morphisms, vert, hor, height)


def make_two_table(morphisms, vertical, horizontal, height="canonical"):
    """Validate declared tables (indices, interchange law) and attach relative heights."""
    n = len(morphisms)
    for tab in (vertical, horizontal):
        for (p, q), r in tab.items():
            if not all(0 <= x < n for x in (p, q, r)):
                raise InvalidTwoCategory("table entry refers to a missing morphism")
    for (a, b), ab in vertical.items():
        for (c, d), cd in vertical.items():
            lhs = horizontal.get((ab, cd))
            ac, bd = horizontal.get((a, c)), horizontal.get((b, d))
            if ac is None or bd is None:
                continue
            rhs = vertical.get((ac, bd))
            # a composite missing from a finite table is not a violation
            if lhs is None or rhs is None:
                continue
            if lhs != rhs:
                raise InvalidTwoCategory(f"interchange law fails for ({a}, {b}, {c}, {d})")
    for (p, q), r in vertical.items():
        if morphisms[q].target != morphisms[p].source or morphisms[r].source != morphisms[q].source \
                or morphisms[r].target != morphisms[p].target:
            raise InvalidTwoCategory(f"vertical entry ({p}, {q}) has the wrong source or target")
    heights = [relative_height(m, height) for m in morphisms]
    return TwoTable(list(morphisms), dict(vertical), dict(horizontal), heights)


def a2_products(f, g, table, kind="vertical"):
    """(f o g)(phi) = sum over phi = phi1 o phi2 of f(phi1) g(phi2); likewise for the horizontal product."""
    tab = {"vertical": table.vertical, "horizontal": table.horizontal}.get(kind)
    if tab is None:
        raise InvalidInput(f"unknown product {kind!r}")
    out = {}
    for (p, q), r in tab.items():
        if p in f and q in g:
            out[r] = out.get(r, 0j) + f[p] * g[q]
    return out


def a2_time_evolve(f, t, table):
    return {k: cmath.exp(1j * t * _log(table.heights[k])) * v for k, v in f.items()}


def identity_two_morphism(E):
    return TwoMorphism.identity(E)
