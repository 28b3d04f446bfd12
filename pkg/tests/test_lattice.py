import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncheight import linalg
from ncheight.errors import InvalidInput, NotPositiveDefinite
from ncheight.lattice import (QuadLattice, gromov_mass, is_lll_reduced, k_volume, lattice_from_trace_form,
                              lll_reduce, orthogonality_defect, orthogonality_defect_sq, short_vectors)
from ncheight.numfield import NumberField
from ncheight.ssalgebra import SemisimpleAlgebra


def numpy_lovasz_ok(basis, delta=0.75):
    """Float Gram-Schmidt check of size reduction and the Lovasz condition."""
    b = np.array(basis, dtype=float)
    k = len(b)
    bs = np.zeros_like(b)
    mu = np.zeros((k, k))
    for i in range(k):
        bs[i] = b[i]
        for j in range(i):
            mu[i, j] = b[i] @ bs[j] / (bs[j] @ bs[j])
            bs[i] -= mu[i, j] * bs[j]
    size = all(abs(mu[i, j]) <= 0.5 + 1e-9 for i in range(k) for j in range(i))
    lov = all(bs[i] @ bs[i] >= (delta - mu[i, i - 1] ** 2) * (bs[i - 1] @ bs[i - 1]) - 1e-9 for i in range(1, k))
    return size and lov


def random_basis(rng, k, lo=-20, hi=20):
    while True:
        b = [[rng.randint(lo, hi) for _ in range(k)] for _ in range(k)]
        if linalg.det(b) != 0:
            return b


def test_trace_form_examples():
    Q = NumberField.rationals()
    assert QuadLattice(gram=[[1]]).gram == lattice_from_trace_form([Q.one]).gram
    K = NumberField([-2, 0, 1])
    assert lattice_from_trace_form([K.one, K.gen]).gram == [[2, 0], [0, 4]]
    M2 = SemisimpleAlgebra([(2, [0, 1])])
    units = [M2.unit(0, r, c) for r in range(2) for c in range(2)]
    assert lattice_from_trace_form(units).gram == [[int(i == j) for j in range(4)] for i in range(4)]


def test_lll_examples():
    Z2 = QuadLattice([[1, 0], [0, 1]])
    assert lll_reduce(Z2).basis == Z2.basis
    red = lll_reduce(QuadLattice([[1, 0], [100, 1]]))
    assert sorted(tuple(abs(x) for x in v) for v in red.basis) == [(0, 1), (1, 0)]


def test_lll_random_five_dim():
    rng = random.Random(5)
    b = random_basis(rng, 5)
    red = lll_reduce(QuadLattice(b))
    assert is_lll_reduced(red)
    assert numpy_lovasz_ok([[float(x) for x in v] for v in red.basis])


def test_defect_examples():
    assert orthogonality_defect(QuadLattice([[2, 0], [0, 3]])) == pytest.approx(1.0)
    assert orthogonality_defect(QuadLattice([[1, 0], [1, 1]])) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert orthogonality_defect_sq(QuadLattice([[1, 0], [1, 1]])) == 2


def test_volume_examples():
    assert k_volume(QuadLattice([[1, 0, 0], [0, 1, 0], [0, 0, 1]])).value == pytest.approx(1.0)
    assert k_volume(QuadLattice([[2, 0], [0, 3]])).value == pytest.approx(6.0)
    assert k_volume(QuadLattice([[1, 0], [100, 1]])).value == pytest.approx(1.0)


def test_gromov_examples():
    assert gromov_mass([[1, 0], [0, 1]])[0] == pytest.approx(1.0)
    assert gromov_mass([[1, 0], [0, 1]], scale=2)[0] == pytest.approx(2.0)
    est, _, flags = gromov_mass([[1, 0], [1, 1]])
    assert est == pytest.approx(1.0) and flags["upper_bound"]


def test_errors():
    with pytest.raises(NotPositiveDefinite):
        QuadLattice(gram=[[1, 2], [2, 1]])
    with pytest.raises(InvalidInput):
        QuadLattice(gram=[[1, 0], [1, 1]])
    with pytest.raises(InvalidInput):
        lll_reduce(QuadLattice([[1]]), Fraction(1, 5))
    with pytest.raises(InvalidInput):
        gromov_mass([[1, 1], [2, 2]])


def test_short_vectors_against_box_enumeration():
    rng = random.Random(11)
    for _ in range(10):
        L = QuadLattice(random_basis(rng, 3, -4, 4))
        red = lll_reduce(L)
        bound = max(red.gram[i][i] for i in range(3))
        ours = set(short_vectors(red.gram, bound))
        box = set()
        for v in itertools.product(range(-6, 7), repeat=3):
            if any(v):
                key = v if next(a for a in v if a) > 0 else tuple(-a for a in v)
                if sum(v[i] * v[j] * red.gram[i][j] for i in range(3) for j in range(3)) <= bound:
                    box.add(key)
        assert box <= ours


def test_enumeration_volume_is_optimal_in_dimension_two():
    rng = random.Random(3)
    for _ in range(15):
        L = QuadLattice(random_basis(rng, 2, -9, 9))
        vol = k_volume(L)
        g = lll_reduce(L).gram
        best = math.inf
        rng_box = range(-5, 6)
        for a, b, c, d in itertools.product(rng_box, repeat=4):
            if a * d - b * c in (1, -1):
                n1 = a * a * g[0][0] + 2 * a * b * g[0][1] + b * b * g[1][1]
                n2 = c * c * g[0][0] + 2 * c * d * g[0][1] + d * d * g[1][1]
                best = min(best, math.sqrt(float(n1 * n2)))
        assert vol.value == pytest.approx(best, rel=1e-12)
        assert vol.value <= vol.lll_value * (1 + 1e-12)


def test_volume_transform_is_unimodular_and_consistent():
    rng = random.Random(7)
    for k in (3, 4):
        L = QuadLattice(random_basis(rng, k, -6, 6))
        vol = k_volume(L)
        T = vol.basis_transform
        assert abs(linalg.det(T)) == 1
        g = L.gram
        norms = [sum(T[r][i] * T[r][j] * g[i][j] for i in range(k) for j in range(k)) for r in range(k)]
        assert vol.value == pytest.approx(math.sqrt(float(math.prod(norms))), rel=1e-12)
        assert vol.value >= math.sqrt(float(L.det())) * (1 - 1e-12)


def test_json_round_trip():
    L = QuadLattice([[1, Fraction(1, 2)], [0, 3]])
    M = QuadLattice.from_json(L.to_json())
    assert M.gram == L.gram and M.basis == L.basis


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10 ** 6))
def test_lll_invariants(k, seed):
    rng = random.Random(seed)
    L = QuadLattice(random_basis(rng, k))
    red = lll_reduce(L)
    assert red.det() == L.det()
    assert is_lll_reduced(red)
    assert abs(linalg.det(red.transform)) == 1
    assert orthogonality_defect_sq(red) <= Fraction(2) ** (k * (k - 1) // 2)
    assert orthogonality_defect(red) >= 1 - 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 5))
def test_gromov_homogeneous(seed, lam):
    rng = random.Random(seed)
    vecs = random_basis(rng, 3, -5, 5)
    a = gromov_mass(vecs)[0]
    b = gromov_mass(vecs, scale=lam)[0]
    assert b == pytest.approx(lam * a, rel=1e-12)
