import cmath
import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import QQ, QSQRT2, algebra, bimodule, random_positive_weights
from ncheight.bimodule import TwoMorphism, tensor_bimodules, unit_bimodule
from ncheight.dynamics import (a2_products, a2_time_evolve, build_universe, convolve, delta, derive_two_table,
                               hamiltonian_spectrum, identity_two_morphism, make_two_table, max_deviation,
                               partition_function, partition_sweep_csv, rank_multiplicity, time_evolve)
from ncheight.errors import InvalidInput, InvalidTwoCategory
from ncheight.exact import PowerProduct

TIMES = (0.5, -0.5, 1.0, -1.0, math.pi)


def cyclic_universe():
    """Unit, s and s^2 for the 3-cycle permutation bimodule of Q + Q + Q: closed under tensor."""
    A = algebra(1, 1, 1)
    s = bimodule(A, A, [(0, 1, [1], [1]), (1, 2, [1], [1]), (2, 0, [1], [1])])
    return build_universe([unit_bimodule(A), s, tensor_bimodules(s, s)])


def random_universe(rng, field):
    """Unit, two random 1-dim Q-Q (or K-K) bimodules and their products; heights multiplicative."""
    A = algebra(1, field=field)
    gens = [bimodule(A, A, [(0, 0, random_positive_weights(rng, field, 1), random_positive_weights(rng, field, 1))])
            for _ in range(2)]
    members = [unit_bimodule(A), *gens]
    members += [tensor_bimodules(a, b) for a in gens for b in gens]
    return build_universe(members)


def random_observable(rng, n):
    return {k: complex(rng.randint(-3, 3), rng.randint(-3, 3)) for k in range(n) if rng.random() < 0.7}


def brute_rank(n, r):
    ranges = [range(r // s + 1) for s in n]
    return sum(1 for N in itertools.product(*ranges) if sum(a * b for a, b in zip(n, N)) == r)


def test_universe_examples():
    A = algebra(2)
    U = build_universe([unit_bimodule(A)])
    assert U.table == {0: [(0, 0)]} and U.closure["closed"]
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2], [3])])
    U = build_universe([unit_bimodule(Q1), E])
    assert U.table[1] == [(0, 1), (1, 0)]
    assert U.closure["products_outside"] == [[1, 1]]
    assert len(build_universe([])) == 0


def test_universe_drops_duplicate_classes():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2], [3])])
    assert len(build_universe([E, E])) == 1
    F = bimodule(Q1, Q1, [(0, 0, [1], [5])])
    assert len(build_universe([E, F], height="hs")) == 1
    assert len(build_universe([E, F])) == 2


def test_convolution_examples():
    U = cyclic_universe()
    assert convolve(delta(0), delta(0), U) == {0: 1}
    assert convolve(delta(1), delta(1), U) == {2: 1}
    assert convolve(delta(1), delta(2), U) == {0: 1}
    with pytest.raises(InvalidInput):
        convolve({7: 1}, delta(0), U)


def test_convolution_associative_on_closed_universe():
    U = cyclic_universe()
    assert U.closure["closed"]
    rng = random.Random(4)
    for _ in range(20):
        f, g, h = (random_observable(rng, 3) for _ in range(3))
        assert convolve(convolve(f, g, U), h, U) == convolve(f, convolve(g, h, U), U)


def test_time_evolution_identity_and_group_law():
    rng = random.Random(2)
    U = random_universe(rng, QQ)
    f = random_observable(rng, len(U))
    assert time_evolve(f, 0.0, U) == f
    for t, s in itertools.product(TIMES, repeat=2):
        lhs = time_evolve(f, t + s, U)
        rhs = time_evolve(time_evolve(f, s, U), t, U)
        assert max_deviation(lhs, rhs) < 1e-14 * (1 + max(abs(v) for v in f.values()))


@pytest.mark.parametrize("field", [QQ, QSQRT2], ids=["rational", "sqrt2"])
def test_time_evolution_is_homomorphism(field):
    rng = random.Random(8)
    for _ in range(10):
        U = random_universe(rng, field)
        assert U.height_consistent
        f, g = random_observable(rng, len(U)), random_observable(rng, len(U))
        for t in TIMES:
            lhs = time_evolve(convolve(f, g, U), t, U)
            rhs = convolve(time_evolve(f, t, U), time_evolve(g, t, U), U)
            assert max_deviation(lhs, rhs) < 1e-12


def test_evolution_moves_nontrivial_heights():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [1], [2])])
    U = build_universe([E])
    out = time_evolve(delta(0), 1.0, U)
    assert out[0] == pytest.approx(cmath.exp(1j * math.log(2)), abs=1e-15)


def test_spectrum_examples():
    assert hamiltonian_spectrum([1]).levels == [(0.0, 1)]
    sp = hamiltonian_spectrum([1, 2, 2])
    assert sp.exact and sp.levels == [(0.0, 1), (pytest.approx(math.log(2), rel=1e-15), 2)]
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2], [1])])
    sp = hamiltonian_spectrum(build_universe([E]), constraint="left-normalized")
    assert sp.levels == [] and sp.excluded == [0]


def test_spectrum_groups_irrational_heights_within_tolerance():
    r = 2 ** 0.5
    sp = hamiltonian_spectrum([r, r * (1 + 1e-13), 3.0])
    assert not sp.exact and [m for _, m in sp.levels] == [2, 1]
    with pytest.raises(InvalidInput):
        hamiltonian_spectrum([1, 0])


def test_partition_examples():
    one = hamiltonian_spectrum([1])
    for beta in (0.5, 1, 7):
        assert partition_function(one, beta).value == 1
    two = hamiltonian_spectrum([1, 2])
    for beta in (0.5, 1, 3):
        assert partition_function(two, beta).value == pytest.approx(1 + 2 ** -beta, rel=1e-15)
    z = partition_function(beta=3, blocks=[1], R=200).value
    assert z == pytest.approx(math.fsum(r ** -3 for r in range(1, 201)), rel=1e-15)
    with pytest.raises(InvalidInput):
        partition_function(two, beta=0)


def test_partition_monotone_and_low_temperature_limit():
    sp = hamiltonian_spectrum([1, 1, 2, 3, PowerProduct.from_rational(5)])
    values = [partition_function(sp, b).value for b in (0.5, 1, 2, 4, 8, 16)]
    assert values == sorted(values, reverse=True)
    assert partition_function(sp, 50).value == pytest.approx(2.0, abs=1e-14)


def test_rank_partition_tail_bound_holds():
    short = partition_function(beta=4, blocks=[1, 2], R=100)
    long = partition_function(beta=4, blocks=[1, 2], R=5000)
    assert 0 <= long.value - short.value <= short.tail_bound


def test_partition_sweep_csv():
    text = partition_sweep_csv(hamiltonian_spectrum([1, 2]), [1, 2])
    assert text.splitlines() == ["beta,Z", "1.0,1.5", "2.0,1.25"]


def test_rank_multiplicity_examples():
    assert rank_multiplicity([1, 2], 4) == 3
    assert all(rank_multiplicity([1], r) == 1 for r in range(20))
    assert rank_multiplicity([2], 3) == 0
    with pytest.raises(InvalidInput):
        rank_multiplicity([0], 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 30))
def test_rank_multiplicity_brute_force(n, r):
    assert rank_multiplicity(n, r) == brute_rank(n, r)


def height_changing_table():
    """Identities of Z, E, F and phi: E -> F, where phi has relative height sqrt(3)/2."""
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2], [8])])
    F = bimodule(Q1, Q1, [(0, 0, [1, 1], [2, 6])])
    phi = TwoMorphism(E, F, {(0, 0): [[1], [1]]})
    assert phi.validation["valid"]
    return derive_two_table([identity_two_morphism(unit_bimodule(Q1)), identity_two_morphism(E),
                             identity_two_morphism(F), phi])


def test_two_table_identity_is_vertical_unit():
    T = height_changing_table()
    assert T.vertical[(2, 3)] == 3 and T.vertical[(3, 1)] == 3
    assert T.heights[3] == PowerProduct.from_rational(3) ** Fraction(1, 2) / 2
    f = {3: 2 + 1j}
    assert a2_products(delta(2), f, T) == f
    assert a2_products(f, delta(1), T) == f
    assert a2_products(delta(0), f, T, "horizontal") == f


def test_two_table_homomorphism():
    T = height_changing_table()
    rng = random.Random(6)
    for _ in range(10):
        f, g = random_observable(rng, 4), random_observable(rng, 4)
        for kind in ("vertical", "horizontal"):
            for t in TIMES:
                lhs = a2_time_evolve(a2_products(f, g, T, kind), t, T)
                rhs = a2_products(a2_time_evolve(f, t, T), a2_time_evolve(g, t, T), T, kind)
                assert max_deviation(lhs, rhs) < 1e-12


def test_declared_tables_are_validated():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2], [8])])
    z, e = identity_two_morphism(unit_bimodule(Q1)), identity_two_morphism(E)
    with pytest.raises(InvalidTwoCategory):
        make_two_table([z, e], {(0, 1): 0}, {})
    with pytest.raises(InvalidTwoCategory):
        make_two_table([z, e], {(0, 0): 5}, {})
    # hor(vert(0,0), vert(1,1)) = 2 but vert(hor(0,1), hor(0,1)) = 1
    with pytest.raises(InvalidTwoCategory):
        make_two_table([z, e, e], {(0, 0): 0, (1, 1): 1, (2, 2): 1}, {(0, 1): 2})
    with pytest.raises(InvalidInput):
        a2_products({}, {}, height_changing_table(), "diagonal")
