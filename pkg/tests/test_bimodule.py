import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import QQ, QSQRT2, algebra, bimodule, random_positive_weights
from ncheight.bimodule import (HermitianBimodule, TwoMorphism, canonical_basis_height, check_HKZ,
                               compose_vertical, concrete_tensor_oracle, fusion_multiplicities,
                               global_height_product, hs_height, jones_index, lattice_volume_height,
                               make_hermitian_bimodule, module_ranks, multiplicities_from_oracle,
                               nonarch_height_component, order_volume, relative_height, tensor_bimodules,
                               tensor_elements, unit_bimodule)
from ncheight.errors import (BudgetExceeded, CompositionError, FieldMismatch, NotInvertible, NotPositive,
                             ZeroModule)
from ncheight.exact import PowerProduct


def column(n):
    """Q^n as an (M_n(Q), Q) bimodule with unit weights."""
    return bimodule(algebra(n), algebra(1), [(0, 0, [1], [1])])


def row(n):
    return bimodule(algebra(1), algebra(n), [(0, 0, [1], [1])])


def test_trivial_bimodule():
    Q1 = algebra(1)
    E = make_hermitian_bimodule(Q1, Q1, [(0, 0, 1, 1)])
    x = E.basis_elements()[0]
    assert E.h_left(x, x) == Q1.one() and E.h_right(x, x) == Q1.one()


def test_column_module_dimensions():
    E = make_hermitian_bimodule(algebra(2), algebra(1), [(0, 0, 1, 1)])
    assert E.dim() == 2 and module_ranks(E)[0].rational_comps() == [1]


def test_construction_errors():
    Q1 = algebra(1)
    with pytest.raises(NotInvertible):
        make_hermitian_bimodule(Q1, Q1, [(0, 0, 1, 1)], beta_B=0)
    with pytest.raises(FieldMismatch):
        make_hermitian_bimodule(Q1, algebra(1, field=QSQRT2), [(0, 0, 1, 1)])
    with pytest.raises(NotPositive):
        bimodule(Q1, Q1, [(0, 0, [-1], [1])])
    R = algebra(1, field=QSQRT2)
    with pytest.raises(NotPositive):
        bimodule(R, R, [(0, 0, [QSQRT2.element([1, 1])], [1])])


def test_hkz_membership():
    A = algebra(2)
    assert check_HKZ(unit_bimodule(A)).member
    Ai = algebra(1, field=QQ.__class__([1, 0, 1]))
    E = HermitianBimodule(Ai, algebra(1, field=QSQRT2), [])
    rep = check_HKZ(E)
    assert not rep.member and "no identification" in rep.reasons[0]
    A2 = algebra(1, 1)
    off = bimodule(A2, A2, [(0, 1, [1], [1])])
    rep = check_HKZ(off)
    assert not rep.member and any("off the iota-diagonal" in r for r in rep.reasons)


def test_tensor_examples():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2, 3], [5, 7])])
    assert tensor_bimodules(E, unit_bimodule(Q1)) == E
    assert tensor_bimodules(row(2), column(2)).dim() == 1
    assert tensor_bimodules(column(2), row(2)).dim() == 4
    with pytest.raises(CompositionError):
        tensor_bimodules(column(2), column(2))


def test_oracle_examples():
    E = bimodule(algebra(2), algebra(2), [(0, 0, [1, 2], [3, 1])])
    assert concrete_tensor_oracle(E, unit_bimodule(algebra(2))).dim == E.dim()
    assert concrete_tensor_oracle(row(2), column(2)).dim == 1
    zero = HermitianBimodule(algebra(2), algebra(1), [])
    assert concrete_tensor_oracle(row(2), zero).dim == 0
    with pytest.raises(BudgetExceeded):
        concrete_tensor_oracle(E, E, budget=10)


def test_oracle_form_samples_match_tensor_forms():
    A, B, C = algebra(2, 1), algebra(1, 2), algebra(2)
    E = bimodule(A, B, [(0, 1, [2, 1], [3, 3]), (1, 0, [1], [5])])
    F = bimodule(B, C, [(1, 0, [1], [2]), (0, 0, [4, 1], [1, 1])])
    orc = concrete_tensor_oracle(E, F, samples=4, seed=3)
    for s in orc.samples:
        T, tx = tensor_elements(E, F, *s["x"])
        _, ty = tensor_elements(E, F, *s["y"])
        assert T.h_left(tx, ty) == s["h_left"]
        assert T.h_right(tx, ty) == s["h_right"]
    assert multiplicities_from_oracle(E, F, orc) == tensor_bimodules(E, F).multiplicity_data()


def test_canonical_height_examples():
    A = algebra(2, 1)
    assert canonical_basis_height(unit_bimodule(A)).exact == PowerProduct.one()
    Q1 = algebra(1)
    E = make_hermitian_bimodule(Q1, Q1, [(0, 0, 1, 1)], beta_A=1, beta_B=2)
    assert canonical_basis_height(E).exact == PowerProduct.from_rational(4)
    with pytest.raises(ZeroModule):
        canonical_basis_height(HermitianBimodule(Q1, Q1, []))


def test_canonical_height_irrational_weights():
    R = algebra(1, field=QSQRT2)
    w = QSQRT2.element([2, 1])                       # 2 + sqrt 2, totally positive
    E = bimodule(R, R, [(0, 0, [1], [w])])
    res = canonical_basis_height(E)
    assert res.exact is None
    assert res.value == pytest.approx(2 + 2 ** 0.5, rel=1e-14)


def test_canonical_height_search_never_increases():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [1, 1], [1, 9])])
    plain = canonical_basis_height(E)
    searched = canonical_basis_height(E, search_budget=200, seed=1)
    assert searched.value <= plain.value


def test_lattice_height_examples():
    Q1 = algebra(1)
    Z = unit_bimodule(Q1)
    assert lattice_volume_height(Z).raw == pytest.approx(1.0)
    r = lattice_volume_height(Z, right_lattice=[[2]])
    assert r.vol_right == pytest.approx(2.0) and r.raw == pytest.approx(2.0)


def test_lattice_normalization_factor():
    R = algebra(1, field=QSQRT2)
    E = bimodule(R, algebra(1, 1, field=QSQRT2), [(0, 0, [1], [1]), (0, 1, [1], [2])])
    res = lattice_volume_height(E)
    ra, rb = module_ranks(E)
    sa, sb = sum(ra.rational_comps()), sum(rb.rational_comps())
    oa, ob = order_volume(E.left), order_volume(E.right)
    assert oa == pytest.approx(8 ** 0.5)
    assert res.raw == pytest.approx(res.normalized * ob ** float(sb) / oa ** float(sa), rel=1e-12)


def test_hs_height_examples():
    assert hs_height(unit_bimodule(algebra(2, 1))) == 1
    M2 = bimodule(algebra(2), algebra(1), [(0, 0, [1, 1], [1, 1])])
    assert hs_height(M2) == 2


def test_hs_height_not_multiplicative_over_multiblock_middle():
    # with B = Q + M_2(Q) the rank sums do not compose: 2/3 * 4/3 = 8/9 but E (x) F has height 1
    A, B, C = algebra(1), algebra(1, 2), algebra(1)
    E = bimodule(A, B, [(0, 0, [1], [1]), (0, 1, [1], [1])])
    F = bimodule(B, C, [(0, 0, [1, 1], [1, 1]), (1, 0, [1], [1])])
    assert hs_height(E) == Fraction(2, 3)
    assert hs_height(F) == Fraction(4, 3)
    assert hs_height(tensor_bimodules(E, F)) == 1


def test_jones_examples():
    for n in range(1, 5):
        res = jones_index(column(n))
        assert res.ind_left == [1] and res.ind_right == [1] and res.height == 1
    M2 = bimodule(algebra(2), algebra(1), [(0, 0, [1, 1], [1, 1])])
    res = jones_index(M2)
    assert res.ind_left == [2] and res.ind_right == [2]


def test_jones_index_multiplicative():
    E = bimodule(algebra(2), algebra(1), [(0, 0, [1, 1], [1, 1])])
    F = bimodule(algebra(1), algebra(3), [(0, 0, [1], [1])])
    G = tensor_bimodules(E, F)
    je, jf, jg = jones_index(E), jones_index(F), jones_index(G)
    assert jg.ind_left[0] == je.ind_left[0] * jf.ind_left[0]
    assert jg.ind_right[0] == je.ind_right[0] * jf.ind_right[0]


def test_relative_height_examples():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [1], [2])])
    Et = bimodule(Q1, Q1, [(0, 0, [1], [6])])
    assert relative_height(TwoMorphism.identity(E)) == PowerProduct.one()
    phi = TwoMorphism(E, Et, {(0, 0): [[1]]})
    assert relative_height(phi) == PowerProduct.from_rational(3)
    assert not phi.validation["valid"]


def test_relative_height_multiplicative_under_vertical_composition():
    Q1 = algebra(1)
    E = bimodule(Q1, Q1, [(0, 0, [2], [8])])
    F = bimodule(Q1, Q1, [(0, 0, [1, 1], [2, 6])])
    G = bimodule(Q1, Q1, [(0, 0, [1, Fraction(1, 2), Fraction(1, 2)], [2, 3, 3])])
    phi1 = TwoMorphism(E, F, {(0, 0): [[1], [1]]})
    phi2 = TwoMorphism(F, G, {(0, 0): [[1, 0], [0, 1], [0, 1]]})
    assert phi1.validation["valid"] and phi2.validation["valid"]
    comp = compose_vertical(phi2, phi1)
    assert comp.validation["valid"]
    assert relative_height(comp) == relative_height(phi1) * relative_height(phi2)


def test_nonarch_components():
    Q1 = algebra(1)
    U = unit_bimodule(Q1)
    for p in (2, 3, 5):
        assert nonarch_height_component(U, p) == PowerProduct.one()
    E = make_hermitian_bimodule(Q1, Q1, [(0, 0, 1, 1)], beta_B=2)
    assert nonarch_height_component(E, 2).as_fraction() == Fraction(1, 4)
    assert global_height_product(E) == PowerProduct.one()
    assert nonarch_height_component(E, 2, kind="rank").as_fraction() == Fraction(1, 4)


def test_json_round_trip():
    A = algebra(2, 1)
    E = bimodule(A, algebra(1), [(0, 0, [1, Fraction(1, 2)], [3, 3]), (1, 0, [2], [5])])
    assert HermitianBimodule.from_json(E.to_json()) == E


def _random_pair(rng, field):
    """Composable E: A-B, F: B-C on the iota-diagonal with random central weights."""
    s = rng.randint(1, 2)
    sizes = [[rng.randint(1, 2) for _ in range(s)] for _ in range(3)]
    A, B, C = (algebra(*sz, field=field) for sz in sizes)
    comps_e = [(i, i, random_positive_weights(rng, field, d := rng.randint(1, 2)),
                random_positive_weights(rng, field, d)) for i in range(s)]
    comps_f = [(i, i, random_positive_weights(rng, field, d := rng.randint(1, 2)),
                random_positive_weights(rng, field, d)) for i in range(s)]
    return bimodule(A, B, comps_e), bimodule(B, C, comps_f)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_canonical_height_multiplicative_rational(seed):
    E, F = _random_pair(random.Random(seed), QQ)
    T = tensor_bimodules(E, F)
    assert check_HKZ(E).member and check_HKZ(F).member
    assert canonical_basis_height(T).exact == canonical_basis_height(E).exact * canonical_basis_height(F).exact


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_canonical_height_multiplicative_irrational(seed):
    E, F = _random_pair(random.Random(seed), QSQRT2)
    lhs = canonical_basis_height(tensor_bimodules(E, F)).value
    rhs = canonical_basis_height(E).value * canonical_basis_height(F).value
    assert abs(lhs - rhs) <= 1e-9 * rhs


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_tensor_unit_is_identity(seed):
    E, _ = _random_pair(random.Random(seed), QQ)
    T = tensor_bimodules(E, unit_bimodule(E.right))
    assert T == E
    assert canonical_basis_height(T).exact == canonical_basis_height(E).exact
    assert fusion_multiplicities(unit_bimodule(E.left), E) == E.multiplicity_data()
