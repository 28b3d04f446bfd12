import random
from fractions import Fraction

import pytest

from ncheight.bimodule import Component, HermitianBimodule
from ncheight.numfield import NumberField
from ncheight.ssalgebra import SemisimpleAlgebra

QQ = NumberField.rationals()
QSQRT2 = NumberField([-2, 0, 1])

_acceptance_lines = []


def record_acceptance(line):
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def algebra(*sizes, field=QQ):
    """Semisimple algebra with matrix blocks of the given sizes over one field."""
    return SemisimpleAlgebra([(n, list(field.min_poly)) for n in sizes])


def bimodule(A, B, comps):
    """comps: (i, j, P, Q) with weight lists P, Q (rationals or field elements)."""
    out = []
    for i, j, P, Q in comps:
        f = A.blocks[i][1]
        out.append(Component(i, j, tuple(f.coerce(p) for p in P), tuple(f.coerce(q) for q in Q)))
    return HermitianBimodule(A, B, out)


def random_positive_weights(rng, field, d):
    if field.degree == 1:
        return [Fraction(rng.randint(1, 12), rng.randint(1, 6)) for _ in range(d)]
    # totally positive a + b*sqrt(2): a > |b| * sqrt(2)
    out = []
    for _ in range(d):
        b = rng.randint(-3, 3)
        a = 2 * abs(b) + rng.randint(1, 4)
        out.append(field.element([a, b]))
    return out


@pytest.fixture
def rng():
    return random.Random(20240611)
