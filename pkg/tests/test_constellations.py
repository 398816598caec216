import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from ria.constellations import (
    MultiLayerConstellation,
    build_single_layer,
    digits_decode,
    digits_encode,
    dof_rational_formula,
    multilayer_amplitude,
    multilayer_levels,
    scaling,
    select_irrational,
    select_rational,
    w_aligned_grid,
)
from ria.diophantine import RationalInputError, cf_expand
from ria.numerics import QuadField, RandomSource

K23 = QuadField(2, 3)
K52 = QuadField(5, 2)


def test_single_layer():
    c = build_single_layer(0)
    assert list(c.points) == [0] and c.cardinality == 1
    assert list(build_single_layer(2).points) == [-2, -1, 0, 1, 2]
    # oracle: 10^(6*0.9/6.2) = 7.4...
    assert math.floor(10 ** (6 * 0.9 / 6.2)) == 7
    assert scaling(1e6, 0.1, 2).Q == 7
    assert build_single_layer(scaling(1e6, 0.1, 2).Q).cardinality == 15


def test_scaling_trivial_power():
    s = scaling(1.0, 0.3, 4)
    assert s.Q == 1 and s.amplitude == 1.0


def test_scaling_exponents_balance():
    s = scaling(1e10, 0.1, 2)
    # amplitude * Q grows like P^(1/2) up to the epsilon terms
    assert s.q_exponent + s.amplitude_exponent == pytest.approx((2 + 1 + 0.1) / (2 * 3.1))


def test_scaling_errors():
    for bad in [(0, 0.1, 2), (1e6, 0.0, 2), (1e6, 0.5, 2), (1e6, 0.1, 0)]:
        with pytest.raises(ValueError):
            scaling(*bad)


def test_digits_examples():
    c = MultiLayerConstellation(6, 2, 3)
    assert digits_encode(c, (1, 0, 1)) == 37
    assert digits_decode(c, 37) == (1, 0, 1)
    with pytest.raises(ValueError):
        digits_decode(MultiLayerConstellation(6, 2, 2), 14)
    with pytest.raises(ValueError):
        digits_encode(c, (2, 0, 0))
    with pytest.raises(ValueError):
        MultiLayerConstellation(6, 6, 1)


@given(st.integers(2, 9), st.integers(1, 8), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_multilayer_points(W, a, L):
    a = min(a, W - 1)
    c = MultiLayerConstellation(W, a, L)
    pts = c.points
    assert len(pts) == a**L == c.cardinality
    assert len(np.unique(pts)) == len(pts)
    assert np.all(np.diff(pts) > 0)
    assert pts.max() == c.max_abs == (a - 1) * (W**L - 1) // (W - 1)
    for p in pts[:: max(1, len(pts) // 20)]:
        assert digits_encode(c, digits_decode(c, int(p))) == p


def test_rational_selection_examples():
    s = select_rational(Fraction(2, 3))
    assert (s.case, s.a, s.W) == ("I", 2, 6)
    s = select_rational(Fraction(1, 3))
    assert (s.case, s.s, s.a, s.W) == ("II", 1, 2, 6)
    s = select_rational(Fraction(1, 4))
    assert (s.case, s.s, s.a, s.W) == ("III", 2, 2, 7)
    with pytest.raises(ValueError):
        select_rational(Fraction(-1, 2))


def test_dof_formula_examples():
    assert dof_rational_formula(Fraction(2, 3)) == pytest.approx(1.1606, abs=1e-4)
    assert dof_rational_formula(Fraction(2, 3)) == 3 * math.log(2) / math.log(6)
    assert dof_rational_formula(Fraction(1, 4)) == pytest.approx(1.0686, abs=1e-4)
    assert dof_rational_formula(Fraction(1, 2)) == 0.0
    assert select_rational(Fraction(1, 2)).degenerate


def test_dof_formula_matches_table():
    checked = 0
    for n in range(1, 13):
        for m in range(1, 13):
            if math.gcd(n, m) != 1 or max(n, m) < 2:
                continue
            sel = select_rational(Fraction(n, m))
            if sel.a < 2:
                assert dof_rational_formula(Fraction(n, m)) == 0.0
                continue
            assert dof_rational_formula(Fraction(n, m)) == 3 * math.log(sel.a) / math.log(sel.W)
            checked += 1
    assert checked > 80


def test_amplitude_and_levels():
    for P in (1.0, 35.0, 1e9):
        assert multilayer_amplitude(6, 2, 1, P) == pytest.approx(math.sqrt(35 * P) / 12, rel=1e-15)
    # oracle: floor(0.45 * 12 / log10 6) = floor(6.94)
    assert math.floor(0.45 * 12 / math.log10(6)) == 6
    assert multilayer_levels(1e12, 0.05, 6) == 6
    with pytest.raises(ValueError):
        multilayer_levels(1e12, 0.05, 1)


@pytest.mark.parametrize("W,a,L", [(6, 2, 1), (6, 2, 3), (15, 3, 2), (7, 2, 4), (4336, 11, 1), (31, 4, 2)])
def test_mean_power(W, a, L):
    c = MultiLayerConstellation(W, a, L)
    P = 1e8
    A = multilayer_amplitude(W, a, L, P)
    rng = RandomSource(17)
    x = A * c.points[rng.integers(0, c.cardinality, 10**5)]
    assert np.mean(x.astype(float) ** 2) <= P
    # exact mean power under the uniform digits is also below P
    exact = A**2 * np.mean(c.points.astype(float) ** 2)
    assert exact <= P


def test_w_aligned_grid_neutralizes_floor():
    grid = w_aligned_grid(6, 0.05, 1e12)
    assert len(grid) == 6
    assert [multilayer_levels(P, 0.05, 6) for P in grid] == [1, 2, 3, 4, 5, 6]


def _irrational_oracle(h_sym, n, m, eps):
    """a, W and margin for approximant n/m, evaluated with sympy exact arithmetic."""
    a = sympy.floor(sympy.Integer(m) ** (1 - sympy.Rational(eps).limit_denominator(1000)) * sympy.sqrt(5) / 4)
    delta = sympy.Abs(h_sym - sympy.Rational(n, m))
    margin = sympy.Rational(1, m) - 4 * (a - 1) * delta
    W = sympy.ceiling(2 * (1 + 2 * h_sym) * (a - 1) / margin) + 1
    return int(a), int(W), margin


def test_select_irrational_sqrt2():
    sel = select_irrational(K23.sqrt(2), 0.1, 20)
    assert (sel.approximant.n, sel.m) == (41, 29)
    a, W, margin = _irrational_oracle(sympy.sqrt(2), 41, 29, 0.1)
    assert (sel.a, sel.W) == (a, W) == (11, 4336)
    assert float(sel.margin) == pytest.approx(float(margin), rel=1e-15)
    assert float(sel.margin) == pytest.approx(0.017664, abs=5e-7)
    # chain 4(a-1)|delta| <= 4a/(m^2 sqrt5) <= m^(1-eps)/m^2 <= 1/m
    d = abs(math.sqrt(2) - 41 / 29)
    assert 4 * (sel.a - 1) * d <= 4 * sel.a / (29**2 * math.sqrt(5)) <= 29**0.9 / 29**2 <= 1 / 29
    with pytest.raises(RationalInputError):
        select_irrational(Fraction(3, 2), 0.1, 2)


@pytest.mark.parametrize("h,sym", [(K23.sqrt(2), sympy.sqrt(2)), (K23.sqrt(3), sympy.sqrt(3)),
                                   ((1 + K52.sqrt(5)) / 2, (1 + sympy.sqrt(5)) / 2)])
def test_margin_positive_all_approximants(h, sym):
    seen = set()
    for c in cf_expand(h, 40).convergents:
        m = c.denominator
        if m < 2 or m > 10**4:
            continue
        try:
            sel = select_irrational(h, 0.1, m)
        except ValueError:
            continue  # a < 2 for tiny m
        if sel.m in seen or sel.m > 10**4:
            continue
        seen.add(sel.m)
        assert float(sel.margin) > 0
        assert sel.a < sel.W
        a, W, _ = _irrational_oracle(sym, sel.approximant.n, sel.m, 0.1)
        assert (sel.a, sel.W) == (a, W)
    assert len(seen) >= 3
