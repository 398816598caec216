import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ria.alignment import (
    ChannelInstance,
    DegenerateChannelError,
    RationalGainError,
    cross_gain_decomposition,
    gic3_asymmetric_models,
    gic3_models,
    gic_single_stream_models,
    standardize_three_user,
    symmetric_multilayer_model,
    x_channel_models,
)
from ria.constellations import select_rational
from ria.numerics import QuadField, rational_rank

K = QuadField(2, 3)
ONE, R2, R3 = K(1), K.sqrt(2), K.sqrt(3)
X_GAINS = ((ONE, R2), (R3, ONE))
GIC4 = (
    (R3, ONE, R2, ONE),
    (R2, R3, ONE, ONE),
    (ONE, R2, R3, ONE),
    (ONE, ONE, R2, R3),
)


def received_coefficients(schemes, gains, receiver):
    """Stream -> end-to-end coefficient at ``receiver`` (amplitude factored out)."""
    out = {}
    for s in schemes:
        for sid, t, _ in s.streams:
            out[sid] = gains[receiver - 1][s.transmitter - 1] * t
    return out


def model_coefficients(model):
    out = {model.stream: model.signal_gain}
    for g, agg in zip(model.bases, model.aggregates):
        for sid, c in agg:
            out[sid] = out.get(sid, 0) + c * g
    return out


def check_models_against_channel(schemes, models, gains):
    for model in models:
        expect = received_coefficients(schemes, gains, model.receiver)
        got = model_coefficients(model)
        assert set(got) == set(expect)
        for sid in expect:
            assert got[sid] == expect[sid], (model.stream, sid)


def check_conservation(model, all_streams):
    inter = sorted(set(model.interfering_streams()))
    assert inter == sorted(set(all_streams) - {model.stream})


def test_x_channel_models():
    ch = ChannelInstance(X_GAINS, P=1e10)
    schemes, models = x_channel_models(ch, 0.1)
    check_models_against_channel(schemes, models, X_GAINS)
    m1 = models[0]
    assert m1.stream == "u1" and m1.m == 2
    # normalized by G0 = h11 h22 = 1 the bases are {1, sqrt6, sqrt2}
    assert [m1.signal_gain, *m1.bases] == [ONE, K.sqrt(6), R2]
    assert rational_rank([m1.signal_gain, *m1.bases]) == 3
    assert not any(m.degenerate for m in models)
    Q = m1.constellation.Q
    assert m1.bounds == (Q, 2 * Q)
    for m in models:
        check_conservation(m, ["u1", "u2", "v1", "v2"])
        assert m.m == 2


def test_x_channel_alignment_is_literal():
    for gains in (X_GAINS, ((0.7, 1.3), (1.9, 0.6))):
        ch = ChannelInstance(gains, P=1e8)
        schemes, _ = x_channel_models(ch, 0.1)
        c1 = received_coefficients(schemes, gains, 1)
        assert c1["v1"] == c1["v2"]
        c2 = received_coefficients(schemes, gains, 2)
        assert c2["u1"] == c2["u2"]


def test_x_channel_rational_is_degenerate():
    F = Fraction
    ch = ChannelInstance(((F(1), F(2)), (F(3), F(4))), P=1e6)
    _, models = x_channel_models(ch, 0.1)
    m1 = models[0]
    assert [m1.signal_gain, *m1.bases] == [4, 6, 2]
    assert rational_rank([m1.signal_gain, *m1.bases]) == 1
    assert all(m.degenerate for m in models)


def test_zero_gain_rejected():
    with pytest.raises(DegenerateChannelError):
        ChannelInstance(((ONE, K(0)), (R3, ONE)), P=1.0)


@pytest.mark.parametrize("P", [1e4, 1e6, 1e8, 1e10, 1e12])
def test_x_channel_peak_power(P):
    schemes, _ = x_channel_models(ChannelInstance(X_GAINS, P=P), 0.1)
    assert max(s.peak for s in schemes) ** 2 <= P * (1 + 1e-12)


def test_gic4_models():
    ch = ChannelInstance(GIC4, P=1e8)
    schemes, models = gic_single_stream_models(ch, 0.1)
    check_models_against_channel(schemes, models, GIC4)
    for m in models:
        assert m.m == 2 and len(m.aggregates) == 2
        assert rational_rank([m.signal_gain, *m.bases]) == 3
        check_conservation(m, ["u1", "u2", "u3", "u4"])
        Q = m.constellation.Q
        assert m.bounds == tuple(sum(abs(c) * Q for _, c in agg) for agg in m.aggregates)


def test_gic_rational_cross_gains():
    F = Fraction
    gains = ((R3, F(1), F(2)), (F(3), R3 * 2, F(1, 2)), (F(5), F(7), R3 + 1))
    gains = tuple(tuple(K(g) if isinstance(g, Fraction) else g for g in r) for r in gains)
    schemes, models = gic_single_stream_models(ChannelInstance(gains, P=1e8), 0.1)
    check_models_against_channel(schemes, models, gains)
    assert all(m.m == 1 for m in models)


def test_coefficient_clearing():
    bases, coefs = cross_gain_decomposition([Fraction(1, 2), Fraction(3, 2)])
    assert bases == [Fraction(1, 2)]
    assert coefs == [[1], [3]]


@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(1, 4)), min_size=1, max_size=4))
@settings(max_examples=50, deadline=None)
def test_decomposition_reconstructs(specs):
    cross = [K(Fraction(p, d), Fraction(q, d)) for p, q, d in specs if (p, q) != (0, 0)]
    if not cross:
        return
    bases, coefs = cross_gain_decomposition(cross)
    assert len(bases) == rational_rank(cross)
    for g, row in zip(cross, coefs):
        assert all(isinstance(c, int) for c in row)
        assert sum((c * b for c, b in zip(row, bases)), K(0)) == g


def test_standardize_all_ones():
    std = standardize_three_user([[1] * 3] * 3)
    assert (std.G0, std.G1, std.G2, std.G3) == (1, 1, 1, 1)


def test_standardize_zero_gain():
    with pytest.raises(DegenerateChannelError):
        standardize_three_user([[1, 0, 1], [1, 1, 1], [1, 1, 1]])


nonzero_q = st.fractions(min_value=-9, max_value=9, max_denominator=9).filter(bool)


@given(st.lists(nonzero_q, min_size=9, max_size=9))
@settings(max_examples=60, deadline=None)
def test_standardize_exact(vals):
    h = [vals[0:3], vals[3:6], vals[6:9]]
    std = standardize_three_user(h)
    e = std.effective
    for j, i in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0)]:
        assert e[j][i] == 1
    assert e[2][1] == std.G0 == h[0][2] * h[1][0] * h[2][1] / (h[0][1] * h[1][2] * h[2][0])
    assert (e[0][0], e[1][1], e[2][2]) == (std.G1, std.G2, std.G3)
    assert std.G1 == std.G1_displayed and std.G3 == std.G3_displayed


def test_printed_receiver3_divisor_does_not_standardize():
    F = Fraction
    h = [[F(2), F(3), F(5)], [F(7), F(11), F(13)], [F(17), F(19), F(23)]]
    std = standardize_three_user(h)
    printed = h[1][0] / (h[0][1] * h[1][2] * h[2][0])
    cross = h[2][0] * std.tx_scale[0] / printed
    assert cross != 1
    assert h[2][0] * std.tx_scale[0] / std.rx_divisor[2] == 1


def test_standardize_field_gains():
    h = [[R2, ONE, R3], [ONE + R2, R3, ONE], [R2, R3 + 1, ONE * 2]]
    std = standardize_three_user(h)
    e = std.effective
    assert all(e[j][i] == 1 for j, i in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0)])
    assert e[2][1] == std.G0


def test_gic3_asymmetric():
    std_channel = [[ONE, ONE, ONE], [ONE, ONE, ONE], [ONE, R2, ONE]]
    std = standardize_three_user(std_channel)
    assert std.G0 == R2
    # force G1 = sqrt3 so receiver 1 sees {sqrt3, sqrt6, 1}
    from dataclasses import replace
    std = replace(std, G1=R3)
    schemes, models = gic3_asymmetric_models(std, 0.1, 1e8)
    Q = models[0].constellation.Q
    assert Q == math.floor(1e8 ** (0.9 / (2 * 3.1)))
    m1 = models[0]
    assert [m1.signal_gain, *m1.bases] == [R3, K.sqrt(6), ONE]
    assert rational_rank([m1.signal_gain, *m1.bases]) == 3
    assert {m.stream for m in models} == {"u1", "u1p", "u2", "u3"}
    all_streams = ["u1", "u1p", "u2", "u3"]
    for m in models:
        assert m.m == 2
        check_conservation(m, all_streams)
        agg_bounds = [b for b, agg in zip(m.bounds, m.aggregates) if len(agg) == 2]
        assert agg_bounds == [2 * Q]
    std_gains = ((R3, ONE, ONE), (ONE, std.G2, ONE), (ONE, std.G0, std.G3))
    check_models_against_channel(schemes, models, std_gains)


def test_gic3_rational_redirect():
    F = Fraction
    std = standardize_three_user([[F(1), F(1), F(1)], [F(1), F(1), F(1)], [F(1), F(3, 2), F(1)]])
    assert std.G0 == F(3, 2)
    with pytest.raises(RationalGainError):
        gic3_asymmetric_models(std, 0.1, 1e8)
    _, models = gic3_models(std, 0.1, 1e8)
    assert all(m.m == 1 for m in models)
    assert models[0].constellation.Q == math.floor(1e8 ** (0.9 / (2 * 2.1)))


def test_symmetric_model_enumeration_values():
    sel = select_rational(Fraction(2, 3))
    _, model = symmetric_multilayer_model(Fraction(2, 3), sel, 1)
    vals = sorted({int(u) + Fraction(2, 3) * int(i) for u in model.constellation.points
                   for i in model.aggregate_values(0)})
    assert vals == [0, Fraction(2, 3), 1, Fraction(4, 3), Fraction(5, 3), Fraction(7, 3)]
    assert list(model.aggregate_values(0)) == [0, 1, 2]
    _, m2 = symmetric_multilayer_model(Fraction(2, 3), sel, 2)
    assert m2.constellation.cardinality == 4
    assert m2.constellation.cardinality * len(m2.aggregate_values(0)) == 36
    with pytest.raises(ValueError):
        symmetric_multilayer_model(Fraction(2, 3), type("S", (), {"a": 6, "W": 6})(), 1)
