"""Transmit schemes and per-receiver received models for the aligned channels."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .constellations import (
    MultiLayerConstellation,
    SingleLayerConstellation,
    multilayer_amplitude,
    scaling,
)
from .numerics import (
    HighPrecReal,
    QuadFieldElement,
    common_field,
    coordinates,
    from_coordinates,
    is_exact,
    rational_rank,
    rref,
)


class DegenerateChannelError(ValueError):
    pass


class RationalGainError(ValueError):
    """G0 of a standardized channel is rational; use the single-stream scheme with m=1."""


def gain_float(x) -> float:
    return float(x)


def exact_abs(x):
    if isinstance(x, QuadFieldElement):
        return abs(x)
    if isinstance(x, HighPrecReal):
        return abs(x)
    return abs(x)


def _is_zero(x) -> bool:
    if isinstance(x, QuadFieldElement):
        return x.is_zero()
    return x == 0


@dataclass(frozen=True)
class ChannelInstance:
    gains: tuple[tuple, ...]  # gains[j][i]: transmitter i -> receiver j
    P: float | None = None
    sigma2: float = 1.0

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.gains)
        object.__setattr__(self, "gains", rows)
        k = len(rows)
        if k < 1 or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("gain matrix must be rectangular")
        for j, r in enumerate(rows):
            for i, g in enumerate(r):
                if _is_zero(g):
                    raise DegenerateChannelError(f"zero gain h{j + 1}{i + 1}")
        kinds = {is_exact(g) for r in rows for g in r}
        if len(kinds) > 1:
            raise ValueError("gain matrix mixes exact and numeric entries")
        if self.exact:
            common_field([g for r in rows for g in r])
        if self.P is not None and not self.P > 0:
            raise ValueError("P must be positive")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")

    @property
    def exact(self) -> bool:
        return is_exact(self.gains[0][0])

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "numeric"

    @property
    def snr(self) -> float:
        return math.inf if self.sigma2 == 0 else self.P / self.sigma2

    def h(self, j: int, i: int):
        """Gain from transmitter i to receiver j, 1-based."""
        return self.gains[j - 1][i - 1]


@dataclass(frozen=True)
class TransmitScheme:
    transmitter: int
    streams: tuple  # (stream id, direction, constellation)
    amplitude: float

    def direction_sum(self) -> float:
        return sum(abs(gain_float(t)) * c.max_abs for _, t, c in self.streams)

    @property
    def peak(self) -> float:
        """Largest absolute transmit value."""
        return self.amplitude * self.direction_sum()

    def transmit(self, symbols: dict) -> float:
        return self.amplitude * sum(gain_float(t) * symbols[sid] for sid, t, _ in self.streams)


@dataclass(frozen=True)
class ReceivedModel:
    """Noiseless unit-scale received value G0*u0 + sum_k G_k I_k; the channel multiplies it by ``amplitude``."""

    receiver: int
    stream: str
    constellation: object
    signal_gain: object
    bases: tuple
    aggregates: tuple  # per basis: ((stream id, integer coefficient), ...)
    interferers: dict
    amplitude: float = 1.0
    label_mode: str = "stream"  # "joint" labels are (u0, I) pairs
    degenerate: bool = False
    reason: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.bases) != len(self.aggregates):
            raise ValueError("one aggregate per basis gain")
        for agg in self.aggregates:
            for sid, c in agg:
                if sid not in self.interferers:
                    raise ValueError(f"aggregate uses unknown stream {sid}")
                if int(c) != c or c == 0:
                    raise ValueError("aggregation coefficients must be nonzero integers")
        if self.label_mode not in ("stream", "joint"):
            raise ValueError("label_mode must be 'stream' or 'joint'")

    @property
    def m(self) -> int:
        return len(self.bases)

    @property
    def exact(self) -> bool:
        return is_exact(self.signal_gain) and all(is_exact(g) for g in self.bases)

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "numeric"

    @property
    def bounds(self) -> tuple[int, ...]:
        return tuple(sum(abs(int(c)) * self.interferers[sid].max_abs for sid, c in agg) for agg in self.aggregates)

    def interfering_streams(self) -> list[str]:
        return [sid for agg in self.aggregates for sid, _ in agg]

    def aggregate_values(self, k: int) -> np.ndarray:
        """Sorted distinct values of the k-th aggregate."""
        vals = np.zeros(1, dtype=np.int64)
        for sid, c in self.aggregates[k]:
            pts = self.interferers[sid].points * int(c)
            vals = np.unique((vals[:, None] + pts[None, :]).ravel())
        return vals

    def gains_float(self) -> tuple[float, tuple[float, ...]]:
        return gain_float(self.signal_gain), tuple(gain_float(g) for g in self.bases)

    def unit_values(self, u0: np.ndarray, aggs: Sequence[np.ndarray]) -> np.ndarray:
        """Float received values; the one evaluation order shared by enumeration and simulation."""
        g0, gs = self.gains_float()
        out = g0 * np.asarray(u0, dtype=np.float64)
        for g, v in zip(gs, aggs):
            out = out + g * np.asarray(v, dtype=np.float64)
        return out

    def rank(self) -> int | None:
        if not self.exact:
            return None
        return rational_rank([self.signal_gain, *self.bases])


def _rank_flag(g0, bases) -> tuple[bool, str]:
    if not all(is_exact(x) for x in (g0, *bases)):
        return False, ""
    r = rational_rank([g0, *bases])
    if r < len(bases) + 1:
        return True, f"rational rank {r} < {len(bases) + 1}: signal not separable from interference"
    return False, ""


def _model(receiver, stream, const, g0, bases, aggs, interferers, amplitude, **kw) -> ReceivedModel:
    deg, why = _rank_flag(g0, bases)
    return ReceivedModel(receiver, stream, const, g0, tuple(bases), tuple(aggs), dict(interferers),
                         amplitude, degenerate=deg, reason=why, **kw)


def _common_amplitude(P: float, schemes_dirs: list[list[tuple]]) -> float:
    """Largest amplitude keeping every transmitter's peak value within sqrt(P)."""
    worst = max(sum(abs(gain_float(t)) * c.max_abs for t, c in dirs) for dirs in schemes_dirs)
    if worst == 0:
        return math.sqrt(P)
    return math.sqrt(P) / worst


# --------------------------------------------------------------------------
# two-user X channel
# --------------------------------------------------------------------------


def x_channel_models(ch: ChannelInstance, epsilon: float, gamma: float = 1.0):
    """Schemes x1 = G(h22 u1 + h12 v1), x2 = G(h21 u2 + h11 v2) and the four per-stream models.

    Receiver 1 decodes u1, u2 and sees v1, v2 aligned along h11 h12;
    receiver 2 decodes v1, v2 and sees u1, u2 aligned along h21 h22.
    """
    if len(ch.gains) != 2 or len(ch.gains[0]) != 2:
        raise ValueError("X channel needs a 2x2 gain matrix")
    if ch.P is None:
        raise ValueError("X channel needs a transmit power")
    h11, h12, h21, h22 = ch.h(1, 1), ch.h(1, 2), ch.h(2, 1), ch.h(2, 2)
    Q = scaling(ch.P, epsilon, 2, gamma).Q
    c = SingleLayerConstellation(Q)
    G = _common_amplitude(ch.P, [[(h22, c), (h12, c)], [(h21, c), (h11, c)]])
    schemes = (
        TransmitScheme(1, (("u1", h22, c), ("v1", h12, c)), G),
        TransmitScheme(2, (("u2", h21, c), ("v2", h11, c)), G),
    )
    s = {sid: c for sid in ("u1", "u2", "v1", "v2")}
    a11_22, a12_21 = h11 * h22, h12 * h21
    models = (
        _model(1, "u1", c, a11_22, (a12_21, h11 * h12), ((("u2", 1),), (("v1", 1), ("v2", 1))),
               {k: s[k] for k in ("u2", "v1", "v2")}, G),
        _model(1, "u2", c, a12_21, (a11_22, h11 * h12), ((("u1", 1),), (("v1", 1), ("v2", 1))),
               {k: s[k] for k in ("u1", "v1", "v2")}, G),
        _model(2, "v1", c, a12_21, (a11_22, h21 * h22), ((("v2", 1),), (("u1", 1), ("u2", 1))),
               {k: s[k] for k in ("v2", "u1", "u2")}, G),
        _model(2, "v2", c, a11_22, (a12_21, h21 * h22), ((("v1", 1),), (("u1", 1), ("u2", 1))),
               {k: s[k] for k in ("v1", "u1", "u2")}, G),
    )
    return schemes, models


# --------------------------------------------------------------------------
# K-user single-stream interference channel
# --------------------------------------------------------------------------


def cross_gain_decomposition(cross: Sequence):
    """Basis of the rational span of ``cross`` with integer coefficients.

    Returns (bases, coefficient rows): cross[i] = sum_l coef[i][l] * bases[l], every
    coefficient an integer, each basis carrying its own cleared denominator.
    """
    fld = common_field(cross)
    rows = [coordinates(g, fld) for g in cross]
    basis_rows, pivots = rref(rows)
    # in reduced echelon form the coordinate at pivot l is the coefficient on row l
    alpha = [[r[p] for p in pivots] for r in rows]
    bases, coefs = [], [[0] * len(pivots) for _ in cross]
    for l, brow in enumerate(basis_rows):
        den = math.lcm(*(alpha[i][l].denominator for i in range(len(cross))))
        bases.append(from_coordinates([v / den for v in brow], fld))
        for i in range(len(cross)):
            coefs[i][l] = int(alpha[i][l] * den)
    return bases, coefs


def gic_single_stream_models(ch: ChannelInstance, epsilon: float, gamma: float = 1.0):
    """One stream per user, x_i = A u_i; each receiver aggregates its cross gains along a rational basis."""
    K = len(ch.gains)
    if K < 2 or any(len(r) != K for r in ch.gains):
        raise ValueError("need a square gain matrix with K >= 2")
    if not ch.exact:
        raise ValueError("the rational-dimension scheme needs exact gains")
    if ch.P is None:
        raise ValueError("need a transmit power")
    sids = [f"u{i + 1}" for i in range(K)]
    decomp = []
    for j in range(1, K + 1):
        others = [i for i in range(1, K + 1) if i != j]
        bases, coefs = cross_gain_decomposition([ch.h(j, i) for i in others])
        decomp.append((others, bases, coefs))
    ms = [len(d[1]) for d in decomp]
    # stream i is decoded only at receiver i, so its size follows that receiver's m
    consts = {sids[i]: SingleLayerConstellation(scaling(ch.P, epsilon, max(ms[i], 1), gamma).Q) for i in range(K)}
    A = _common_amplitude(ch.P, [[(1, consts[s])] for s in sids])
    schemes = tuple(TransmitScheme(i + 1, ((sids[i], 1, consts[sids[i]]),), A) for i in range(K))
    models = []
    for j, (others, bases, coefs) in enumerate(decomp, start=1):
        aggs = []
        for l in range(len(bases)):
            aggs.append(tuple((sids[i - 1], coefs[k][l]) for k, i in enumerate(others) if coefs[k][l] != 0))
        models.append(_model(j, sids[j - 1], consts[sids[j - 1]], ch.h(j, j), bases, aggs,
                             {sids[i - 1]: consts[sids[i - 1]] for i in others}, A))
    return schemes, tuple(models)


# --------------------------------------------------------------------------
# three-user channel: standard form and the asymmetric scheme
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StandardizedThreeUser:
    G0: object
    G1: object
    G2: object
    G3: object
    G1_displayed: object
    G3_displayed: object
    tx_scale: tuple  # x_i = tx_scale[i] * x~_i
    rx_divisor: tuple  # y~_j = y_j / rx_divisor[j]
    effective: tuple  # end-to-end gains after both scalings
    power_factor: tuple  # P_i = power_factor[i] * P
    noise_factor: tuple  # sigma_j^2 = noise_factor[j] * sigma^2

    def channel(self, P=None, sigma2: float = 1.0) -> ChannelInstance:
        one = self.G0 * 0 + 1
        return ChannelInstance(((self.G1, one, one), (one, self.G2, one), (one, self.G0, self.G3)), P, sigma2)


def standardize_three_user(ch) -> StandardizedThreeUser:
    gains = ch.gains if isinstance(ch, ChannelInstance) else tuple(tuple(r) for r in ch)
    if len(gains) != 3 or any(len(r) != 3 for r in gains):
        raise ValueError("need a 3x3 gain matrix")
    for j, r in enumerate(gains):
        for i, g in enumerate(r):
            if _is_zero(g):
                raise DegenerateChannelError(f"zero gain h{j + 1}{i + 1}")
    (h11, h12, h13), (h21, h22, h23), (h31, h32, h33) = gains
    G0 = h13 * h21 * h32 / (h12 * h23 * h31)
    G1_disp = h11 * h12 * h23 / (h12 * h21 * h13)
    G1 = h11 * h23 / (h21 * h13)
    G2 = h22 * h13 / (h12 * h23)
    G3_disp = h33 * h12 * h21 / (h12 * h23 * h31)
    G3 = h33 * h21 / (h23 * h31)
    tx = (h23 * h12 / h21, h13, h12)
    # receiver 3 divides by h12 h23 h31 / h21; the reciprocal does not yield unit cross gains
    rx = (h12 * h13, h12 * h23, h12 * h23 * h31 / h21)
    eff = tuple(tuple(gains[j][i] * tx[i] / rx[j] for i in range(3)) for j in range(3))
    return StandardizedThreeUser(
        G0, G1, G2, G3, G1_disp, G3_disp, tx, rx, eff,
        tuple(t * t for t in tx), tuple(1 / (r * r) for r in rx),
    )


def _is_rational_value(x) -> bool:
    if isinstance(x, QuadFieldElement):
        return x.is_rational()
    return isinstance(x, (int, Fraction))


def gic3_asymmetric_models(std: StandardizedThreeUser, epsilon: float, P: float, gamma: float = 1.0):
    """User 1 sends u1 + G0 u1'; users 2, 3 send u2, u3. Four streams, m=2 at every receiver."""
    G0, G1, G2, G3 = std.G0, std.G1, std.G2, std.G3
    if _is_rational_value(G0):
        raise RationalGainError("G0 is rational: use gic_single_stream_models on the standard channel (m=1)")
    Q = scaling(P, epsilon, 2, gamma).Q
    c = SingleLayerConstellation(Q)
    one = G0 * 0 + 1 if is_exact(G0) else 1.0
    A = _common_amplitude(P, [[(one, c), (G0, c)], [(one, c)], [(one, c)]])
    schemes = (
        TransmitScheme(1, (("u1", one, c), ("u1p", G0, c)), A),
        TransmitScheme(2, (("u2", one, c),), A),
        TransmitScheme(3, (("u3", one, c),), A),
    )
    s = {k: c for k in ("u1", "u1p", "u2", "u3")}

    def pick(*keys):
        return {k: s[k] for k in keys}

    models = (
        _model(1, "u1", c, G1, (G1 * G0, one), ((("u1p", 1),), (("u2", 1), ("u3", 1))), pick("u1p", "u2", "u3"), A),
        _model(1, "u1p", c, G1 * G0, (G1, one), ((("u1", 1),), (("u2", 1), ("u3", 1))), pick("u1", "u2", "u3"), A),
        _model(2, "u2", c, G2, (one, G0), ((("u1", 1), ("u3", 1)), (("u1p", 1),)), pick("u1", "u3", "u1p"), A),
        _model(3, "u3", c, G3, (one, G0), ((("u1", 1),), (("u1p", 1), ("u2", 1))), pick("u1", "u1p", "u2"), A),
    )
    return schemes, models


def gic3_models(std: StandardizedThreeUser, epsilon: float, P: float, gamma: float = 1.0):
    """Asymmetric scheme for irrational G0, single-stream m=1 scheme on the standard channel otherwise."""
    try:
        return gic3_asymmetric_models(std, epsilon, P, gamma)
    except RationalGainError:
        return gic_single_stream_models(std.channel(P), epsilon, gamma)


# --------------------------------------------------------------------------
# symmetric three-user channel with multi-layer constellations
# --------------------------------------------------------------------------


def symmetric_multilayer_model(h, sel, L: int, P: float | None = None, constellation=None):
    """Receiver-1 model of y1 = x1 + h(x2 + x3) with every user on the same multi-layer constellation.

    Received value A(u1 + h I), I = u2 + u3; labels are (u1, I) pairs.
    ``P=None`` leaves the amplitude at 1. ``constellation`` overrides the
    (W, a, L) construction, e.g. for counterexamples outside a < W.
    """
    if constellation is None:
        if sel.a >= sel.W:
            raise ValueError(f"digit bound a={sel.a} must be below W={sel.W}")
        constellation = MultiLayerConstellation(sel.W, sel.a, L)
    A = 1.0 if P is None else multilayer_amplitude(sel.W, sel.a, L, P)
    one = h * 0 + 1 if isinstance(h, QuadFieldElement) else 1
    scheme = TransmitScheme(1, (("u1", one, constellation),), A)
    model = ReceivedModel(
        1, "u1", constellation, one, (h,), ((("u2", 1), ("u3", 1)),),
        {"u2": constellation, "u3": constellation}, A, label_mode="joint",
        meta={"W": sel.W, "a": sel.a, "L": L},
    )
    return scheme, model
