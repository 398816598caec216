"""Single- and multi-layer integer constellations and the scaling laws that size them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np

from .diophantine import HurwitzApproximant, RationalInputError, hurwitz_select
from .numerics import HighPrecReal, QuadFieldElement, default_precision, qf_to_real

# floor() arguments within this distance of an integer snap to it
FLOOR_SNAP = 1e-9


def snapped_floor(x: float, tol: float = FLOOR_SNAP) -> int:
    r = round(x)
    if abs(x - r) <= tol * max(1.0, abs(x)):
        return int(r)
    return math.floor(x)


@dataclass(frozen=True)
class SingleLayerConstellation:
    """All integers in [-Q, Q]."""

    Q: int

    def __post_init__(self):
        if self.Q < 0:
            raise ValueError("Q must be nonnegative")

    @cached_property
    def points(self) -> np.ndarray:
        return np.arange(-self.Q, self.Q + 1, dtype=np.int64)

    @property
    def cardinality(self) -> int:
        return 2 * self.Q + 1

    @property
    def max_abs(self) -> int:
        return self.Q

    def describe(self) -> str:
        return f"Q={self.Q}"


@dataclass(frozen=True)
class MultiLayerConstellation:
    """Points sum_l b_l W^l with digits b_l in {0, ..., a-1} over L levels."""

    W: int
    a: int
    L: int

    def __post_init__(self):
        if self.W < 2:
            raise ValueError("base W must be >= 2")
        if not 1 <= self.a < self.W:
            raise ValueError(f"digit bound must satisfy 1 <= a < W, got a={self.a}, W={self.W}")
        if self.L < 1:
            raise ValueError("L must be >= 1")

    @cached_property
    def points(self) -> np.ndarray:
        return digit_sums(self.W, self.L, self.a - 1)

    @property
    def cardinality(self) -> int:
        return self.a**self.L

    @property
    def max_abs(self) -> int:
        return (self.a - 1) * (self.W**self.L - 1) // (self.W - 1)

    def describe(self) -> str:
        return f"a={self.a};W={self.W};L={self.L}"


def digit_sums(W: int, L: int, top: int) -> np.ndarray:
    """Sorted values sum_l d_l W^l with every digit d_l in {0, ..., top}.

    Sorted ascending whenever top < W.
    """
    digits = np.arange(top + 1, dtype=np.int64)
    out = np.zeros(1, dtype=np.int64)
    # most significant level first so the flattened outer sum is ascending
    for level in reversed(range(L)):
        out = (out[:, None] + digits[None, :] * W**level).ravel()
    return out


def build_single_layer(Q: int) -> SingleLayerConstellation:
    return SingleLayerConstellation(int(Q))


def digits_encode(c: MultiLayerConstellation, digits) -> int:
    digits = tuple(int(b) for b in digits)
    if len(digits) != c.L:
        raise ValueError(f"expected {c.L} digits, got {len(digits)}")
    for level, b in enumerate(digits):
        if not 0 <= b < c.a:
            raise ValueError(f"digit {b} at level {level} outside 0..{c.a - 1}")
    return sum(b * c.W**level for level, b in enumerate(digits))


def digits_decode(c: MultiLayerConstellation, point: int) -> tuple[int, ...]:
    point = int(point)
    if point < 0:
        raise ValueError(f"{point} is not a constellation point")
    out = []
    rest = point
    for level in range(c.L):
        rest, b = divmod(rest, c.W)
        if b >= c.a:
            raise ValueError(f"{point} is not a constellation point: digit {b} >= a at level {level}")
        out.append(b)
    if rest:
        raise ValueError(f"{point} needs more than {c.L} levels")
    return tuple(out)


# --------------------------------------------------------------------------
# power scaling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerScaling:
    P: float
    epsilon: float
    m: int
    gamma: float
    gamma_prime: float

    @property
    def q_exponent(self) -> float:
        return (1 - self.epsilon) / (2 * (self.m + 1 + self.epsilon))

    @property
    def amplitude_exponent(self) -> float:
        return (self.m + 2 * self.epsilon) / (2 * (self.m + 1 + self.epsilon))

    @property
    def Q(self) -> int:
        return snapped_floor(self.gamma * self.P**self.q_exponent)

    @property
    def amplitude(self) -> float:
        return self.gamma_prime * self.P**self.amplitude_exponent


def _check_power(P, epsilon):
    if not P > 0:
        raise ValueError("P must be positive")
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")


def scaling(P: float, epsilon: float, m: int, gamma: float = 1.0, gamma_prime: float = 1.0) -> PowerScaling:
    _check_power(P, epsilon)
    if m < 1:
        raise ValueError("m must be >= 1")
    if gamma <= 0 or gamma_prime <= 0:
        raise ValueError("gamma constants must be positive")
    return PowerScaling(float(P), float(epsilon), int(m), float(gamma), float(gamma_prime))


def peak_amplitude(P: float, Q: int, direction_sum: float) -> float:
    """Amplitude that makes the largest transmit value equal sqrt(P)."""
    return math.sqrt(P) / (max(Q, 1) * direction_sum)


def multilayer_amplitude(W: int, a: int, L: int, P) -> float:
    """A = sqrt((W^2 - 1) P) / (a W^L); keeps the mean transmit power at most P."""
    if W < 2 or a < 1 or L < 1:
        raise ValueError("need W >= 2, a >= 1, L >= 1")
    if not P > 0:
        raise ValueError("P must be positive")
    return math.sqrt((W * W - 1) * float(P)) / (a * float(W) ** L)


def multilayer_levels(P: float, epsilon: float, W: int) -> int:
    """L = floor(log(P^(1/2 - eps)) / log W)."""
    _check_power(P, epsilon)
    if W < 2:
        raise ValueError("W must be >= 2")
    return snapped_floor((0.5 - epsilon) * math.log(P) / math.log(W))


def w_aligned_grid(W: int, epsilon: float, P_max: float, L_min: int = 1) -> list[float]:
    """Powers P = W^(2L/(1-2 eps)) for L = L_min, ... while P <= P_max."""
    out = []
    L = L_min
    while True:
        P = float(W) ** (2 * L / (1 - 2 * epsilon))
        if P > P_max * (1 + 1e-12):
            return out
        out.append(P)
        L += 1


# --------------------------------------------------------------------------
# multi-layer parameter selection
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalSelection:
    n: int
    m: int
    case: str
    s: int | None
    a: int
    W: int

    @property
    def degenerate(self) -> bool:
        return self.a <= 1 or self.W <= 1

    @property
    def h(self) -> Fraction:
        return Fraction(self.n, self.m)


def _positive_fraction(h) -> Fraction:
    if isinstance(h, QuadFieldElement):
        if not h.is_rational():
            raise RationalInputError("expected a rational gain")
        h = h.coords[0]
    h = Fraction(h)
    if h <= 0:
        raise ValueError("channel gain must be positive")
    return h


def select_rational(h) -> RationalSelection:
    h = _positive_fraction(h)
    n, m = h.numerator, h.denominator
    if 2 * n >= m:
        return RationalSelection(n, m, "I", None, n, n * (2 * n - 1))
    if m % 2 == 1:
        s = (m - 1) // 2
        return RationalSelection(n, m, "II", s, s + 1, (s + 1) * (2 * s + 1))
    s = m // 2
    return RationalSelection(n, m, "III", s, s, 2 * s * s - n)


def dof_rational_formula(h) -> float:
    """Sum DOF of the symmetric three-user channel for a rational gain n/m."""
    h = _positive_fraction(h)
    n, m = h.numerator, h.denominator
    if 2 * n >= m:
        num, den = n, n * (2 * n - 1)
    elif m % 2 == 1:
        s = (m - 1) // 2
        num, den = s + 1, (s + 1) * (2 * s + 1)
    else:
        s = m // 2
        num, den = s, 2 * s * s - n
    if num <= 1:
        return 0.0
    return 3 * math.log(num) / math.log(den)


@dataclass(frozen=True)
class IrrationalSelection:
    h: object
    approximant: HurwitzApproximant
    epsilon: float
    a: int
    W: int
    margin: HighPrecReal  # 1/m - 4(a-1)|delta|

    @property
    def m(self) -> int:
        return self.approximant.m


def select_irrational(h, epsilon: float, m_min: int = 2, precision: int | None = None) -> IrrationalSelection:
    if m_min < 2:
        raise ValueError("m_min must be >= 2")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    prec = precision or default_precision()
    approx = hurwitz_select(h, m_min)
    m = approx.m
    hv = qf_to_real(h, prec).value if isinstance(h, QuadFieldElement) else HighPrecReal.of(h, prec).value
    with mpmath.workprec(prec):
        a = int(mpmath.floor(mpmath.mpf(m) ** (1 - mpmath.mpf(epsilon)) * mpmath.sqrt(5) / 4))
        if a < 2:
            raise ValueError(f"digit bound a={a} from m={m}; raise m_min")
        margin = mpmath.mpf(1) / m - 4 * (a - 1) * abs(approx.delta.value)
        if margin <= 0:
            raise ArithmeticError("nonpositive margin: Hurwitz bound violated")
        W = int(mpmath.ceil(2 * (1 + 2 * hv) * (a - 1) / margin)) + 1
    return IrrationalSelection(h, approx, float(epsilon), a, W, HighPrecReal(margin, prec))
