"""Continued fractions, Hurwitz approximants and brute-force Khintchine-Groshev constants."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .numerics import (
    HighPrecReal,
    QuadFieldElement,
    default_precision,
    qf_sign,
    qf_to_real,
)


class PrecisionExhausted(ArithmeticError):
    """Raised when a numeric target cannot determine further partial quotients."""


class RationalInputError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuedFraction:
    target: object
    quotients: tuple[int, ...]
    convergents: tuple[Fraction, ...]
    terminated: bool

    def __len__(self):
        return len(self.quotients)


def _convergents(quotients: Sequence[int]) -> list[Fraction]:
    n_prev, n = 1, quotients[0]
    m_prev, m = 0, 1
    out = [Fraction(n, m)]
    for q in quotients[1:]:
        n_prev, n = n, q * n + n_prev
        m_prev, m = m, q * m + m_prev
        out.append(Fraction(n, m))
    return out


def _floor_exact(x: QuadFieldElement) -> int:
    guess = qf_to_real(x, 128).floor()
    # the guess can be off by one only when x is within 2^-120 of an integer
    for k in (guess + 1, guess, guess - 1):
        if qf_sign(x - k) >= 0:
            return k
    raise AssertionError("floor search failed")


def _expand_rational(x: Fraction, k: int) -> tuple[list[int], bool]:
    qs = []
    while len(qs) < k:
        a = x.numerator // x.denominator
        qs.append(a)
        frac = x - a
        if frac == 0:
            return qs, True
        x = 1 / frac
    return qs, False


def _expand_field(x: QuadFieldElement, k: int) -> tuple[list[int], bool]:
    qs = []
    while len(qs) < k:
        a = _floor_exact(x)
        qs.append(a)
        frac = x - a
        if frac.is_zero():
            return qs, True
        x = frac.inv()
    return qs, False


def _expand_interval(x, k: int, prec: int) -> tuple[list[int], bool]:
    ctx = mpmath.iv
    saved = ctx.prec
    ctx.prec = prec
    try:
        return _expand_iv(ctx, x, k, prec)
    finally:
        ctx.prec = saved


def _expand_iv(ctx, x, k: int, prec: int) -> tuple[list[int], bool]:
    if isinstance(x, HighPrecReal):
        # qf_to_real guarantees relative error 2^(3-prec); widen by one more bit
        with mpmath.workprec(prec + 8):
            lo = mpmath.mpf(x.value) * (1 - mpmath.ldexp(1, 4 - x.prec))
            hi = mpmath.mpf(x.value) * (1 + mpmath.ldexp(1, 4 - x.prec))
        iv = ctx.mpf([min(lo, hi), max(lo, hi)])
    else:
        iv = ctx.mpf(x)
    qs = []
    while len(qs) < k:
        a_lo = int(mpmath.floor(iv.a))
        a_hi = int(mpmath.floor(iv.b))
        if a_lo != a_hi:
            if iv.a == iv.b:
                qs.append(a_lo)
                return qs, True
            raise PrecisionExhausted(f"partial quotient {len(qs)} is not determined at {prec} bits")
        qs.append(a_lo)
        frac = iv - a_lo
        if frac.a == 0 and frac.b == 0:
            return qs, True
        if frac.a <= 0:
            raise PrecisionExhausted(f"partial quotient {len(qs)} is not determined at {prec} bits")
        iv = 1 / frac
    return qs, False


def cf_expand(x, k: int) -> ContinuedFraction:
    """First ``k`` partial quotients and convergents of ``x``.

    Rational and field-element targets are expanded exactly; numeric targets
    use interval arithmetic and raise ``PrecisionExhausted`` rather than
    emit an uncertain quotient.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(x, (int, Fraction)):
        qs, done = _expand_rational(Fraction(x), k)
    elif isinstance(x, QuadFieldElement):
        if x.is_rational():
            qs, done = _expand_rational(x.coords[0], k)
        else:
            qs, done = _expand_field(x, k)
    elif isinstance(x, HighPrecReal):
        qs, done = _expand_interval(x, k, x.prec)
    else:
        qs, done = _expand_interval(HighPrecReal.of(float(x), 64), k, 64)
    return ContinuedFraction(x, tuple(qs), tuple(_convergents(qs)), done)


@dataclass(frozen=True)
class HurwitzApproximant:
    n: int
    m: int
    delta: HighPrecReal  # h - n/m

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.n, self.m)


def _delta(h, frac: Fraction, prec: int) -> HighPrecReal:
    if isinstance(h, QuadFieldElement):
        return qf_to_real(h - frac, prec)
    return HighPrecReal.of(h, prec) - frac


def _hurwitz_holds(h, frac: Fraction, prec: int) -> bool:
    n, m = frac.numerator, frac.denominator
    if isinstance(h, QuadFieldElement):
        d = h - frac
        # |d| < 1/(sqrt5 m^2)  <=>  1 - 5 m^4 d^2 > 0, decided exactly
        return qf_sign(1 - 5 * m**4 * d * d) > 0
    d = _delta(h, frac, prec)
    with mpmath.workprec(prec):
        lhs = abs(d.value) * mpmath.sqrt(5) * m * m
        slack = mpmath.ldexp(1, 8 - prec) * (1 + abs(mpmath.mpf(n)))
        if abs(lhs - 1) <= slack * m * m:
            raise PrecisionExhausted(f"Hurwitz test for {n}/{m} is undecided at {prec} bits")
        return lhs < 1


def hurwitz_select(h, m_min: int = 1, max_terms: int = 200) -> HurwitzApproximant:
    """Convergent of ``h`` with the smallest denominator >= m_min satisfying |h - n/m| < 1/(sqrt5 m^2)."""
    if m_min < 1:
        raise ValueError("m_min must be >= 1")
    if isinstance(h, (int, Fraction)) or (isinstance(h, QuadFieldElement) and h.is_rational()):
        raise RationalInputError("Hurwitz selection needs an irrational target")
    prec = h.prec if isinstance(h, HighPrecReal) else default_precision()
    k = 8
    while True:
        cf = cf_expand(h, k)
        if cf.terminated:
            raise RationalInputError("target expansion terminated: input is rational")
        for frac in cf.convergents:
            if frac.denominator >= m_min and _hurwitz_holds(h, frac, prec):
                return HurwitzApproximant(frac.numerator, frac.denominator, _delta(h, frac, prec))
        if k >= max_terms:
            raise PrecisionExhausted(f"no Hurwitz approximant with m >= {m_min} in {k} terms")
        k = min(2 * k, max_terms)


_CHUNK = 1 << 21


@dataclass(frozen=True)
class KhintchineEstimate:
    alpha: tuple[float, ...]
    epsilon: float
    Qmax: int
    kappa_hat: float
    p: int
    q: tuple[int, ...]


def linear_form_weight(alpha: Sequence[float], epsilon: float, p: int, q: Sequence[int]) -> float:
    """|p + alpha.q| * (max|q_i|)^(m+eps), evaluated the same way as the vectorized search."""
    a = np.asarray(alpha, dtype=np.float64)
    qa = np.asarray(q, dtype=np.int64).reshape(1, -1)
    s = _dot_rows(qa, a)
    norm = np.abs(qa).max(axis=1).astype(np.float64)
    return float((np.abs(np.float64(p) + s) * norm ** (len(a) + epsilon))[0])


def _dot_rows(q: np.ndarray, a: np.ndarray) -> np.ndarray:
    s = q[:, 0] * a[0]
    for i in range(1, len(a)):
        s = s + q[:, i] * a[i]
    return s


def khintchine_kappa(alpha: Sequence, epsilon: float, Qmax: int) -> KhintchineEstimate:
    """Exhaustive minimum of |p + alpha.q| (max|q_i|)^(m+eps) over 0 < max|q_i| <= Qmax.

    For each q the best p is the nearest integer to -alpha.q. Only one of
    q, -q is visited (first nonzero coordinate positive).
    """
    if Qmax < 1:
        raise ValueError("Qmax must be >= 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a = np.array([float(x) for x in alpha], dtype=np.float64)
    m = len(a)
    if m < 1:
        raise ValueError("alpha must have at least one coordinate")
    rest = np.arange(-Qmax, Qmax + 1, dtype=np.int64)
    best = (np.inf, 0, None)
    # canonical sign: the first nonzero coordinate (index ``lead``) is positive
    for lead in range(m):
        tail_dims = m - lead - 1
        if tail_dims:
            grids = np.meshgrid(*([rest] * tail_dims), indexing="ij")
            tail = np.stack([g.ravel() for g in grids], axis=1)
        else:
            tail = np.zeros((1, 0), dtype=np.int64)
        step = max(1, _CHUNK // tail.shape[0])
        for start in range(1, Qmax + 1, step):
            leads = np.arange(start, min(start + step, Qmax + 1), dtype=np.int64)
            q = np.zeros((leads.size * tail.shape[0], m), dtype=np.int64)
            q[:, lead] = np.repeat(leads, tail.shape[0])
            q[:, lead + 1:] = np.tile(tail, (leads.size, 1))
            s = _dot_rows(q, a)
            p = -np.rint(s)
            norm = np.abs(q).max(axis=1).astype(np.float64)
            w = np.abs(p + s) * norm ** (m + epsilon)
            i = int(np.argmin(w))
            if w[i] < best[0]:
                best = (float(w[i]), int(p[i]), tuple(int(v) for v in q[i]))
    return KhintchineEstimate(tuple(float(x) for x in a), float(epsilon), int(Qmax), best[0], best[1], best[2])
