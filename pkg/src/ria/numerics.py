"""Exact and high-precision arithmetic used throughout the package.

Exact channel gains live in a biquadratic field Q(sqrt(d1), sqrt(d2)); an
element is stored as four rational coordinates over the basis
(1, sqrt(d1), sqrt(d2), sqrt(d1*d2)). Plain rationals are ``Fraction``.
Numeric gains are ``HighPrecReal`` (an mpmath value tagged with its precision)
or ordinary floats.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import mpmath
import numpy as np

ExactRational = Fraction

DEFAULT_PRECISION = 192
DEFAULT_REL_TOL = 2.0 ** -80

_precision_override: int | None = None


def default_precision() -> int:
    """Working precision in bits; ``RIA_PRECISION_BITS`` overrides the default."""
    if _precision_override is not None:
        return _precision_override
    env = os.environ.get("RIA_PRECISION_BITS")
    if env:
        bits = int(env)
        if bits < 64:
            raise ValueError(f"RIA_PRECISION_BITS must be >= 64, got {bits}")
        return bits
    return DEFAULT_PRECISION


def set_default_precision(bits: int | None) -> None:
    global _precision_override
    if bits is not None and bits < 64:
        raise ValueError(f"precision must be >= 64 bits, got {bits}")
    _precision_override = bits


class FieldMismatchError(ValueError):
    pass


def _is_squarefree(n: int) -> bool:
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot use {type(x).__name__} as an exact rational")


@dataclass(frozen=True)
class QuadField:
    """Descriptor of Q(sqrt(d1), sqrt(d2)) for distinct square-free d1, d2 >= 2."""

    d1: int
    d2: int

    def __post_init__(self):
        if self.d1 == self.d2:
            raise ValueError("field descriptor needs two distinct integers")
        for d in (self.d1, self.d2):
            if not _is_squarefree(d):
                raise ValueError(f"{d} is not a square-free integer >= 2")

    @property
    def radicands(self) -> tuple[int, int, int, int]:
        return (1, self.d1, self.d2, self.d1 * self.d2)

    def __call__(self, c0=0, c1=0, c2=0, c3=0) -> "QuadFieldElement":
        return QuadFieldElement(self, (_frac(c0), _frac(c1), _frac(c2), _frac(c3)))

    def rational(self, x) -> "QuadFieldElement":
        return self(x)

    def sqrt(self, k: int) -> "QuadFieldElement":
        """sqrt(k) for k one of 1, d1, d2, d1*d2."""
        try:
            i = self.radicands.index(k)
        except ValueError:
            raise ValueError(f"sqrt({k}) is not a basis element of {self}") from None
        c = [0, 0, 0, 0]
        c[i] = 1
        return self(*c)

    def __str__(self):
        return f"Q(sqrt{self.d1},sqrt{self.d2})"


def quadratic_field(d: int) -> QuadField:
    """A biquadratic field containing sqrt(d), with a fixed partner radicand."""
    partner = 2 if d != 2 else 3
    return QuadField(d, partner)


@dataclass(frozen=True)
class QuadFieldElement:
    field: QuadField
    coords: tuple[Fraction, Fraction, Fraction, Fraction]

    # -- coercion -----------------------------------------------------------
    def _lift(self, other) -> "QuadFieldElement":
        if isinstance(other, QuadFieldElement):
            if other.field != self.field:
                raise FieldMismatchError(f"{self.field} vs {other.field}")
            return other
        if isinstance(other, (int, Fraction, np.integer)):
            return self.field.rational(other)
        return NotImplemented

    # -- ring operations ----------------------------------------------------
    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return QuadFieldElement(self.field, tuple(a + b for a, b in zip(self.coords, o.coords)))

    __radd__ = __add__

    def __neg__(self):
        return QuadFieldElement(self.field, tuple(-a for a in self.coords))

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        d1, d2 = self.field.d1, self.field.d2
        a0, a1, a2, a3 = self.coords
        b0, b1, b2, b3 = o.coords
        # basis e0=1, e1=r1, e2=r2, e3=r1*r2; r1^2=d1, r2^2=d2
        c0 = a0 * b0 + d1 * a1 * b1 + d2 * a2 * b2 + d1 * d2 * a3 * b3
        c1 = a0 * b1 + a1 * b0 + d2 * (a2 * b3 + a3 * b2)
        c2 = a0 * b2 + a2 * b0 + d1 * (a1 * b3 + a3 * b1)
        c3 = a0 * b3 + a3 * b0 + a1 * b2 + a2 * b1
        return QuadFieldElement(self.field, (c0, c1, c2, c3))

    __rmul__ = __mul__

    def conjugate(self, flip1: bool, flip2: bool) -> "QuadFieldElement":
        c0, c1, c2, c3 = self.coords
        s1 = -1 if flip1 else 1
        s2 = -1 if flip2 else 1
        return QuadFieldElement(self.field, (c0, s1 * c1, s2 * c2, s1 * s2 * c3))

    def norm(self) -> Fraction:
        """Product of the four conjugates; a rational number."""
        n = self * self.conjugate(True, False) * self.conjugate(False, True) * self.conjugate(True, True)
        assert n.is_rational()
        return n.coords[0]

    def inv(self) -> "QuadFieldElement":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in " + str(self.field))
        others = self.conjugate(True, False) * self.conjugate(False, True) * self.conjugate(True, True)
        n = (self * others).coords[0]
        return QuadFieldElement(self.field, tuple(c / n for c in others.coords))

    def __truediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self * o.inv()

    def __rtruediv__(self, other):
        return self.inv() * other

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inv() ** (-k)
        out = self.field.rational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- predicates -----------------------------------------------------------
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def is_rational(self) -> bool:
        return self.coords[1] == 0 and self.coords[2] == 0 and self.coords[3] == 0

    def __eq__(self, other):
        if isinstance(other, QuadFieldElement):
            return self.field == other.field and self.coords == other.coords
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.coords[0] == other
        return NotImplemented

    def __hash__(self):
        if self.is_rational():
            return hash(self.coords[0])
        return hash((self.field, self.coords))

    def sign(self) -> int:
        return qf_sign(self)

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        return float(qf_to_real(self, 64).value)

    def __repr__(self):
        names = ("1", f"sqrt{self.field.d1}", f"sqrt{self.field.d2}", f"sqrt{self.field.d1 * self.field.d2}")
        terms = [f"{c}*{n}" if n != "1" else f"{c}" for c, n in zip(self.coords, names) if c != 0]
        return "QF(" + (" + ".join(terms) or "0") + f" in {self.field})"


Exact = Union[Fraction, QuadFieldElement]


# --------------------------------------------------------------------------
# High-precision reals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HighPrecReal:
    """An mpmath real rounded to ``prec`` bits.

    Mixed arithmetic runs at the larger of the operand precisions.
    """

    value: mpmath.mpf
    prec: int = field(default_factory=default_precision)

    @classmethod
    def of(cls, x, prec: int | None = None) -> "HighPrecReal":
        prec = prec or default_precision()
        if isinstance(x, HighPrecReal):
            prec = max(prec, x.prec)
            x = x.value
        with mpmath.workprec(prec):
            if isinstance(x, Fraction):
                v = mpmath.mpf(x.numerator) / x.denominator
            elif isinstance(x, QuadFieldElement):
                return qf_to_real(x, prec)
            else:
                v = mpmath.mpf(x)
            return cls(+v, prec)

    def _binary(self, other, fn):
        if isinstance(other, HighPrecReal):
            prec = max(self.prec, other.prec)
            ov = other.value
        elif isinstance(other, (int, float, Fraction, np.integer, np.floating)):
            prec = self.prec
            ov = HighPrecReal.of(other, prec).value
        else:
            return NotImplemented
        with mpmath.workprec(prec):
            return HighPrecReal(+fn(self.value, ov), prec)

    def __add__(self, o):
        return self._binary(o, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, o):
        return self._binary(o, lambda a, b: a - b)

    def __rsub__(self, o):
        return self._binary(o, lambda a, b: b - a)

    def __mul__(self, o):
        return self._binary(o, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._binary(o, lambda a, b: a / b)

    def __rtruediv__(self, o):
        return self._binary(o, lambda a, b: b / a)

    def __neg__(self):
        return HighPrecReal(-self.value, self.prec)

    def __abs__(self):
        return HighPrecReal(abs(self.value), self.prec)

    def sqrt(self) -> "HighPrecReal":
        with mpmath.workprec(self.prec):
            return HighPrecReal(mpmath.sqrt(self.value), self.prec)

    def _cmp_value(self, o):
        if isinstance(o, HighPrecReal):
            return o.value
        return HighPrecReal.of(o, self.prec).value

    def __lt__(self, o):
        return self.value < self._cmp_value(o)

    def __le__(self, o):
        return self.value <= self._cmp_value(o)

    def __gt__(self, o):
        return self.value > self._cmp_value(o)

    def __ge__(self, o):
        return self.value >= self._cmp_value(o)

    def __eq__(self, o):
        if isinstance(o, (HighPrecReal, int, float, Fraction)):
            return self.value == self._cmp_value(o)
        return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def __float__(self):
        return float(self.value)

    def floor(self) -> int:
        return int(mpmath.floor(self.value))

    def __repr__(self):
        return f"HighPrecReal({mpmath.nstr(self.value, 25)}, prec={self.prec})"


def qf_arith(a: QuadFieldElement, b: QuadFieldElement | None, op: str) -> QuadFieldElement:
    if op == "add":
        return a + _require_same(a, b)
    if op == "mul":
        return a * _require_same(a, b)
    if op == "neg":
        return -a
    if op == "inv":
        return a.inv()
    raise ValueError(f"unknown op {op!r}")


def _require_same(a: QuadFieldElement, b) -> QuadFieldElement:
    if not isinstance(b, QuadFieldElement) or b.field != a.field:
        raise FieldMismatchError(f"operands must share {a.field}")
    return b


def _eval_at(a: QuadFieldElement, work: int) -> tuple[mpmath.mpf, mpmath.mpf]:
    """Value of ``a`` at ``work`` bits and a bound on its absolute error."""
    with mpmath.workprec(work):
        total = mpmath.mpf(0)
        scale = mpmath.mpf(0)
        for c, r in zip(a.coords, a.field.radicands):
            if c == 0:
                continue
            term = (mpmath.mpf(c.numerator) / c.denominator) * (mpmath.sqrt(r) if r != 1 else 1)
            total += term
            scale += abs(term)
        err = scale * mpmath.ldexp(1, 4 - work)
        return total, err


def qf_to_real(a: QuadFieldElement | Fraction | int, precision: int | None = None) -> HighPrecReal:
    """Evaluate an exact element to ``precision`` bits with relative error <= 2^(3-precision)."""
    precision = precision or default_precision()
    if precision < 64:
        raise ValueError("precision must be >= 64 bits")
    if not isinstance(a, QuadFieldElement):
        return HighPrecReal.of(_frac(a), precision)
    if a.is_zero():
        return HighPrecReal(mpmath.mpf(0), precision)
    work = precision + 32
    while True:
        v, err = _eval_at(a, work)
        with mpmath.workprec(work):
            if v != 0 and err <= abs(v) * mpmath.ldexp(1, -precision - 2):
                break
        work += 64
    with mpmath.workprec(precision):
        return HighPrecReal(+v, precision)


def qf_sign(a: QuadFieldElement | Fraction | int) -> int:
    if not isinstance(a, QuadFieldElement):
        f = _frac(a)
        return (f > 0) - (f < 0)
    if a.is_zero():
        return 0
    work = 96
    while True:
        v, err = _eval_at(a, work)
        if abs(v) > err:
            return 1 if v > 0 else -1
        work *= 2


# --------------------------------------------------------------------------
# Rational linear algebra over coordinate vectors
# --------------------------------------------------------------------------


def common_field(elements: Iterable) -> QuadField | None:
    fields = {e.field for e in elements if isinstance(e, QuadFieldElement)}
    if len(fields) > 1:
        raise FieldMismatchError("elements belong to different fields: " + ", ".join(map(str, fields)))
    return next(iter(fields), None)


def is_exact(x) -> bool:
    return isinstance(x, (Fraction, QuadFieldElement, int)) and not isinstance(x, bool)


def coordinates(x, fld: QuadField | None) -> tuple[Fraction, ...]:
    """Coordinate vector of an exact value: length 4 inside a field, length 1 for plain rationals."""
    if fld is None:
        if isinstance(x, QuadFieldElement):
            raise FieldMismatchError("field element given without a field context")
        return (_frac(x),)
    if isinstance(x, QuadFieldElement):
        if x.field != fld:
            raise FieldMismatchError(f"{x.field} vs {fld}")
        return x.coords
    return (_frac(x), Fraction(0), Fraction(0), Fraction(0))


def from_coordinates(coords: Sequence[Fraction], fld: QuadField | None):
    if fld is None:
        return coords[0]
    return QuadFieldElement(fld, tuple(coords))


def rref(rows: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Q; returns (nonzero rows, pivot columns)."""
    m = [list(r) for r in rows]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        m[r] = [v / p for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def _bareiss_rank(mat: list[list[int]]) -> int:
    """Rank of an integer matrix by fraction-free elimination."""
    a = [row[:] for row in mat]
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    rank = 0
    prev = 1
    for c in range(ncols):
        piv = next((i for i in range(rank, nrows) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        for i in range(rank + 1, nrows):
            for j in range(c + 1, ncols):
                a[i][j] = (a[rank][c] * a[i][j] - a[i][c] * a[rank][j]) // prev
            a[i][c] = 0
        prev = a[rank][c]
        rank += 1
        if rank == nrows:
            break
    return rank


def rational_rank(elements: Sequence) -> int:
    """Dimension over Q of the span of ``elements`` (exact values only)."""
    if len(elements) == 0:
        raise ValueError("rational_rank needs a nonempty list")
    fld = common_field(elements)
    rows = []
    for e in elements:
        coords = coordinates(e, fld)
        den = math.lcm(*(c.denominator for c in coords))
        rows.append([int(c * den) for c in coords])
    return _bareiss_rank(rows)


# --------------------------------------------------------------------------
# Randomness
# --------------------------------------------------------------------------


class RandomSource:
    """Seeded random stream; (seed, stream) fully determines the sequence."""

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if stream < 0:
            raise ValueError("stream index must be nonnegative")
        self.seed = int(seed)
        self.stream = int(stream)
        self.draws = 0
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, stream: int) -> "RandomSource":
        return RandomSource(self.seed, stream)

    def normal(self, sigma: float, size=None):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        n = 1 if size is None else int(np.prod(size))
        self.draws += n
        z = self._gen.standard_normal(size)
        if sigma == 0:
            return 0.0 if size is None else np.zeros(size)
        return sigma * z

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high)."""
        self.draws += 1 if size is None else int(np.prod(size))
        return self._gen.integers(low, high, size=size)

    def uniform(self, low: float, high: float, size=None):
        self.draws += 1 if size is None else int(np.prod(size))
        return self._gen.uniform(low, high, size=size)


def gaussian_sample(rng: RandomSource, sigma: float) -> float:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return float(rng.normal(sigma))
