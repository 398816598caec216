"""Received-constellation enumeration, Property Gamma, hard decoding and Monte Carlo rates."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .alignment import ReceivedModel
from .numerics import (
    DEFAULT_REL_TOL,
    HighPrecReal,
    RandomSource,
    common_field,
    coordinates,
    default_precision,
    from_coordinates,
    qf_to_real,
)

DEFAULT_CAP = 10**7
BLOCK = 1 << 14
NUMERIC_TOL = 2.0**-40  # relative gap below which float64 cannot separate two points

HOLDS = "holds"
VIOLATED = "violated"
UNCERTAIN = "numeric-uncertain"


class CapExceeded(MemoryError):
    pass


@dataclass(frozen=True)
class GammaVerdict:
    status: str
    witness: tuple | None = None  # two (u0, aggregates) tuples with distinct labels

    @property
    def holds(self) -> bool:
        return self.status == HOLDS


@dataclass(frozen=True, eq=False)
class ReceivedConstellation:
    model: ReceivedModel
    values: np.ndarray  # unit-scale float values, ascending
    labels: np.ndarray  # decoded label per point
    u0: np.ndarray  # intended-stream symbol per point
    aggs: np.ndarray  # aggregate values, shape (points, m)
    dmin_unit: object  # Fraction (rational), HighPrecReal (field) or float (numeric)
    verdict: GammaVerdict
    tuples: int
    keys: np.ndarray | None = None
    key_den: int = 1
    field: object = None

    def __len__(self):
        return len(self.values)

    @property
    def mode(self) -> str:
        return self.model.mode

    @property
    def dmin(self) -> float:
        """Minimum distance in received units (amplitude applied)."""
        return self.model.amplitude * float(self.dmin_unit)

    @property
    def n_labels(self) -> int:
        return len(np.unique(self.labels))


# --------------------------------------------------------------------------
# enumeration
# --------------------------------------------------------------------------


def _grid(arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    grids = np.meshgrid(*arrays, indexing="ij")
    return [g.ravel() for g in grids]


def _integer_terms(model: ReceivedModel):
    """Integer coordinate rows of the gains after clearing one common denominator."""
    gains = [model.signal_gain, *model.bases]
    fld = common_field(gains)
    coords = [coordinates(g, fld) for g in gains]
    den = math.lcm(*(c.denominator for row in coords for c in row))
    rows = [[int(c * den) for c in row] for row in coords]
    return fld, den, rows


def _exact_keys(model, u0, aggs, rows):
    terms = [u0, *[aggs[:, k] for k in range(aggs.shape[1])]]
    ncoord = len(rows[0])
    worst = sum(max(abs(r[c]) for c in range(ncoord)) * int(np.abs(t).max(initial=0)) for r, t in zip(rows, terms))
    if worst >= 2**62:
        raise OverflowError("integer keys exceed 64 bits")
    cols = []
    for c in range(ncoord):
        acc = np.zeros(len(u0), dtype=np.int64)
        for r, t in zip(rows, terms):
            if r[c]:
                acc += r[c] * t
        cols.append(acc)
    return np.stack(cols, axis=1)


def _key_values(keys, fld, den):
    """Float values recomputed from the exact keys, so equal points get bit-identical floats."""
    if fld is None:
        return keys[:, 0] / den
    roots = np.sqrt(np.array(fld.radicands, dtype=np.float64))
    return (keys.astype(np.float64) @ roots) / den


def _labels(model, u0_idx, I_idx, sizes):
    if model.label_mode == "stream":
        return u0_idx.astype(np.int64)
    lab = u0_idx.astype(np.int64)
    for k, n in enumerate(sizes):
        lab = lab * n + I_idx[:, k]
    return lab


def enumerate_received(model: ReceivedModel, cap: int = DEFAULT_CAP, tol: float = NUMERIC_TOL,
                       precision: int | None = None) -> ReceivedConstellation:
    """All labeled noiseless points, sorted, with d_min and the Property Gamma verdict."""
    u0_pts = np.asarray(model.constellation.points, dtype=np.int64)
    agg_pts = [model.aggregate_values(k) for k in range(model.m)]
    tuples = len(u0_pts) * math.prod(len(a) for a in agg_pts)
    if tuples > cap:
        need = tuples * 8 * (model.m + 7)
        raise CapExceeded(f"{tuples} received tuples exceed the cap {cap} (about {need / 2**20:.0f} MiB)")
    idx = _grid([np.arange(len(u0_pts))] + [np.arange(len(a)) for a in agg_pts])
    u0 = u0_pts[idx[0]]
    I_idx = np.stack(idx[1:], axis=1) if model.m else np.zeros((len(u0), 0), dtype=np.int64)
    aggs = np.stack([agg_pts[k][idx[k + 1]] for k in range(model.m)], axis=1) if model.m else I_idx
    labels = _labels(model, idx[0], I_idx, [len(a) for a in agg_pts])
    values = model.unit_values(u0, [aggs[:, k] for k in range(model.m)])

    if model.exact:
        return _finish_exact(model, values, labels, u0, aggs, tuples, precision)
    return _finish_numeric(model, values, labels, u0, aggs, tuples, tol)


def _witness(u0, aggs, i, j):
    return ((int(u0[i]), tuple(int(v) for v in aggs[i])), (int(u0[j]), tuple(int(v) for v in aggs[j])))


def _first_of_group(inv: np.ndarray) -> np.ndarray:
    first = np.full(int(inv.max()) + 1 if len(inv) else 0, len(inv), dtype=np.int64)
    np.minimum.at(first, inv, np.arange(len(inv)))
    return first


def _finish_exact(model, values, labels, u0, aggs, tuples, precision):
    fld, den, rows = _integer_terms(model)
    keys = _exact_keys(model, u0, aggs, rows)
    values = _key_values(keys, fld, den)
    # coalesce same-label duplicates, then any remaining key duplicate is a collision
    _, inv = _unique_rows(np.column_stack([keys, labels]))
    keep = np.unique(_first_of_group(inv))
    values, labels, u0, aggs, keys = values[keep], labels[keep], u0[keep], aggs[keep], keys[keep]
    rational = fld is None or not keys[:, 1:].any()
    order = np.lexsort((labels, keys[:, 0])) if rational else np.lexsort((labels, values))
    values, labels, u0, aggs, keys = values[order], labels[order], u0[order], aggs[order], keys[order]

    verdict = GammaVerdict(HOLDS)
    _, inv = _unique_rows(keys)
    counts = np.bincount(inv)
    dup = np.flatnonzero(counts > 1)
    if dup.size:
        same = np.flatnonzero(inv == dup[0])
        verdict = GammaVerdict(VIOLATED, _witness(u0, aggs, int(same[0]), int(same[1])))

    distinct = labels[1:] != labels[:-1]
    if not distinct.any():
        dmin = None
    elif verdict.status == VIOLATED:
        dmin = Fraction(0)
    elif rational:
        gaps = np.diff(keys[:, 0])[distinct]
        dmin = Fraction(int(gaps.min()), den)
    else:
        dmin = _field_dmin(values, keys, distinct, fld, den, precision)
    return ReceivedConstellation(model, values, labels, u0, aggs, dmin, verdict, tuples, keys, den, fld)


def _field_dmin(values, keys, distinct, fld, den, precision):
    prec = precision or default_precision()
    gaps = np.diff(values)
    # absolute float error of each value, generously bounded
    err = 64 * np.finfo(np.float64).eps * max(1.0, float(np.abs(values).max()))
    pos = np.flatnonzero(distinct)
    gd = gaps[pos]
    d_f = float(gd.min())
    cand = pos[gd <= d_f + 4 * err]
    # pairs whose float order could be wrong also go through the exact path
    risky = np.flatnonzero(gaps <= 4 * err)
    idx = np.union1d(cand, risky)
    diffs = keys[idx + 1] - keys[idx]
    # lattice structure repeats the same exact gap many times; evaluate each once
    uniq, inv = _unique_rows(diffs)
    exact = []
    for row in uniq:
        g = qf_to_real(from_coordinates([Fraction(int(v), den) for v in row], fld), prec)
        if g.value <= 0:
            raise ArithmeticError("float ordering disagrees with exact ordering; increase working precision")
        exact.append(g)
    best = None
    for k in np.unique(inv[distinct[idx]]):
        if best is None or exact[k] < best:
            best = exact[k]
    return best


def _unique_rows(a: np.ndarray):
    """Distinct rows of an integer matrix and the inverse index, via lexsort."""
    if len(a) == 0:
        return a, np.zeros(0, dtype=np.int64)
    order = np.lexsort(a.T[::-1])
    s = a[order]
    new = np.ones(len(s), dtype=bool)
    new[1:] = (s[1:] != s[:-1]).any(axis=1)
    group = np.cumsum(new) - 1
    inv = np.empty(len(a), dtype=np.int64)
    inv[order] = group
    return s[new], inv


def _finish_numeric(model, values, labels, u0, aggs, tuples, tol):
    order = np.lexsort((labels, values))
    values, labels, u0, aggs = values[order], labels[order], u0[order], aggs[order]
    # coalesce exact float duplicates that share a label
    keep = np.ones(len(values), dtype=bool)
    keep[1:] = ~((values[1:] == values[:-1]) & (labels[1:] == labels[:-1]))
    values, labels, u0, aggs = values[keep], labels[keep], u0[keep], aggs[keep]
    distinct = labels[1:] != labels[:-1]
    gaps = np.diff(values)
    dmin = float(gaps[distinct].min()) if distinct.any() else None
    scale = max(1.0, float(np.abs(values).max()))
    witness = None
    if dmin is not None and dmin < tol * scale:
        i = int(np.flatnonzero(distinct)[np.argmin(gaps[distinct])])
        witness = _witness(u0, aggs, i, i + 1)
    return ReceivedConstellation(model, values, labels, u0, aggs, dmin, GammaVerdict(UNCERTAIN, witness), tuples)


def min_distance(rc: ReceivedConstellation):
    """Smallest gap between points with distinct labels, in unit scale (exact in exact mode)."""
    if rc.dmin_unit is None:
        raise ValueError("constellation has a single label; minimum distance undefined")
    return rc.dmin_unit


def check_gamma(rc: ReceivedConstellation, tol: float = NUMERIC_TOL) -> GammaVerdict:
    if rc.mode == "exact":
        return rc.verdict
    if rc.dmin_unit is None:
        return GammaVerdict(UNCERTAIN)
    distinct = rc.labels[1:] != rc.labels[:-1]
    gaps = np.diff(rc.values)
    scale = max(1.0, float(np.abs(rc.values).max()))
    bad = np.flatnonzero(distinct & (gaps < tol * scale))
    if bad.size:
        i = int(bad[0])
        return GammaVerdict(UNCERTAIN, _witness(rc.u0, rc.aggs, i, i + 1))
    return GammaVerdict(UNCERTAIN)


def multilayer_collisions(n: int, m: int, W: int, a: int, L: int, stop_at_first: bool = True) -> tuple[int, tuple | None]:
    """Exact (b, I) collision count of m*b + n*I for the rational symmetric model.

    Equivalent to enumerate_received on the joint-label model but keeps only
    the integer keys, so it scales to the L=3 cases.
    """
    from .constellations import digit_sums

    B = digit_sums(W, L, a - 1)
    J = digit_sums(W, L, 2 * (a - 1)) if 2 * (a - 1) < W else np.unique(
        (B[:, None] + B[None, :]).ravel())
    keys = (m * B[:, None] + n * J[None, :]).ravel()
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    dup = np.flatnonzero(sk[1:] == sk[:-1])
    if not dup.size:
        return 0, None
    i, j = order[dup[0]], order[dup[0] + 1]
    w = ((int(B[i // len(J)]), int(J[i % len(J)])), (int(B[j // len(J)]), int(J[j % len(J)])))
    return int(dup.size), w


# --------------------------------------------------------------------------
# hard decoding
# --------------------------------------------------------------------------


def hard_decode_index(rc: ReceivedConstellation, y) -> np.ndarray:
    """Index of the nearest point for unit-scale observations; ties go to the smaller value."""
    v = rc.values
    y = np.asarray(y, dtype=np.float64)
    i = np.searchsorted(v, y, side="left")
    i = np.clip(i, 1, len(v) - 1) if len(v) > 1 else np.zeros_like(i)
    if len(v) == 1:
        return i
    lo = v[i - 1]
    hi = v[i]
    j = np.where(y - lo <= hi - y, i - 1, i)
    # among equal values (colliding points) take the first, as the linear scan does
    return np.searchsorted(v, v[j], side="left")


def hard_decode(rc: ReceivedConstellation, y):
    """Label of the nearest point to unit-scale ``y`` (received signal over the amplitude)."""
    idx = hard_decode_index(rc, y)
    out = rc.labels[idx]
    return int(out) if np.ndim(out) == 0 else out


def linear_scan_decode(rc: ReceivedConstellation, y: float) -> int:
    """Reference decoder: first minimum of |y - v| over the sorted values."""
    d = np.abs(rc.values - y)
    return int(rc.labels[int(np.argmin(d))])


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


def q_function(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2))


def union_bound(dmin: float, sigma: float) -> float:
    if sigma == 0:
        return 0.0
    return math.exp(-(dmin**2) / (8 * sigma**2))


def fano_rate(pe: float, cardinality: int) -> float:
    """max(0, (1 - P_e) log2|U0| - 1) bits per channel use."""
    return max(0.0, (1 - pe) * math.log2(cardinality) - 1)


@dataclass(frozen=True)
class SimulationResult:
    stream: str
    trials: int
    errors: int
    dmin: float
    sigma2: float
    cardinality: int
    P: float | None = None
    seed: int | None = None
    amplitude: float = 1.0

    @property
    def pe(self) -> float:
        return self.errors / self.trials

    @property
    def stderr(self) -> float:
        p = self.pe
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def union_bound(self) -> float:
        return union_bound(self.dmin, self.sigma)

    @property
    def q_bound(self) -> float:
        return 0.0 if self.sigma == 0 else q_function(self.dmin / (2 * self.sigma))

    @property
    def rate(self) -> float:
        return fano_rate(self.pe, self.cardinality)


def _stream_points(model: ReceivedModel) -> dict:
    return {sid: np.asarray(c.points, dtype=np.int64) for sid, c in model.interferers.items()}


def _run_block(model, rc, sigma_unit, seed, base, b, n):
    rng = RandomSource(seed, (base << 32) | b)
    u0_pts = np.asarray(model.constellation.points, dtype=np.int64)
    u0 = u0_pts[rng.integers(0, len(u0_pts), n)]
    pts = _stream_points(model)
    draws = {sid: p[rng.integers(0, len(p), n)] for sid, p in sorted(pts.items())}
    aggs = [sum(int(c) * draws[sid] for sid, c in agg) for agg in model.aggregates]
    y = model.unit_values(u0, aggs) + rng.normal(sigma_unit, n)
    got = rc.u0[hard_decode_index(rc, y)]
    return int(np.count_nonzero(got != u0))


def simulate(model: ReceivedModel, rc: ReceivedConstellation, sigma: float, trials: int, rng,
             workers: int = 1, block: int = BLOCK) -> SimulationResult:
    """Uniform symbols, Gaussian noise of std ``sigma`` in received units, nearest-point decoding.

    Trials run in fixed blocks, block b drawing from stream (base, b), so the
    error count does not depend on ``workers``.
    """
    if rc.model is not model:
        raise ValueError("received constellation was built from a different model")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    seed, base = (rng.seed, rng.stream) if isinstance(rng, RandomSource) else (int(rng), 0)
    sigma_unit = sigma / model.amplitude
    sizes = [min(block, trials - s) for s in range(0, trials, block)]
    jobs = [(model, rc, sigma_unit, seed, base, b, n) for b, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            errors = sum(ex.map(lambda a: _run_block(*a), jobs))
    else:
        errors = sum(_run_block(*a) for a in jobs)
    return SimulationResult(model.stream, trials, errors, rc.dmin if rc.dmin_unit is not None else 0.0,
                            sigma * sigma, model.constellation.cardinality, None, seed, model.amplitude)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    P: float
    results: tuple

    def sum_rate(self, multiplicity: int = 1) -> float:
        return multiplicity * sum(r.rate for r in self.results)

    @property
    def max_pe(self) -> float:
        return max(r.pe for r in self.results)


@dataclass(frozen=True)
class SweepResult:
    points: tuple
    multiplicity: int = 1  # copies of the simulated streams in the sum (3 for the symmetric channel)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Ps = [p.P for p in self.points]
        if any(b <= a for a, b in zip(Ps, Ps[1:])):
            raise ValueError("sweep powers must be strictly increasing")

    def r_of_P(self, i: int) -> float:
        p = self.points[i]
        return p.sum_rate(self.multiplicity) / (0.5 * math.log2(p.P))

    @classmethod
    def from_rates(cls, P: Sequence[float], sum_rates: Sequence[float], pes: Sequence[float] | None = None):
        """Synthetic sweep with one pseudo-stream per point carrying the given sum rate."""
        pes = pes if pes is not None else [0.0] * len(P)
        pts = tuple(SweepPoint(float(p), (_FixedRate(float(r), float(e)),)) for p, r, e in zip(P, sum_rates, pes))
        return cls(pts)


@dataclass(frozen=True)
class _FixedRate:
    rate: float
    pe: float


def dof_slope(sweep: SweepResult, threshold: float = 1e-2, top_decades: float | None = None) -> float:
    """Least-squares slope of the sum rate against (1/2) log2 P over points with P_e below ``threshold``."""
    pts = [p for p in sweep.points if p.max_pe < threshold]
    if top_decades is not None and pts:
        top = max(p.P for p in pts)
        pts = [p for p in pts if math.log10(top / p.P) <= top_decades]
    if len(pts) < 3:
        raise ValueError(f"only {len(pts)} sweep points have P_e < {threshold}; need 3")
    x = np.array([0.5 * math.log2(p.P) for p in pts])
    y = np.array([p.sum_rate(sweep.multiplicity) for p in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


# --------------------------------------------------------------------------
# minimum-distance bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    name: str
    bound: object
    measured: object
    passed: bool
    note: str = ""


def verify_dmin_bounds(model: ReceivedModel, rc: ReceivedConstellation, kappa=None, epsilon: float | None = None,
                       selection=None, checks: Sequence[str] | None = None,
                       gap_tol: float = DEFAULT_REL_TOL) -> list[BoundCheck]:
    """Compare the measured unit-scale d_min against the applicable lower bounds.

    ``kg``: kappa |G0| / (max bound_k)^(m+eps) with kappa from khintchine_kappa.
    ``irrational``: margin 1/m - 4(a-1)|delta| from an IrrationalSelection.
    ``rational``: equality with 1/m for a rational symmetric gain n/m.
    """
    if checks is None:
        checks = []
        if kappa is not None:
            checks.append("kg")
        if selection is not None:
            checks.append("irrational" if hasattr(selection, "margin") else "rational")
    out = []
    measured = min_distance(rc)
    for c in checks:
        if c == "kg":
            if kappa is None or epsilon is None:
                raise ValueError("the Khintchine-Groshev check needs kappa and epsilon")
            k = getattr(kappa, "kappa_hat", kappa)
            qmax = max(model.bounds)
            note = ""
            if hasattr(kappa, "Qmax") and kappa.Qmax < 2 * qmax:
                note = f"kappa search range {kappa.Qmax} is below the difference range {2 * qmax}"
            bound = k * abs(float(model.signal_gain)) / qmax ** (model.m + epsilon)
            out.append(BoundCheck("kg", bound, float(measured), float(measured) >= bound, note))
        elif c == "irrational":
            margin = selection.margin
            m_val = HighPrecReal.of(measured, margin.prec)
            diff = m_val - margin
            with mpmath.workprec(margin.prec):
                certified = diff.value > mpmath.mpf(gap_tol) and m_val.value > mpmath.mpf(gap_tol)
            out.append(BoundCheck("irrational", margin, m_val, bool(certified),
                                  f"gap {mpmath.nstr(diff.value, 8)}"))
        elif c == "rational":
            h = model.bases[0]
            target = Fraction(1, Fraction(h).denominator)
            out.append(BoundCheck("rational", target, measured, measured == target))
        else:
            raise ValueError(f"unknown bound check {c!r}")
    return out
