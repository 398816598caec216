"""Scenario runners: each returns CSV rows plus warnings; the CLI handles files."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..alignment import (
    ChannelInstance,
    gic3_models,
    gic_single_stream_models,
    standardize_three_user,
    symmetric_multilayer_model,
    x_channel_models,
)
from ..constellations import (
    MultiLayerConstellation,
    dof_rational_formula,
    multilayer_levels,
    select_irrational,
    select_rational,
    w_aligned_grid,
)
from ..decoder import (
    SweepPoint,
    SweepResult,
    dof_slope,
    enumerate_received,
    multilayer_collisions,
    simulate,
    verify_dmin_bounds,
)
from ..diophantine import khintchine_kappa
from ..numerics import QuadFieldElement, RandomSource, quadratic_field
from .config import ExperimentConfig, format_gain, parse_gain, parse_gain_matrix


@dataclass
class Outcome:
    rows: list
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    failed: str | None = None


# --------------------------------------------------------------------------
# gain scan
# --------------------------------------------------------------------------


def farey(order: int) -> list[Fraction]:
    """Reduced fractions strictly between 0 and 1 with denominator <= order, ascending."""
    out = {Fraction(n, d) for d in range(2, order + 1) for n in range(1, d)}
    return sorted(out)


def quadratic_irrational(d: int) -> QuadFieldElement:
    """Fractional part of sqrt(d) as an exact field element."""
    fld = quadratic_field(d)
    r = fld.sqrt(d)
    return r - math.isqrt(d)


def gain_scan(order: int = 8, irrationals=(), measure: bool = False, epsilon: float = 0.05,
              P_max: float = 1e12, trials: int = 2000, seed: int = 0, sigma2: float = 1.0) -> Outcome:
    entries = [(float(h), "rational", h) for h in farey(order)]
    entries += [(float(quadratic_irrational(d)), "irrational", d) for d in irrationals]
    entries.sort(key=lambda e: e[0])
    rows = []
    for i, (_, kind, h) in enumerate(entries):
        if kind == "rational":
            sel = select_rational(h)
            theory = dof_rational_formula(h)
            row = {"h_num": h.numerator, "h_den_or_tag": h.denominator, "case": sel.case, "a": sel.a,
                   "W": sel.W, "theory_dof": theory, "degenerate": sel.degenerate}
        else:
            row = {"h_num": f"sqrt{h}-{math.isqrt(h)}", "h_den_or_tag": "irrational", "case": "irrational",
                   "a": None, "W": None, "theory_dof": 1.5, "degenerate": False}
        row["measured_slope"] = None
        if measure and not row["degenerate"]:
            hv = h if kind == "rational" else quadratic_irrational(h)
            sweep, _, _ = symmetric_sweep(hv, epsilon, None, P_max, sigma2, trials, seed + i)
            try:
                row["measured_slope"] = dof_slope(sweep)
            except ValueError:
                row["measured_slope"] = None
        rows.append(row)
    return Outcome(rows)


# --------------------------------------------------------------------------
# Property Gamma table
# --------------------------------------------------------------------------


def gamma_check(max_nm: int = 12, L_max: int = 3) -> Outcome:
    rows, warnings = [], []
    for m in range(1, max_nm + 1):
        for n in range(1, max_nm + 1):
            if math.gcd(n, m) != 1 or max(n, m) < 2:
                continue
            sel = select_rational(Fraction(n, m))
            if sel.degenerate:
                warnings.append(f"h={n}/{m}: degenerate selection a={sel.a}, skipped")
                continue
            for L in range(1, L_max + 1):
                count, w = multilayer_collisions(n, m, sel.W, sel.a, L)
                rows.append({"n": n, "m": m, "case": sel.case, "a": sel.a, "W": sel.W, "L": L,
                             "verdict": "holds" if count == 0 else f"violated {w}"})
    return Outcome(rows, warnings)


# --------------------------------------------------------------------------
# Khintchine-Groshev estimates
# --------------------------------------------------------------------------


def khintchine_table(alphas, epsilon: float, Qmaxes, random_alpha: int = 0, dim: int = 2, seed: int = 0) -> Outcome:
    alphas = [tuple(a) for a in (alphas or [])]
    if random_alpha:
        rng = RandomSource(seed, stream=2**31 - 2)
        alphas += [tuple(float(v) for v in rng.uniform(0, 1, dim)) for _ in range(random_alpha)]
    rows = []
    for i, a in enumerate(alphas):
        for Q in Qmaxes:
            est = khintchine_kappa(a, epsilon, Q)
            rows.append({"index": i, "alpha": ";".join(repr(v) for v in est.alpha), "epsilon": epsilon,
                         "Qmax": Q, "kappa_hat": est.kappa_hat, "p": est.p,
                         "q": ";".join(str(v) for v in est.q)})
    return Outcome(rows)


KHINTCHINE_COLUMNS = ("index", "alpha", "epsilon", "Qmax", "kappa_hat", "p", "q")


# --------------------------------------------------------------------------
# standardization
# --------------------------------------------------------------------------


STANDARDIZE_COLUMNS = ("quantity", "exact", "value")


def standardize_table(gains) -> Outcome:
    std = standardize_three_user(gains)
    rows = []
    for name in ("G0", "G1", "G2", "G3", "G1_displayed", "G3_displayed"):
        g = getattr(std, name)
        rows.append({"quantity": name, "exact": format_gain(g), "value": float(g)})
    for j in range(3):
        for i in range(3):
            g = std.effective[j][i]
            rows.append({"quantity": f"effective_{j + 1}{i + 1}", "exact": format_gain(g), "value": float(g)})
    warnings = []
    if std.G1 != std.G1_displayed or std.G3 != std.G3_displayed:
        warnings.append("displayed and reduced forms of G1/G3 differ")
    return Outcome(rows, warnings)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def _h_spec(gains) -> str:
    return ";".join(f"h{j + 1}{i + 1}={format_gain(g)}" for j, r in enumerate(gains) for i, g in enumerate(r))


def _describe(c) -> str:
    return c.describe()


def symmetric_builder(h, epsilon: float, m_min: int = 20):
    """(selection, builder P -> models) for the symmetric channel."""
    rational = isinstance(h, (int, Fraction)) or (isinstance(h, QuadFieldElement) and h.is_rational())
    if rational:
        hr = Fraction(h.coords[0]) if isinstance(h, QuadFieldElement) else Fraction(h)
        sel = select_rational(hr)
        h_use = hr
    else:
        sel = select_irrational(h, epsilon, m_min)
        h_use = h
    if getattr(sel, "degenerate", False):
        raise ValueError(f"degenerate selection for h={h}: a={sel.a}")

    def build(P):
        L = multilayer_levels(P, epsilon, sel.W)
        if L < 1:
            return []
        _, model = symmetric_multilayer_model(h_use, sel, L, P)
        return [model]

    return sel, build


def symmetric_sweep(h, epsilon, Ps, P_max, sigma2, trials, seed, workers=1, cap=10**7, m_min=20):
    sel, build = symmetric_builder(h, epsilon, m_min)
    if Ps is None:
        Ps = w_aligned_grid(sel.W, epsilon, P_max)
    return run_sweep(build, Ps, sigma2, trials, seed, multiplicity=3, workers=workers, cap=cap)


def run_sweep(build, Ps, sigma2, trials, seed, multiplicity=1, workers=1, cap=10**7):
    points, per_point, warnings = [], [], []
    sigma = math.sqrt(sigma2)
    for pi, P in enumerate(Ps):
        models = build(P)
        if not models:
            warnings.append(f"P={P!r}: no layer fits, point skipped")
            continue
        results = []
        for k, model in enumerate(models):
            if model.degenerate:
                warnings.append(f"P={P!r} stream {model.stream}: {model.reason}")
            rc = enumerate_received(model, cap=cap)
            res = simulate(model, rc, sigma, trials, RandomSource(seed, pi * 64 + k), workers=workers)
            results.append((model, rc, res))
        points.append(SweepPoint(float(P), tuple(r for _, _, r in results)))
        per_point.append(results)
    return SweepResult(tuple(points), multiplicity), per_point, warnings


def sweep_rows(scenario, mode, h_spec, epsilon, sweep, per_point):
    rows = []
    for i, (pt, results) in enumerate(zip(sweep.points, per_point)):
        r_of_P = sweep.r_of_P(i)
        for model, rc, res in results:
            rows.append({
                "scenario": scenario, "mode": mode, "h_spec": h_spec, "P": pt.P, "sigma2": res.sigma2,
                "epsilon": epsilon, "stream_id": model.stream, "Q_or_aWL": _describe(model.constellation),
                "dmin": res.dmin, "union_bound": res.union_bound, "trials": res.trials, "errors": res.errors,
                "pe": res.pe, "rate_bound": res.rate, "r_of_P": r_of_P,
            })
    return rows


def sweep_builder(cfg: ExperimentConfig):
    """(builder, multiplicity, mode, h_spec, default P list) for a sweep scenario."""
    sc, eps = cfg.scenario, cfg.epsilon
    if sc in ("symmetric-rational", "symmetric-irrational"):
        h = parse_gain(cfg.h)
        is_rat = isinstance(h, Fraction) or (isinstance(h, QuadFieldElement) and h.is_rational())
        if (sc == "symmetric-rational") != is_rat:
            raise ValueError(f"scenario {sc} does not match gain {format_gain(h)}")
        sel, build = symmetric_builder(h, eps, cfg.m_min)
        Ps = cfg.get("P") or w_aligned_grid(sel.W, eps, cfg.get("P_max", 1e12))
        mode = "exact" if not isinstance(h, float) else "numeric"
        return build, 3, mode, f"h={format_gain(h)}", Ps
    gains = parse_gain_matrix(cfg.gains, cfg.seed, cfg.get("K"))
    mode = "exact" if not isinstance(gains[0][0], float) else "numeric"
    if sc == "x-channel":
        def build(P):
            return list(x_channel_models(ChannelInstance(gains, P, cfg.sigma2), eps)[1])
    elif sc == "gic-k":
        def build(P):
            return list(gic_single_stream_models(ChannelInstance(gains, P, cfg.sigma2), eps)[1])
    elif sc == "gic3-asymmetric":
        std = standardize_three_user(gains)

        def build(P):
            return list(gic3_models(std, eps, P)[1])
    else:
        raise ValueError(f"{sc} is not a sweep scenario")
    return build, 1, mode, _h_spec(gains), cfg.get("P")


def run_sweep_scenario(cfg: ExperimentConfig, workers: int = 1) -> Outcome:
    build, mult, mode, h_spec, Ps = sweep_builder(cfg)
    if len(Ps) < 3:
        raise ValueError("a sweep needs at least 3 powers")
    sweep, per_point, warnings = run_sweep(build, Ps, cfg.sigma2, cfg.trials, cfg.seed, mult, workers,
                                           cfg.caps.get("tuples", 10**7))
    rows = sweep_rows(cfg.scenario, mode, h_spec, cfg.epsilon, sweep, per_point)
    out = Outcome(rows, warnings)
    try:
        out.extra["dof_slope"] = dof_slope(sweep, cfg.pe_threshold)
    except ValueError as e:
        out.extra["dof_slope"] = None
        out.warnings.append(str(e))
    if sweep.points and all(p.max_pe >= cfg.pe_threshold for p in sweep.points):
        out.failed = f"noise-dominated: P_e >= {cfg.pe_threshold} at every power"
    return out


DMIN_COLUMNS = ("P", "stream_id", "Q_or_aWL", "points", "verdict", "dmin_unit", "dmin", "check", "bound", "passed")


def run_dmin(cfg: ExperimentConfig) -> Outcome:
    build, _, _, _, Ps = sweep_builder(cfg)
    rows, warnings = [], []
    sel = None
    if cfg.scenario in ("symmetric-rational", "symmetric-irrational"):
        sel, _ = symmetric_builder(parse_gain(cfg.h), cfg.epsilon, cfg.m_min)
    for P in Ps:
        for model in build(P):
            rc = enumerate_received(model, cap=cfg.caps.get("tuples", 10**7))
            base = {"P": float(P), "stream_id": model.stream, "Q_or_aWL": model.constellation.describe(),
                    "points": len(rc), "verdict": rc.verdict.status, "dmin_unit": repr(float(rc.dmin_unit)),
                    "dmin": rc.dmin}
            checks = []
            if sel is not None:
                checks = verify_dmin_bounds(model, rc, selection=sel)
            elif model.m >= 1:
                qmax = 2 * max(model.bounds)
                alpha = [float(g) / float(model.signal_gain) for g in model.bases]
                est = khintchine_kappa(alpha, cfg.epsilon, qmax)
                checks = verify_dmin_bounds(model, rc, kappa=est, epsilon=cfg.epsilon)
            if not checks:
                rows.append(base)
            for c in checks:
                rows.append({**base, "check": c.name, "bound": repr(float(c.bound)), "passed": c.passed})
            if model.degenerate:
                warnings.append(f"P={P!r} stream {model.stream}: {model.reason}")
    return Outcome(rows, warnings)
