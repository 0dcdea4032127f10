"""Closed-form achievable curves, converse bounds, envelopes and gap reports.

Every converse here is a finite family of lines R >= A - B*M evaluated as a
pointwise max (clamped at zero), so bound values are exact rationals. The
continuous parameter in the uncoded-placement converse is discretized on a
1/64 grid plus both endpoints; a finer grid could only tighten the bound, so
the discretization is safe for lower-bound claims.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import ConfigurationError, UnsupportedParams
from .model import SystemParams, TradeoffCurve, TradeoffPoint
from .schemes.base import binom

ALPHA_STEPS = 64


def _line_max(lines: list[tuple[Fraction, Fraction]], m: Fraction) -> Fraction:
    best = Fraction(0)
    for a, b in lines:
        val = a - b * m
        if val > best:
            best = val
    return best


def cutset_lines(params: SystemParams) -> list[tuple[Fraction, Fraction]]:
    n, ka = params.n_files, params.k_active
    lines = []
    for s in range(1, min(n, ka) + 1):
        lines.append((Fraction(s), Fraction(s, n // s)))
    return lines


def cutset_lb(params: SystemParams, m) -> Fraction:
    return _line_max(cutset_lines(params), Fraction(m))


def yma_lb_lines(params: SystemParams) -> list[tuple[Fraction, Fraction]]:
    """Lines from the uncoded-placement converse, over the (s, alpha) sweep.

    For each s and alpha the auxiliary level is the minimum l in [s] with
    (s(s-1) - l(l-1))/2 + alpha*s <= (N - l + 1) l; l = s always qualifies,
    so a line exists for every grid cell.
    """
    n, ka = params.n_files, params.k_active
    alphas = [Fraction(i, ALPHA_STEPS) for i in range(ALPHA_STEPS + 1)]
    lines = []
    for s in range(1, min(n, ka) + 1):
        for alpha in alphas:
            level = None
            for l in range(1, s + 1):
                if Fraction(s * (s - 1) - l * (l - 1), 2) + alpha * s <= (n - l + 1) * l:
                    level = l
                    break
            if level is None:
                continue
            a = s - 1 + alpha
            b = Fraction(s * (s - 1) - level * (level - 1), 1) + 2 * alpha * s
            lines.append((Fraction(a), b / (2 * (n - level + 1))))
    return lines


def yma_lb(params: SystemParams, m) -> Fraction:
    return _line_max(yma_lb_lines(params), Fraction(m))


def exact_small_lines(params: SystemParams) -> list[tuple[Fraction, Fraction]]:
    if params.k_active != 2:
        raise UnsupportedParams("the exact optimum is only known for K' = 2")
    n = params.n_files
    if n == 2:
        return [(Fraction(2), Fraction(2)), (Fraction(3, 2), Fraction(1)), (Fraction(1), Fraction(1, 2))]
    return [(Fraction(2), Fraction(3, n)), (Fraction(1), Fraction(1, n))]


def exact_small_lb(params: SystemParams, m) -> Fraction:
    return _line_max(exact_small_lines(params), Fraction(m))


def privacy_lines(params: SystemParams) -> list[tuple[Fraction, Fraction]]:
    n, ka = params.n_files, params.k_active
    lines = []
    for l in range(1, n + 1):
        cap = min(l + 1, ka)
        a = l + Fraction((n - l) * cap, (n - l) + cap)
        lines.append((a, Fraction(l)))
    return lines


def privacy_lb(params: SystemParams, m) -> Fraction:
    return _line_max(privacy_lines(params), Fraction(m))


_BOUND_FAMILIES = {
    "cutset": cutset_lines,
    "yma_lb": yma_lb_lines,
    "exact_small": exact_small_lines,
    "privacy_lb": privacy_lines,
    "combined": lambda p: cutset_lines(p) + yma_lb_lines(p),
    "combined_private": lambda p: cutset_lines(p) + yma_lb_lines(p) + privacy_lines(p),
}


def bound_names() -> list[str]:
    return sorted(_BOUND_FAMILIES)


def converse_evaluator(name: str, params: SystemParams):
    try:
        lines = _BOUND_FAMILIES[name](params)
    except KeyError:
        raise ConfigurationError(
            f"unknown bound {name!r}; known: {', '.join(bound_names())}"
        ) from None
    return lambda m: _line_max(lines, Fraction(m))


def _yma_style_points(k: int, rank_cap: int, n: int) -> list[TradeoffPoint]:
    points = []
    for t in range(k + 1):
        m = Fraction(n * binom(k - 1, t - 1), binom(k, t))
        r = Fraction(binom(k, t + 1) - binom(k - rank_cap, t + 1), binom(k, t))
        points.append(TradeoffPoint(m, r))
    return points


def scheme_corner_points(name: str, params: SystemParams) -> list[TradeoffPoint]:
    """Theorem corner points for a scheme or composite curve name.

    These are the closed forms only; nothing is executed. Composite names
    follow the figures: "ht" is the union of the three non-private new
    schemes, "ht_pk" the union of the two privacy-key schemes.
    """
    ka, k, n = params.k_active, params.k_total, params.n_files
    rp = min(ka, n)
    if name == "yma_plus":
        return _yma_style_points(k, rp, n)
    if name == "ht1":
        points = []
        for t in range(ka + 1):
            m = Fraction(n * binom(k - 1, t - 1), binom(ka, t))
            r = Fraction(binom(ka, t + 1) - binom(ka - rp, t + 1), binom(ka, t))
            points.append(TradeoffPoint(m, r))
        return points
    if name == "ht2":
        if ka < n:
            raise UnsupportedParams("ht2 needs K' >= N")
        return [TradeoffPoint(Fraction(1, ka), Fraction(n * (ka - 1), ka))]
    if name == "ht3":
        if ka < 3:
            raise UnsupportedParams("ht3 needs K' >= 3")
        return [TradeoffPoint(Fraction(n * (ka - 1), ka), Fraction(1, ka))]
    if name == "flex":
        if ka < 3:
            raise UnsupportedParams("flex needs K' >= 3")
        points = []
        for t in range(2, ka):
            r_rows = binom(ka - 1, t - 1)
            l_t = (r_rows * t - 1) // (t - 1)
            m = Fraction(n * r_rows, l_t)
            r = Fraction(binom(ka, t + 1) - binom(ka - rp, t + 1), l_t)
            points.append(TradeoffPoint(m, r))
        return points
    if name == "ht":
        # The combined curve of the three new schemes, closed with the
        # trivial uncoded corners as in the figures.
        points = scheme_corner_points("ht1", params)
        if ka >= n:
            points += scheme_corner_points("ht2", params)
        if ka >= 3:
            points += scheme_corner_points("ht3", params)
        points += scheme_corner_points("uncoded", params)
        return points
    if name == "pk_plus":
        cap = min(ka, n - 1)
        points = [TradeoffPoint(Fraction(0), Fraction(n))]
        for t in range(k + 1):
            m = 1 + Fraction(t, k) * (n - 1)
            r = Fraction(binom(k, t + 1) - binom(k - cap, t + 1), binom(k, t))
            points.append(TradeoffPoint(m, r))
        return points
    if name == "ht1_pk":
        cap = min(ka, n - 1)
        points = [TradeoffPoint(Fraction(n), Fraction(0))]
        for t in range(ka + 1):
            sub = binom(ka, t)
            eta = max(0, sub - binom(k - 1, t - 1))
            m = Fraction(n * binom(k - 1, t - 1) + eta, sub)
            r = Fraction(binom(ka, t + 1) - binom(ka - cap, t + 1), sub)
            points.append(TradeoffPoint(m, r))
        return points
    if name == "ht3_pk":
        if ka < 3:
            raise UnsupportedParams("ht3_pk needs K' >= 3")
        return [TradeoffPoint(Fraction(n) - Fraction(n - 1, ka), Fraction(1, ka))]
    if name == "ht_vu":
        if n < 2:
            raise UnsupportedParams("ht_vu needs N >= 2")
        sub = ka * (n - 1) + 1
        return [TradeoffPoint(Fraction(1, sub), Fraction(n * (sub - 1), sub))]
    if name == "ht_pk":
        points = scheme_corner_points("ht1_pk", params)
        if ka >= 3:
            points += scheme_corner_points("ht3_pk", params)
        points += scheme_corner_points("uncoded", params)
        return points
    if name == "yma_vu":
        return _yma_style_points(k * n, n, n)
    if name == "uncoded":
        return [TradeoffPoint(Fraction(0), Fraction(n)), TradeoffPoint(Fraction(n), Fraction(0))]
    if name.startswith("vu(") and name.endswith(")"):
        expanded = params.expanded_for_virtual_users()
        return scheme_corner_points(name[3:-1], expanded)
    raise ConfigurationError(f"no corner-point formula for curve {name!r}")


class FormulaCurve:
    """A closed-form achievable load as a function of memory on [0, N]."""

    def __init__(self, name: str, n: int, fn):
        self.name = name
        self.max_m = Fraction(n)
        self.min_m = Fraction(0)
        self._fn = fn

    def eval(self, m) -> Fraction:
        m = Fraction(m)
        if not 0 <= m <= self.max_m:
            raise ConfigurationError(f"memory {m} outside [0, {self.max_m}]")
        return self._fn(m)

    def is_vertex(self, m, r) -> bool:
        return False


def decentralized_curve(params: SystemParams, exponent: int, name: str) -> FormulaCurve:
    n = params.n_files

    def fn(m: Fraction) -> Fraction:
        if m == 0:
            return Fraction(exponent)  # continuous limit of the formula
        if m >= n:
            return Fraction(0)
        mu = m / n
        return (1 - mu) / mu * (1 - (1 - mu) ** exponent)

    return FormulaCurve(name, n, fn)


def achievable_curve(name: str, params: SystemParams):
    if name == "decen_plus":
        return decentralized_curve(params, min(params.k_active, params.n_files), name)
    if name == "decen_vu":
        return decentralized_curve(params, params.n_files, name)
    return TradeoffCurve(scheme_corner_points(name, params), name=name)


def curve_names() -> list[str]:
    return [
        "yma_plus", "ht1", "ht2", "ht3", "flex", "ht",
        "pk_plus", "ht1_pk", "ht3_pk", "ht_vu", "ht_pk",
        "yma_vu", "uncoded", "decen_plus", "decen_vu", "vu(<inner>)",
    ]


def default_grid(n: int, count: int = 128, extra=()) -> list[Fraction]:
    """count uniform rationals on [0, N] merged with the given abscissae."""
    grid = {Fraction(i * n, count - 1) for i in range(count)}
    grid.update(Fraction(x) for x in extra)
    return sorted(x for x in grid if 0 <= x <= n)


def gap_report(achievable, converse, grid: list[Fraction]) -> dict:
    """Sup of achievable/converse over the grid, with the witness point.

    Grid points where the converse vanishes are skipped when the achievable
    load also vanishes there and reported as infinite otherwise.
    """
    worst: Fraction | None = None
    at = None
    infinite_at = None
    for m in grid:
        try:
            ach = achievable.eval(m)
        except ConfigurationError:
            continue
        conv = converse(m)
        if conv == 0:
            if ach > 0:
                infinite_at = m
            continue
        ratio = ach / conv
        if worst is None or ratio > worst:
            worst, at = ratio, m
    return {
        "max_ratio": worst,
        "argmax_m": at,
        "unbounded_at": infinite_at,
        "points": len(grid),
    }
