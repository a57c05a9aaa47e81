"""Best-reply dynamics, greatest equilibria, monetary crashes and welfare sweeps."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import BadBracket, ConfigError, DegenerateVolunteers, InfeasibleMoney, IterationCap, UnboundedThreshold
from .mdp import K_MAX, WalkParams, best_reply_threshold, transition_probs
from .model import Number, Profile, ValidatedSpec, WealthDistribution, as_fraction
from .steady_state import expected_welfare, max_money, solve_lambda, wealth_distribution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquilibriumReport:
    profile: Profile
    lam: float
    dist: WealthDistribution | None
    zeta: float
    welfare: float
    crashed: bool
    trace: tuple[Profile, ...] = field(default=(), compare=False)
    m: Fraction = Fraction(0)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_json(self, n: int | None = None) -> dict:
        doc = {
            "m": str(self.m),
            "profile": list(self.profile),
            "lambda": None if math.isnan(self.lam) else self.lam,
            "zeta": None if math.isnan(self.zeta) else self.zeta,
            "welfare": self.welfare,
            "crashed": self.crashed,
            "iterations": self.iterations,
            "trace": [list(k) for k in self.trace],
        }
        if n is not None:
            doc["welfare_per_unit_time"] = self.welfare * n
        return doc


def initial_profile(spec: ValidatedSpec, k_max: int) -> Profile:
    out = []
    for t in range(spec.num_types):
        fixed = spec.fixed_threshold(t)
        out.append(k_max if fixed is None else fixed)
    return tuple(out)


def _trivial(spec: ValidatedSpec, k: Sequence[int]) -> Profile:
    return tuple(int(kt) if spec.fixed_threshold(t) is not None else 0 for t, kt in enumerate(k))


WalkHook = Callable[[int, WalkParams], WalkParams]


def best_reply_profile(spec: ValidatedSpec, k: Sequence[int], k_max: int = K_MAX,
                       adjust: WalkHook | None = None) -> Profile:
    """Each standard type's best threshold against the steady state of ``k``.

    Non-standard types keep their fixed thresholds.  A profile that cannot
    hold the money supply, or that leaves nobody to volunteer, answers with
    threshold 0 for every standard type.  ``adjust(t, w)`` may modify the
    walk a type faces before its best reply is taken.
    """
    k = tuple(int(x) for x in k)
    m = float(spec.m)
    if m <= 0.0 or m >= max_money(spec, k):
        return _trivial(spec, k)
    lam = solve_lambda(spec, k)
    dist = wealth_distribution(spec, k, lam)
    out = []
    for t, agent in enumerate(spec.types):
        fixed = spec.fixed_threshold(t)
        if fixed is not None:
            out.append(fixed)
            continue
        try:
            w = transition_probs(spec, k, dist, t)
        except DegenerateVolunteers:
            return _trivial(spec, k)
        if adjust is not None:
            w = adjust(t, w)
        try:
            out.append(best_reply_threshold(agent, w, k_max))
        except UnboundedThreshold:
            logger.warning("type %d still volunteers at the cap %d; clamping", t, k_max)
            out.append(k_max)
    return tuple(out)


def _report(spec: ValidatedSpec, k: Profile, trace: list[Profile]) -> EquilibriumReport:
    std = [t for t in range(spec.num_types) if spec.fixed_threshold(t) is None]
    crashed = bool(std) and all(k[t] == 0 for t in std)
    try:
        lam = solve_lambda(spec, k)
    except InfeasibleMoney:
        return EquilibriumReport(k, math.nan, None, math.nan, 0.0, True, tuple(trace), spec.m)
    dist = wealth_distribution(spec, k, lam)
    try:
        welfare = expected_welfare(spec, k, dist)
    except DegenerateVolunteers:
        welfare = 0.0
    return EquilibriumReport(k, lam, dist, dist.zeta(), welfare, crashed, tuple(trace), spec.m)


def greatest_equilibrium(spec: ValidatedSpec, k_max: int = K_MAX, max_iter: int = 10_000,
                         start: Sequence[int] | None = None,
                         adjust: WalkHook | None = None) -> EquilibriumReport:
    """Iterate simultaneous best replies from the top profile to a fixed point.

    ``start`` may replace the top profile with any profile known to dominate
    the greatest equilibrium, such as the equilibrium at a smaller ``m``.
    """
    k = initial_profile(spec, k_max) if start is None else tuple(int(x) for x in start)
    trace = [k]
    for _ in range(max_iter):
        nxt = best_reply_profile(spec, k, k_max, adjust)
        if nxt == k:
            logger.info("m=%s: equilibrium %s after %d best replies", spec.m, k, len(trace) - 1)
            return _report(spec, k, trace)
        if any(a > b for a, b in zip(nxt, k)):
            logger.debug("best reply rose from %s to %s", k, nxt)
        k = nxt
        trace.append(k)
    raise IterationCap(f"no fixed point after {max_iter} best replies (last {k})")


def is_nontrivial(spec: ValidatedSpec, k_max: int = K_MAX) -> bool:
    return not greatest_equilibrium(spec, k_max).crashed


def critical_money(spec: ValidatedSpec, m_lo: Number, m_hi: Number, step: Number | None = None,
                   k_max: int = K_MAX) -> tuple[Fraction, Fraction]:
    """Bracket the crash point on the grid ``m_lo + j * step``.

    Returns the largest grid value with a nontrivial greatest equilibrium and
    the next one, which is trivial.  The base population is rescaled when the
    grid needs a finer money unit than ``1/h``.
    """
    m_lo, m_hi = as_fraction(m_lo), as_fraction(m_hi)
    step = Fraction(1, spec.h) if step is None else as_fraction(step)
    if step <= 0 or m_hi <= m_lo:
        raise BadBracket("need m_lo < m_hi and a positive step")
    if (m_hi - m_lo) % step != 0:
        raise BadBracket("m_hi - m_lo must be a whole number of steps")
    spec = spec.integral_for([m_lo, m_hi, step])

    def crashed(j: int) -> bool:
        rep = greatest_equilibrium(spec.with_m(m_lo + j * step), k_max)
        return rep.crashed

    lo, hi = 0, int((m_hi - m_lo) / step)
    if crashed(lo):
        raise BadBracket(f"already crashed at m={m_lo}")
    if not crashed(hi):
        raise BadBracket(f"not crashed at m={m_hi}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if crashed(mid):
            hi = mid
        else:
            lo = mid
    return m_lo + lo * step, m_lo + hi * step


# ----------------------------------------------------------------- sweeps

def parse_grid(text: str) -> list[Fraction]:
    """``LO:STEP:HI`` (inclusive) as exact rationals."""
    try:
        lo, step, hi = (as_fraction(x) for x in text.split(":"))
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"grid must look like LO:STEP:HI, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise ConfigError(f"empty grid {text!r}")
    count = int((hi - lo) / step)
    return [lo + j * step for j in range(count + 1)]


def _solve_point(args) -> EquilibriumReport:
    spec, m, k_max = args
    return greatest_equilibrium(spec.with_m(m), k_max)


def welfare_sweep(spec: ValidatedSpec, m_grid: Iterable[Number], k_max: int = K_MAX,
                  jobs: int = 1, warm_start: bool = False) -> list[EquilibriumReport]:
    """Greatest equilibrium at every ``m`` of the grid, in grid order.

    With ``warm_start`` an increasing sequential sweep starts each point from
    the previous nontrivial equilibrium instead of the top profile; this is
    only sound because equilibria shrink as money grows.
    """
    grid = [as_fraction(m) for m in m_grid]
    spec = spec.integral_for(grid)
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_solve_point, [(spec, m, k_max) for m in grid]))
    out: list[EquilibriumReport] = []
    prev: EquilibriumReport | None = None
    for m in grid:
        start = None
        if warm_start and prev is not None and not prev.crashed and m >= prev.m:
            start = prev.profile
        prev = greatest_equilibrium(spec.with_m(m), k_max, start=start)
        out.append(prev)
    return out


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def sweep_header(num_types: int) -> list[str]:
    return ["m", *(f"k_{t}" for t in range(num_types)), "lambda", "zeta", "welfare", "crashed"]


def sweep_rows(reports: Sequence[EquilibriumReport]) -> list[list]:
    return [[r.m, *r.profile, r.lam, r.zeta, r.welfare, int(r.crashed)] for r in reports]
