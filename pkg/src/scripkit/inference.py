"""Recover threshold populations and preferences from a wealth distribution.

An explanation of ``d`` is a pair ``(lam, f)`` such that mixing truncated
geometric profiles ``f_i lam**j / sum_{l<=i} lam**l`` (for ``j <= i``)
reproduces ``d``.  Given ``lam`` the fractions follow top-down from
``d(K)``; they are all nonnegative once ``lam`` is at least every successive
ratio ``d(j+1)/d(j)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .equilibrium import greatest_equilibrium
from .errors import BadParameter, InconsistentLambda, NegativeFraction, NoExplanation, ScripError
from .mdp import WalkParams, discounted_absorption, transition_probs
from .model import AgentType, GameSpec, ValidatedSpec, WealthDistribution, validate_spec
from .steady_state import solve_lambda, wealth_distribution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservedDistribution:
    """``d[i]`` is the share of agents holding ``i`` dollars."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or d.size == 0:
            raise BadParameter("distribution must be a nonempty vector")
        if (d < 0).any():
            raise BadParameter("distribution has negative entries")
        if abs(d.sum() - 1.0) > 1e-9:
            raise BadParameter(f"distribution sums to {d.sum()}, not 1")
        nz = np.flatnonzero(d > 0)
        object.__setattr__(self, "d", d[: nz[-1] + 1].copy())

    @property
    def K(self) -> int:
        return self.d.size - 1

    @property
    def fully_supported(self) -> bool:
        return bool((self.d > 0).all())

    @classmethod
    def of(cls, d) -> "ObservedDistribution":
        return d if isinstance(d, cls) else cls(np.asarray(d, dtype=float))


@dataclass(frozen=True)
class Explanation:
    lam: float
    f: np.ndarray
    residual: float

    @property
    def support(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.f > 0)]

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "support": [{"k": i, "f": float(self.f[i])} for i in self.support],
            "residual": self.residual,
        }


def _partial_sums(lam: float, K: int) -> np.ndarray:
    """``sum_{m=0}^{j} lam**-m`` for ``j = 0..K``, i.e. ``S_j / lam**j``."""
    return np.cumsum(lam ** -np.arange(K + 1.0))


def generate(lam: float, f: Sequence[float]) -> np.ndarray:
    """Forward map: the distribution explained by ``(lam, f)``."""
    f = np.asarray(f, dtype=float)
    K = f.size - 1
    d = np.zeros(K + 1)
    j = np.arange(K + 1)
    for i in np.flatnonzero(f):
        logs = j[: i + 1] * math.log(lam)
        logs -= logs.max()
        w = np.exp(logs)
        d[: i + 1] += f[i] * w / w.sum()
    return d


def explanation_from_lambda(d, lam: float, tol: float = 1e-12) -> Explanation:
    """The unique ``f`` explaining ``d`` at ``lam``, built from the top wealth level down.

    Level ``K`` fixes ``f_K``; each lower level ``j`` then absorbs what the
    higher thresholds leave over, ``f_j = (S_j / lam**j)(d(j) - d(j+1)/lam)``.
    """
    obs = ObservedDistribution.of(d)
    if not lam > 0:
        raise BadParameter("lambda must be positive")
    dd = obs.d
    K = obs.K
    scale = _partial_sums(lam, K)
    nxt = np.append(dd[1:], 0.0) / lam
    f = scale * (dd - nxt)
    for i in range(K, -1, -1):
        if f[i] < 0:
            if f[i] >= -tol * scale[i] * max(dd[i], nxt[i]):
                f[i] = 0.0
            else:
                raise NegativeFraction(i, f[i])
    residual = float(np.abs(generate(lam, f) - dd).max())
    return Explanation(lam, f, residual)


def sufficient_lambda(d, max_doublings: int = 200) -> float:
    """Smallest ``2**j`` (``j >= 0``) at which the top-down construction stays nonnegative."""
    obs = ObservedDistribution.of(d)
    lam = 1.0
    for _ in range(max_doublings):
        try:
            explanation_from_lambda(obs, lam)
            return lam
        except NegativeFraction:
            lam *= 2.0
    raise NoExplanation("no power of two up to 2**200 explains the distribution")


def _smooth3(x: np.ndarray) -> np.ndarray:
    if x.size < 3:
        return x.copy()
    padded = np.concatenate(([x[0]], x, [x[-1]]))
    return np.median(np.lib.stride_tricks.sliding_window_view(padded, 3), axis=1)


def _restricted(dd: np.ndarray, lam: float, support: set[int]) -> Explanation | None:
    """Top-down construction keeping only ``support``; ``None`` if some fraction is negative."""
    K = dd.size - 1
    scale = _partial_sums(lam, K)
    f = np.zeros(K + 1)
    nxt = np.append(dd[1:], 0.0) / lam
    for i in support:
        f[i] = scale[i] * (dd[i] - nxt[i])
    if (f < -1e-12).any():
        return None
    f = np.clip(f, 0.0, None)
    return Explanation(lam, f, float(np.abs(generate(lam, f) - dd).max()))


def minimal_explanation(d, tol: float = 1e-6, smooth: bool = False) -> Explanation:
    """Explanation with the fewest thresholds, found from the log-slopes of ``d``.

    Wherever no agent's threshold sits, ``log d`` falls on a line of slope
    ``log lam``.  Successive log-ratios are clustered; each cluster yields a
    candidate ``lam`` (its least-squares slope and its upper edge) and the
    levels whose ratio departs from it by more than ``tol`` become
    thresholds, together with ``K``.  The smallest support whose
    reconstruction error is within ``tol`` wins.
    """
    obs = ObservedDistribution.of(d)
    if not obs.fully_supported:
        raise NoExplanation("minimal explanations need a fully supported distribution")
    dd = obs.d
    K = obs.K
    if K == 0:
        return Explanation(1.0, np.ones(1), 0.0)
    logr = np.diff(np.log(dd))
    # smoothing steadies the slope estimates; breaks are still read off the raw ratios
    slopes = _smooth3(logr) if smooth else logr

    candidates: list[float] = []
    order = np.sort(slopes)
    start = 0
    for j in range(1, order.size + 1):
        if j == order.size or order[j] - order[j - 1] > tol:
            cluster = order[start:j]
            candidates += [float(cluster.mean()), float(cluster.max())]
            start = j
    candidates.append(float(slopes.max()))

    best: Explanation | None = None
    for log_lam in candidates:
        lam = math.exp(log_lam)
        support = {K} | {int(j) for j in np.flatnonzero(np.abs(logr - log_lam) > tol)}
        exp = _restricted(dd, lam, support)
        if exp is None or exp.residual > tol:
            continue
        key = (len(exp.support), exp.residual)
        if best is None or key < (len(best.support), best.residual):
            best = exp
    if best is None:
        raise NoExplanation(f"no candidate slope explains the distribution within {tol}")
    return best


def per_type_lambda(dist: WealthDistribution, omegas: Sequence[float], tol: float = 1e-6) -> np.ndarray:
    """``median_i d(t,i)/d(t,i-1) / omega_t`` per type, checked for agreement across types."""
    out = []
    for row, om in zip(dist.rows, omegas):
        row = np.asarray(row, dtype=float)
        ok = (row[:-1] > 0) & (row[1:] > 0)
        if not ok.any():
            out.append(math.nan)
            continue
        out.append(float(np.median(row[1:][ok] / row[:-1][ok])) / om)
    lams = np.array(out)
    finite = lams[np.isfinite(lams)]
    if finite.size > 1 and (finite.max() - finite.min()) > tol * finite.mean():
        raise InconsistentLambda(f"per-type estimates disagree: {finite}")
    return lams


def cost_bounds(k: int, gamma: float, w: WalkParams) -> tuple[float, float]:
    """Interval ``(gamma g(k+1), gamma g(k)]`` of costs for which ``k`` is the best threshold."""
    if k < 0:
        raise BadParameter("threshold must be nonnegative")
    return gamma * discounted_absorption(k + 1, w), gamma * discounted_absorption(k, w)


@dataclass(frozen=True)
class SynthesizedGame:
    spec: ValidatedSpec
    profile: tuple[int, ...]
    cost_bounds: tuple[tuple[float, float], ...]
    reproduced: bool = False


# (position of alpha inside its interval, discount) tried in order
PLACEMENTS = ((0.5, None), (1.0, None), (0.5, 0.8), (1.0, 0.8), (0.5, 0.3), (1.0, 0.3), (1.0, 0.1))


def _game_at(fracs, h, m, n, profile, gamma, delta, pos) -> SynthesizedGame:
    placeholder = tuple(AgentType(alpha=0.5 * gamma, beta=1.0, gamma=gamma, delta=delta) for _ in profile)
    spec = validate_spec(GameSpec(placeholder, tuple(fracs), h, m, n))
    lam = solve_lambda(spec, profile)
    dist = wealth_distribution(spec, profile, lam)
    bounds, types = [], []
    for t, k in enumerate(profile):
        lo, hi = cost_bounds(k, gamma, transition_probs(spec, profile, dist, t))
        bounds.append((lo, hi))
        types.append(AgentType(alpha=lo + pos * (hi - lo), beta=1.0, gamma=gamma, delta=delta))
    spec = validate_spec(GameSpec(tuple(types), tuple(fracs), h, m, n))
    return SynthesizedGame(spec, profile, tuple(bounds))


def synthesize_game(d, explanation: Explanation, gamma: float = 1.0, delta: float = 0.95,
                    n: int = 100, max_denominator: int = 1000) -> SynthesizedGame:
    """A game whose greatest equilibrium distribution is ``d``: one type per threshold, all with ``omega = 1``.

    Fractions and the money supply are rationalized.  Each cost starts in the
    middle of its threshold's feasible interval at the explained steady
    state, which makes the profile an equilibrium.  When the best-reply
    dynamics stop at a larger equilibrium instead, costs move to the top of
    their intervals and the agents become more impatient until the profile
    is the greatest equilibrium; ``reproduced`` reports whether that worked.
    """
    obs = ObservedDistribution.of(d)
    support = explanation.support
    if not support:
        raise NoExplanation("explanation has empty support")
    fracs = [Fraction(float(explanation.f[i])).limit_denominator(max_denominator) for i in support]
    fracs[-1] = 1 - sum(fracs[:-1])
    if any(f <= 0 for f in fracs):
        raise NoExplanation("a fraction vanished after rationalization")
    m = Fraction(float(np.dot(np.arange(obs.K + 1), obs.d))).limit_denominator(max_denominator)
    h = 1
    for f in fracs + [m]:
        h = math.lcm(h, f.denominator)
    profile = tuple(support)

    first = None
    for pos, disc in PLACEMENTS:
        try:
            game = _game_at(fracs, h, m, n, profile, gamma, delta if disc is None else disc, pos)
            found = greatest_equilibrium(game.spec).profile
        except ScripError as exc:
            logger.debug("placement (%s, %s) failed: %s", pos, disc, exc)
            continue
        if first is None:
            first = game
        if found == profile:
            return replace(game, reproduced=True)
        logger.debug("placement (%s, %s) leads to %s instead of %s", pos, disc, found, profile)
    if first is None:
        raise NoExplanation("no cost placement yields a valid game")
    logger.warning("greatest equilibrium of the synthesized game differs from %s", profile)
    return first


def read_distribution_csv(path) -> ObservedDistribution:
    """Read ``wealth,fraction`` rows; missing wealth levels count as zero."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(int(r["wealth"]), float(r["fraction"])) for r in csv.DictReader(fh)]
    if not rows:
        raise BadParameter("empty distribution file")
    d = np.zeros(max(w for w, _ in rows) + 1)
    for w, x in rows:
        d[w] += x
    return ObservedDistribution(d)
