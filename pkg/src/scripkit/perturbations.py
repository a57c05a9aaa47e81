"""Altruists, hoarders and sybils.

Altruists are modelled as a fraction ``a`` of requests served for free,
which slows both directions of every walk by ``1 - a``.  Hoarders and
sybils are handled by splitting each type into a standard copy and a
perturbed copy.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .equilibrium import EquilibriumReport, greatest_equilibrium
from .errors import BadBracket, BadParameter, CrashedEconomy, NonIntegralPopulation
from .mdp import K_MAX, WalkParams, transition_probs
from .model import HOARDER, AgentType, GameSpec, Number, ValidatedSpec, as_fraction, validate_spec
from .steady_state import solve_lambda, wealth_distribution

logger = logging.getLogger(__name__)

H_CAP = 10**6


def _check_a(a: float) -> float:
    a = float(a)
    if not 0.0 <= a < 1.0:
        raise BadParameter(f"altruist share must lie in [0, 1), got {a}")
    return a


# ------------------------------------------------------------------ altruists

def altruist_adjusted_walk(w: WalkParams, a: float) -> WalkParams:
    """Walk of a standard agent when a share ``a`` of requests is served for free."""
    a = _check_a(a)
    if a == 0.0:
        return w
    return WalkParams(p_u=w.p_u * (1.0 - a), p_d=w.p_d * (1.0 - a), disc=w.disc)


def altruist_equilibrium(spec: ValidatedSpec, a: float, k_max: int = K_MAX) -> EquilibriumReport:
    """Greatest equilibrium when altruists serve a share ``a`` of requests.

    Money moves only on the remaining requests, so the steady state is the
    same as without altruists; only the walks slow down.
    """
    a = _check_a(a)
    return greatest_equilibrium(spec, k_max, adjust=lambda t, w: altruist_adjusted_walk(w, a))


def altruist_welfare(spec: ValidatedSpec, a: float, report: EquilibriumReport | None = None,
                     k_max: int = K_MAX) -> float:
    """``a gamma + (1 - a)(1 - zeta(a))(gamma - alpha)`` for a one-type game.

    Raises :class:`CrashedEconomy` carrying ``welfare = a gamma`` when the
    standard agents stop volunteering.
    """
    if spec.num_types != 1:
        raise BadParameter("altruist welfare is defined for a single standard type")
    a = _check_a(a)
    if report is None:
        report = altruist_equilibrium(spec, a, k_max)
    agent = spec.types[0]
    if report.crashed:
        raise CrashedEconomy(f"no standard agent volunteers at a={a}", welfare=a * agent.gamma)
    return a * agent.gamma + (1.0 - a) * (1.0 - report.zeta) * (agent.gamma - agent.alpha)


def min_altruists(standard: AgentType | Sequence[AgentType], altruist: AgentType, h: int) -> int:
    """Smallest ``a >= 1`` with ``(rho/h) gamma (1 - beta_alt)**a < alpha`` for every standard type.

    Beyond this many altruists, a standard agent gains less from an extra
    dollar than it costs to earn it, so never volunteering dominates.
    """
    types = [standard] if isinstance(standard, AgentType) else list(standard)
    b = altruist.beta
    if not 0.0 < b < 1.0:
        raise BadParameter("altruist ability must lie in (0, 1)")
    best = 1
    for t in types:
        bound = t.rho / h * t.gamma
        # first guess from logarithms, then settle by direct comparison
        guess = max(1, math.ceil(math.log(t.alpha / bound) / math.log1p(-b))) if bound >= t.alpha else 1
        a = max(1, guess - 2)
        while not bound * (1.0 - b) ** a < t.alpha:
            a += 1
        while a > 1 and bound * (1.0 - b) ** (a - 1) < t.alpha:
            a -= 1
        best = max(best, a)
    return best


# ------------------------------------------------------------ type splitting

def _split(spec: ValidatedSpec, share: Fraction, make_copy) -> ValidatedSpec:
    """Split every type ``t`` into ``t`` with ``(1 - share) f_t`` and ``make_copy(t)`` with ``share f_t``."""
    types, fractions = [], []
    for t, f in zip(spec.types, spec.fractions):
        types += [t, make_copy(t)]
        fractions += [(1 - share) * f, share * f]
    factor = 1
    for f in fractions:
        factor = math.lcm(factor, (f * spec.h).denominator)
    if spec.h * factor > H_CAP:
        raise NonIntegralPopulation(f"base population would exceed {H_CAP}")
    scaled = spec.rescale_base(factor)
    # rescaling may move delta; take the rescaled types' deltas for both copies
    deltas = [t.delta for t in scaled.types]
    types = [replace(t, delta=deltas[i // 2]) for i, t in enumerate(types)]
    return validate_spec(GameSpec(
        types=tuple(types), fractions=tuple(fractions), h=scaled.h, m=spec.m, n=scaled.n,
        k_hoard=spec.k_hoard, discount_basis=spec.discount_basis,
    ))


def hoarder_spec(spec: ValidatedSpec, f_h: Number) -> ValidatedSpec:
    """Turn a share ``f_h`` of every type into hoarders.

    Types come out interleaved as ``(t, standard), (t, hoarder)``.
    """
    f_h = as_fraction(f_h)
    if not 0 <= f_h < 1:
        raise BadParameter("hoarder share must lie in [0, 1)")
    if f_h == 0:
        return spec
    return _split(spec, f_h, lambda t: replace(t, behavior=HOARDER))


def sybil_spec(spec: ValidatedSpec, s: int, fraction: Number) -> ValidatedSpec:
    """A share ``fraction`` of every type runs ``s`` sybils, multiplying its ``chi`` by ``1 + s``."""
    fraction = as_fraction(fraction)
    if int(s) != s or s < 0:
        raise BadParameter("sybil count must be a nonnegative integer")
    if not 0 <= fraction <= 1:
        raise BadParameter("sybil share must lie in [0, 1]")
    if s == 0 or fraction == 0:
        return spec
    return _split(spec, fraction, lambda t: replace(t, chi=t.chi * (1 + int(s))))


def standard_welfare(spec: ValidatedSpec, report: EquilibriumReport) -> float:
    """Per-round net gain per standard agent: ``sum_std rho (f - d(t,0)) (gamma - alpha) / f_std``."""
    if report.dist is None:
        return 0.0
    std = spec.standard_mask
    if report.crashed and not np.any(~std):
        return 0.0
    mass = float(spec.f[std].sum())
    served = np.array([r * (f - row[0]) for r, f, row in zip(spec.rho, spec.f, report.dist.rows)])
    return float(np.sum((served * (spec.gamma - spec.alpha))[std]) / mass)


# --------------------------------------------------------- satisfaction rate

def satisfaction_rate(R: float, k: int) -> float:
    """Long-run share of an agent's requests it can pay for: ``(R - R^{k+1}) / (1 - R^{k+1})``."""
    if R < 0 or k < 0:
        raise BadParameter("need R >= 0 and k >= 0")
    if k == 0 or R == 0:
        return 0.0
    if abs(R - 1.0) < 1e-9:
        return k / (k + 1.0)
    if R > 1.0:
        # divide through by R^{k+1} to stay finite
        inv = 1.0 / R
        return (inv**k - 1.0) / (inv ** (k + 1) - 1.0)
    return (R - R ** (k + 1)) / (1.0 - R ** (k + 1))


# ---------------------------------------------------- equivalent money supply

@dataclass(frozen=True)
class EquivalentMoney:
    m_real: float
    m: Fraction
    n: int
    target_rate: float
    achieved_rate: float

    @property
    def residual(self) -> float:
        return abs(self.achieved_rate - self.target_rate)


def _single_type_rate(base: ValidatedSpec, k: int, m: float) -> float:
    """Earn rate ``p_u h n`` of the one-type game at profile ``(k,)`` and money ``m``."""
    lam = solve_lambda(base, (k,), m)
    dist = wealth_distribution(base, (k,), lam)
    return transition_probs(base, (k,), dist, 0).p_u * base.total_agents


def equivalent_money_supply(spec: ValidatedSpec, k: Sequence[int], sybil_type: int = 1,
                            max_denominator: int = H_CAP, tol: float = 1e-12) -> EquivalentMoney:
    """Money supply for a one-type game without sybils whose agents earn like the sybil type.

    ``spec`` has two types that differ only in ``chi``.  Earn rates are
    compared per agent and per unit of time (``p_u h n``), so that the
    replica count chosen to make the money integral does not matter.
    """
    if spec.num_types != 2:
        raise BadParameter("need exactly two types")
    s_idx, t_idx = sybil_type, 1 - sybil_type
    t, s = spec.types[t_idx], spec.types[s_idx]
    if replace(t, chi=s.chi) != s:
        raise BadParameter("types must differ only in chi")
    if not t.chi <= s.chi:
        raise BadParameter("the sybil type must have the larger chi")
    k = tuple(int(x) for x in k)
    lam = solve_lambda(spec, k)
    dist = wealth_distribution(spec, k, lam)
    target = transition_probs(spec, k, dist, s_idx).p_u * spec.total_agents
    if not (target > 0.0 and math.isfinite(target)):
        raise BadBracket(f"target earn rate {target} is not positive")

    k_s = k[s_idx]
    base = validate_spec(GameSpec((replace(t, rho=1.0),), (Fraction(1),), 1, Fraction(0), spec.total_agents,
                                  k_hoard=spec.k_hoard, discount_basis=spec.discount_basis))
    lo, hi = 0.0, float(k_s)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _single_type_rate(base, k_s, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, mid):
            break
    m_real = 0.5 * (lo + hi)
    m_frac = Fraction(m_real).limit_denominator(max_denominator)
    if not 0 < m_frac < k_s:
        raise BadBracket("rationalized money supply left (0, k_s)")
    achieved = _single_type_rate(base, k_s, float(m_frac))
    return EquivalentMoney(m_real, m_frac, m_frac.denominator * spec.total_agents, target, achieved)


def equivalent_game(spec: ValidatedSpec, eq: EquivalentMoney, sybil_type: int = 1) -> ValidatedSpec:
    """The one-type game with ``m'`` dollars per agent and ``n'`` agents from :func:`equivalent_money_supply`.

    The base population is the denominator ``b`` of ``m'`` so that money per
    base population is integral; ``b`` times ``h n`` agents make up ``n'``.
    """
    t = spec.types[1 - sybil_type]
    b = eq.m.denominator
    return validate_spec(GameSpec((replace(t, rho=1.0),), (Fraction(1),), b, eq.m, eq.n // b,
                                  k_hoard=spec.k_hoard, discount_basis=spec.discount_basis))
