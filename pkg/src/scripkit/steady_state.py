"""Mean-field steady state of a threshold profile.

Every type's wealth follows a truncated geometric profile with ratio
``lam * omega_t``; ``lam`` is pinned by the average amount of money.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateVolunteers, InfeasibleMoney
from .model import ValidatedSpec, WealthDistribution

logger = logging.getLogger(__name__)

LAMBDA_LO = 1e-12
LAMBDA_HI = 1e12
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class SteadyState:
    lam: float
    dist: WealthDistribution
    zeta: float
    welfare_per_round: float
    volunteer_mass: np.ndarray


def _type_profile(log_ratio: float, k: int) -> np.ndarray:
    """Normalized ``r**i`` for ``i = 0..k`` with ``log r = log_ratio``."""
    logs = log_ratio * np.arange(k + 1)
    logs -= logs.max()
    p = np.exp(logs)
    return p / p.sum()


def _mean_money(log_lam: float, log_omega: np.ndarray, f: np.ndarray, k: Sequence[int]) -> float:
    total = 0.0
    for lo, ft, kt in zip(log_omega, f, k):
        if ft == 0.0 or kt == 0:
            continue
        p = _type_profile(log_lam + lo, kt)
        total += ft * float(np.dot(np.arange(kt + 1), p))
    return total


def max_money(spec: ValidatedSpec, k: Sequence[int]) -> float:
    """Supremum of the mean wealth when every agent sits at its threshold."""
    return math.fsum(float(f) * int(kt) for f, kt in zip(spec.fractions, k))


def solve_lambda(spec: ValidatedSpec, k: Sequence[int], m: float | None = None) -> float:
    """Find ``lam`` such that the steady state under ``k`` holds ``m`` dollars per agent.

    The mean is strictly increasing in ``lam``, so we bisect on ``log lam``.
    """
    m = float(spec.m) if m is None else float(m)
    top = max_money(spec, k)
    if m <= 0.0 or m >= top:
        raise InfeasibleMoney(f"average money {m:g} outside (0, {top:g}) for thresholds {tuple(k)}")
    log_omega = np.log(spec.omega)
    f = spec.f
    tol = 1e-10 * max(1.0, m)

    lo, hi = math.log(LAMBDA_LO), math.log(LAMBDA_HI)
    while _mean_money(lo, log_omega, f, k) > m:
        lo -= 10.0
    while _mean_money(hi, log_omega, f, k) < m:
        hi += 10.0

    mid = 0.5 * (lo + hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        err = _mean_money(mid, log_omega, f, k) - m
        if abs(err) <= tol or mid in (lo, hi):
            break
        if err < 0:
            lo = mid
        else:
            hi = mid
    else:
        logger.debug("lambda bisection hit the iteration cap, residual %.3g", err)
    return math.exp(mid)


def wealth_distribution(spec: ValidatedSpec, k: Sequence[int], lam: float) -> WealthDistribution:
    """``d(t, i) = f_t (lam w_t)^i / sum_j (lam w_t)^j`` for ``i <= k_t``, computed in log space."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    log_lam = math.log(lam)
    rows = []
    for t, (ft, om, kt) in enumerate(zip(spec.f, spec.omega, k)):
        if spec.types[t].behavior.kind in ("hoarder", "altruist") and lam * om >= 1.0 and ft > 0:
            logger.warning("type %d: lambda*omega = %.4g >= 1, wealth piles up at the cap %d", t, lam * om, kt)
        rows.append(ft * _type_profile(log_lam + math.log(om), int(kt)))
    return WealthDistribution(tuple(rows), lam)


def volunteer_mass(spec: ValidatedSpec, dist: WealthDistribution) -> np.ndarray:
    """Expected number of able agents per type below their threshold (upsilon_t).

    Counted over the whole population of ``h n`` agents.
    """
    below = np.array([float(row.sum() - row[-1]) for row in dist.rows])
    return spec.beta * below * spec.total_agents


def paying_request_rate(spec: ValidatedSpec, dist: WealthDistribution) -> float:
    """Probability that the requester of a round can pay."""
    return math.fsum(r * (f - row[0]) for r, f, row in zip(spec.rho, spec.f, dist.rows))


def satisfier_weights(spec: ValidatedSpec, dist: WealthDistribution) -> np.ndarray:
    """Probability that a paid job goes to each type, ``chi_t upsilon_t / sum chi upsilon``."""
    cu = spec.chi * volunteer_mass(spec, dist)
    total = cu.sum()
    if total <= 0.0:
        raise DegenerateVolunteers("no agent is willing and able to volunteer")
    return cu / total


def expected_welfare(spec: ValidatedSpec, k: Sequence[int], dist: WealthDistribution) -> float:
    """Expected per-round gain of standard agents.

    Each paying request of type ``t`` yields ``gamma_t`` to the requester and
    costs the chosen volunteer its ``alpha``; volunteers are drawn with
    weights ``chi upsilon``.  Non-standard types neither count as requesters
    nor as volunteers whose costs matter.
    """
    if all(int(x) == 0 for x in k):
        return 0.0
    std = spec.standard_mask
    served = np.array([r * (f - row[0]) for r, f, row in zip(spec.rho, spec.f, dist.rows)])
    weights = satisfier_weights(spec, dist)
    gain = math.fsum(served[std] * spec.gamma[std])
    cost = served.sum() * math.fsum(weights[std] * spec.alpha[std])
    return gain - cost


def steady_state(spec: ValidatedSpec, k: Sequence[int]) -> SteadyState:
    lam = solve_lambda(spec, k)
    dist = wealth_distribution(spec, k, lam)
    return SteadyState(
        lam=lam,
        dist=dist,
        zeta=dist.zeta(),
        welfare_per_round=expected_welfare(spec, k, dist),
        volunteer_mass=volunteer_mass(spec, dist),
    )
