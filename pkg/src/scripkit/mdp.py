"""The single-agent volunteering problem against a mean-field steady state.

An agent's wealth is a lazy random walk: it earns a dollar with probability
``p_u`` per round while willing and spends one with probability ``p_d``.
Volunteering at wealth ``kappa - 1`` pays off iff ``alpha <= gamma * E[disc**J]``,
where ``J`` is the first round at which a walk started from ``kappa`` hits 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import BadParameter, DegenerateVolunteers, NonConvergence, UnboundedThreshold
from .model import AgentType, ValidatedSpec, WealthDistribution
from .steady_state import paying_request_rate, volunteer_mass

logger = logging.getLogger(__name__)

K_MAX = 1024


@dataclass(frozen=True)
class WalkParams:
    p_u: float
    p_d: float
    disc: float

    def __post_init__(self):
        if not 0.0 <= self.p_u < 1.0:
            raise BadParameter(f"p_u must lie in [0, 1), got {self.p_u}")
        if not 0.0 < self.p_d < 1.0:
            raise BadParameter(f"p_d must lie in (0, 1), got {self.p_d}")
        if self.p_u + self.p_d > 1.0 + 1e-12:
            raise BadParameter(f"p_u + p_d = {self.p_u + self.p_d} exceeds 1")
        if not 0.0 < self.disc < 1.0:
            raise BadParameter(f"discount must lie in (0, 1), got {self.disc}")

    @property
    def ratio(self) -> float:
        return self.p_u / self.p_d


def transition_probs(spec: ValidatedSpec, k: Sequence[int], dist: WealthDistribution, t: int) -> WalkParams:
    """Earn and spend probabilities of a type-``t`` agent at the steady state ``dist``.

    ``p_u`` is the chance that a paying request arrives, times the agent's
    share ``chi_t beta_t / sum chi upsilon`` of the volunteer pool.
    """
    p_d = spec.rho[t] / spec.total_agents
    paying = paying_request_rate(spec, dist)
    pool = float(np.dot(spec.chi, volunteer_mass(spec, dist)))
    if pool <= 0.0:
        if paying > 0.0:
            raise DegenerateVolunteers("requesters can pay but nobody volunteers")
        p_u = 0.0
    else:
        p_u = paying * spec.chi[t] * spec.beta[t] / pool
    if p_u + p_d > 1.0:
        logger.warning("type %d: p_u + p_d = %.3g > 1, clipping p_u", t, p_u + p_d)
        p_u = 1.0 - p_d
    return WalkParams(p_u=float(p_u), p_d=float(p_d), disc=spec.discount(t))


def discounted_absorption(kappa: int, w: WalkParams) -> float:
    """``E[disc**J]`` for the walk started at ``kappa`` and reflected at ``kappa``.

    Solves the tridiagonal first-step system with ``phi(0) = 1``.
    """
    kappa = int(kappa)
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if kappa == 0:
        return 1.0
    size = kappa + 1
    up, down, stay = w.disc * w.p_u, w.disc * w.p_d, w.disc * (1.0 - w.p_u - w.p_d)
    ab = np.zeros((3, size))
    ab[1, 0] = 1.0
    ab[1, 1:] = 1.0 - stay
    ab[1, -1] = 1.0 - w.disc * (1.0 - w.p_d)
    ab[0, 2:] = -up          # super-diagonal: coefficient of phi(x+1) in row x
    ab[2, :-1] = -down       # sub-diagonal: coefficient of phi(x-1) in row x
    rhs = np.zeros(size)
    rhs[0] = 1.0
    phi = solve_banded((1, 1), ab, rhs, check_finite=False)
    return float(phi[-1])


def best_reply_threshold(agent: AgentType, w: WalkParams, k_max: int = K_MAX) -> int:
    """Largest ``kappa <= k_max`` with ``alpha <= gamma * E[disc**J(kappa)]``.

    The right side is strictly decreasing in ``kappa``, so exponential
    bracketing followed by binary search finds it.  Ties go to the larger
    threshold.
    """

    def ok(kappa: int) -> bool:
        return agent.alpha <= agent.gamma * discounted_absorption(kappa, w)

    if ok(k_max):
        raise UnboundedThreshold(k_max)
    good, step = 0, 1
    while step < k_max and ok(step):
        good, step = step, step * 2
    bad = min(step, k_max)
    while bad - good > 1:
        mid = (good + bad) // 2
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good


def value_iteration_oracle(agent: AgentType, w: WalkParams, state_cap: int = K_MAX,
                           tol: float = 1e-12, max_iter: int = 2_000_000) -> np.ndarray:
    """Greedy volunteering policy of the full MDP on wealth ``0..state_cap``.

    Reward per round is ``gamma p_d`` for holding money minus ``alpha p_u``
    when volunteering.  Self-loops are folded into each update, which keeps
    the contraction fast when the walk rarely moves.  Returns a 0/1 array;
    volunteering is unavailable at the cap.
    """
    S = int(state_cap)
    if S < 1:
        raise ValueError("state_cap must be at least 1")
    a, g = agent.alpha, agent.gamma
    pu, pd, beta = w.p_u, w.p_d, w.disc
    s = np.arange(S + 1)
    has_money = s > 0
    down = np.where(has_money, pd, 0.0)
    can_up = s < S
    v = np.zeros(S + 1)

    def q_values(v):
        v_dn = np.concatenate(([v[0]], v[:-1]))
        v_up = np.concatenate((v[1:], [v[-1]]))
        base = np.where(has_money, g * pd, 0.0)
        q0 = (base + beta * down * v_dn) / (1.0 - beta * (1.0 - down))
        q1 = (base - a * pu + beta * (down * v_dn + pu * v_up)) / (1.0 - beta * (1.0 - down - pu))
        return q0, np.where(can_up, q1, -np.inf)

    for it in range(max_iter):
        q0, q1 = q_values(v)
        new = np.maximum(q0, q1)
        diff = new - v
        v = new
        if diff.max() - diff.min() < tol:
            break
    else:
        raise NonConvergence(f"value iteration did not converge in {max_iter} sweeps")
    logger.debug("value iteration converged after %d sweeps", it + 1)

    # volunteering changes the value by p_u (disc (v(s+1) - v(s)) - alpha);
    # with p_u = 0 it is pure indifference and we decline
    v_up = np.concatenate((v[1:], [v[-1]]))
    gain = pu * (beta * (v_up - v) - a)
    policy = (gain >= 0.0) & can_up & (pu > 0.0)
    return policy.astype(np.int8)


def policy_threshold(policy: np.ndarray) -> int | None:
    """``kappa`` if ``policy`` volunteers exactly below ``kappa``, else ``None``."""
    policy = np.asarray(policy)
    off = np.flatnonzero(policy == 0)
    kappa = int(off[0]) if off.size else len(policy)
    if np.all(policy[:kappa] == 1) and np.all(policy[kappa:] == 0):
        return kappa
    return None
