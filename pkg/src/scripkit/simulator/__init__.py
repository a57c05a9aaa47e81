"""Agent-level Monte Carlo of the scrip game.

Agents are laid out in type order: the first ``f_0 h n`` agents have type 0,
the next ``f_1 h n`` type 1, and so on.  Colluding agents share one wallet
and one threshold; every other agent has a wallet of its own.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..model import ValidatedSpec, WealthDistribution
from . import engine
from .rng import seed_stream

logger = logging.getLogger(__name__)

UNBOUNDED = np.iinfo(np.int64).max // 4
STREAM_REQUESTER, STREAM_ABILITY, STREAM_WINNER, STREAM_ALLOCATION = range(4)


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``profile`` gives a threshold per type; ``agent_thresholds`` overrides it
    per agent.  ``initial`` is ``"uniform"`` (every dollar lands on a
    uniformly random agent) or an explicit per-agent vector.
    ``free_service_prob`` serves that share of requests at no cost, the
    abstraction of an altruist population.
    """

    spec: ValidatedSpec
    profile: Sequence[int] = ()
    rounds: int = 100_000
    seed: int = 0
    agent_thresholds: Sequence[int] | None = None
    collusion_groups: Sequence[Sequence[int]] = ()
    group_thresholds: Sequence[int] | None = None
    sybil_counts: Sequence[int] | None = None
    initial: str | Sequence[int] = "uniform"
    tail_fraction: float = 0.5
    free_service_prob: float = 0.0


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    empirical_dist: WealthDistribution
    utility_discounted: np.ndarray
    utility_per_round: np.ndarray
    counters: np.ndarray
    earned: np.ndarray
    spent: np.ndarray
    willing_rounds: np.ndarray
    agents_per_type: np.ndarray
    final_balance: np.ndarray
    money_conserved: bool
    tail_rounds: int
    tail_gain: np.ndarray
    tail_cost: np.ndarray
    agent_type: np.ndarray = field(repr=False)

    def welfare_per_round(self, types: Sequence[int] | None = None) -> float:
        """Utility gained minus costs paid per measured round, over ``types`` (default all)."""
        sel = slice(None) if types is None else list(types)
        return float((self.tail_gain[sel].sum() - self.tail_cost[sel].sum()) / self.tail_rounds)

    def counter(self, name: str, t: int | None = None) -> int:
        col = getattr(engine, name.upper())
        return int(self.counters[:, col].sum() if t is None else self.counters[t, col])

    def earn_frequency(self, t: int) -> float:
        """Dollars earned per willing agent-round of type ``t`` (estimates ``p_u``)."""
        return float(self.earned[t] / self.willing_rounds[t]) if self.willing_rounds[t] else math.nan

    def spend_frequency(self, t: int) -> float:
        """Dollars spent per agent-round of type ``t`` (estimates ``p_d`` times the share of time with money)."""
        return float(self.spent[t] / (self.agents_per_type[t] * self.tail_rounds))

    def request_frequency(self, t: int) -> float:
        """Requests per agent-round of type ``t`` (estimates ``p_d``)."""
        return float(self.counters[t, engine.MADE] / (self.agents_per_type[t] * self.tail_rounds))

    def mean_utility(self, t: int, discounted: bool = True) -> float:
        u = self.utility_discounted if discounted else self.utility_per_round
        return float(u[self.agent_type == t].mean())

    def counters_json(self) -> dict:
        names = ["made", "satisfied", "unsatisfied_for_money", "unsatisfied_no_volunteer",
                 "free", "internal", "candidate", "satisfied_candidate"]
        return {
            "per_type": [
                dict({n: int(v) for n, v in zip(names, row)},
                     earned=int(self.earned[t]), spent=int(self.spent[t]),
                     earn_frequency=self.earn_frequency(t), request_frequency=self.request_frequency(t))
                for t, row in enumerate(self.counters)
            ],
            "tail_rounds": self.tail_rounds,
            "money_conserved": self.money_conserved,
        }


def _agent_layout(spec: ValidatedSpec) -> np.ndarray:
    counts = [int(f * spec.h) * spec.n for f in spec.fractions]
    return np.repeat(np.arange(spec.num_types), counts).astype(np.int64)


def run(config: SimConfig) -> SimResult:
    """Simulate ``config.rounds`` rounds; identical configs give identical results."""
    spec = config.spec
    agent_type = _agent_layout(spec)
    N = agent_type.size
    T = spec.num_types
    if config.rounds < 1:
        raise ConfigError("rounds must be positive")
    if not 0.0 <= config.tail_fraction <= 1.0:
        raise ConfigError("tail_fraction must lie in [0, 1]")
    if not 0.0 <= config.free_service_prob <= 1.0:
        raise ConfigError("free_service_prob must lie in [0, 1]")

    kinds = np.zeros(N, dtype=np.int64)
    thresh = np.zeros(N, dtype=np.int64)
    for t, agent in enumerate(spec.types):
        sel = agent_type == t
        kind = agent.behavior.kind
        if kind == "altruist":
            kinds[sel] = engine.KIND_ALTRUIST
            thresh[sel] = UNBOUNDED
        elif kind == "hoarder":
            kinds[sel] = engine.KIND_HOARDER
            thresh[sel] = UNBOUNDED
        elif kind == "fixed":
            thresh[sel] = agent.behavior.k
        else:
            if config.agent_thresholds is None and len(config.profile) != T:
                raise ConfigError(f"profile needs {T} thresholds, got {len(config.profile)}")
            if config.agent_thresholds is None:
                thresh[sel] = int(config.profile[t])
    if config.agent_thresholds is not None:
        override = np.asarray(config.agent_thresholds, dtype=np.int64)
        if override.shape != (N,) or (override < 0).any():
            raise ConfigError(f"agent_thresholds must hold {N} nonnegative integers")
        std = kinds == engine.KIND_THRESHOLD
        thresh[std] = override[std]

    # wallets: one per collusion group, then one per remaining agent
    wallet = np.full(N, -1, dtype=np.int64)
    groups = [list(map(int, g)) for g in config.collusion_groups]
    if config.group_thresholds is not None and len(config.group_thresholds) != len(groups):
        raise ConfigError("need one group threshold per collusion group")
    for gi, members in enumerate(groups):
        if not members:
            raise ConfigError("empty collusion group")
        for a in members:
            if not 0 <= a < N:
                raise ConfigError(f"agent {a} out of range")
            if wallet[a] >= 0:
                raise ConfigError(f"agent {a} is in two collusion groups")
            wallet[a] = gi
        if len({int(agent_type[a]) for a in members}) != 1:
            raise ConfigError("colluding agents must share a type")
        if config.group_thresholds is not None:
            thresh[members] = np.where(kinds[members] == engine.KIND_THRESHOLD,
                                       int(config.group_thresholds[gi]), thresh[members])
        elif len(set(thresh[members].tolist())) != 1:
            raise ConfigError("colluding agents need a common threshold")
    loners = np.flatnonzero(wallet < 0)
    wallet[loners] = len(groups) + np.arange(loners.size)
    W = len(groups) + loners.size
    order = np.argsort(wallet, kind="stable")
    wallet_agents = order.astype(np.int64)
    wallet_ptr = np.zeros(W + 1, dtype=np.int64)
    np.cumsum(np.bincount(wallet, minlength=W), out=wallet_ptr[1:])
    wallet_type = agent_type[wallet_agents[wallet_ptr[:-1]]].astype(np.int64)

    # initial money
    total = spec.total_money
    if isinstance(config.initial, str):
        if config.initial != "uniform":
            raise ConfigError(f"unknown initial allocation {config.initial!r}")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, STREAM_ALLOCATION])))
        per_agent = rng.multinomial(total, np.full(N, 1.0 / N)) if N else np.zeros(0, int)
    else:
        per_agent = np.asarray(config.initial, dtype=np.int64)
        if per_agent.shape != (N,) or (per_agent < 0).any():
            raise ConfigError(f"initial allocation must hold {N} nonnegative integers")
        if int(per_agent.sum()) != total:
            raise ConfigError(f"initial allocation holds {int(per_agent.sum())} dollars, expected {total}")
    balance = np.bincount(wallet, weights=per_agent, minlength=W).astype(np.int64)

    # classes of interchangeable volunteers
    sybils = np.zeros(N, dtype=np.int64) if config.sybil_counts is None else np.asarray(config.sybil_counts, np.int64)
    if sybils.shape != (N,) or (sybils < 0).any():
        raise ConfigError(f"sybil_counts must hold {N} nonnegative integers")
    weight = spec.chi[agent_type] * (1 + sybils)
    keys: dict[tuple, int] = {}
    agent_class = np.empty(N, dtype=np.int64)
    for j in range(N):
        key = (int(agent_type[j]), int(kinds[j]), float(weight[j]))
        agent_class[j] = keys.setdefault(key, len(keys))
    C = len(keys)
    class_beta = np.empty(C)
    class_weight = np.empty(C)
    class_kind = np.empty(C, dtype=np.int64)
    for (t, kind, w), c in keys.items():
        class_beta[c] = spec.beta[t]
        class_weight[c] = w
        class_kind[c] = kind
    class_ptr = np.zeros(C + 1, dtype=np.int64)
    np.cumsum(np.bincount(agent_class, minlength=C), out=class_ptr[1:])

    counts = np.bincount(agent_type, minlength=T)
    req_weight = spec.rho * counts
    type_cum = np.cumsum(req_weight / req_weight.sum())
    type_ptr = np.zeros(T + 1, dtype=np.int64)
    np.cumsum(counts, out=type_ptr[1:])
    type_agents = np.arange(N, dtype=np.int64)

    disc = np.array([spec.discount(t) for t in range(T)])
    tail = int(config.rounds * (1.0 - config.tail_fraction))
    B = total + 1

    util_disc = np.zeros(N)
    util_sum = np.zeros(N)
    counters = np.zeros((T, engine.NUM_COUNTERS), dtype=np.int64)
    earned = np.zeros(T, dtype=np.int64)
    spent = np.zeros(T, dtype=np.int64)
    wl_acc = np.zeros(T)
    dist_acc = np.zeros((T, B))
    tail_gain = np.zeros(T)
    tail_cost = np.zeros(T)
    seed = int(config.seed) & 0xFFFFFFFFFFFFFFFF
    streams = [seed_stream(np.uint64(seed), np.uint64(s)) for s in (STREAM_REQUESTER, STREAM_ABILITY, STREAM_WINNER)]

    conserved = engine.run_kernel(
        int(config.rounds), tail, float(config.free_service_prob),
        agent_type, wallet, agent_class, kinds, thresh,
        wallet_ptr, wallet_agents, wallet_type, balance,
        class_beta, class_weight, class_kind, class_ptr,
        type_cum, type_ptr, type_agents,
        spec.gamma.copy(), spec.alpha.copy(), disc, 1.0 - spec.delta,
        *streams,
        util_disc, util_sum, counters, earned, spent, wl_acc, dist_acc, tail_gain, tail_cost,
    )
    tail_rounds = config.rounds - tail
    rows = []
    for t in range(T):
        row = dist_acc[t] / (max(tail_rounds, 1) * W)
        nz = np.flatnonzero(row)
        rows.append(row[: (nz[-1] + 1 if nz.size else 1)].copy())
    if not conserved:
        logger.error("money was not conserved")
    return SimResult(
        config=config,
        empirical_dist=WealthDistribution(tuple(rows)),
        utility_discounted=util_disc,
        utility_per_round=util_sum / config.rounds,
        counters=counters,
        earned=earned,
        spent=spent,
        willing_rounds=wl_acc,
        agents_per_type=counts,
        final_balance=balance,
        money_conserved=bool(conserved),
        tail_rounds=tail_rounds,
        tail_gain=tail_gain,
        tail_cost=tail_cost,
        agent_type=agent_type,
    )


@dataclass(frozen=True)
class UtilityCheck:
    measured: float
    stderr: float
    expected: float
    limit: float

    @property
    def z(self) -> float:
        return (self.measured - self.expected) / self.stderr if self.stderr > 0 else math.inf


def utility_check(result: SimResult, t: int, agents: Sequence[int] | None = None) -> UtilityCheck:
    """Compare normalized discounted utility of always-served agents with its closed form.

    An agent whose every request is served collects ``gamma`` with chance
    ``rho/(h n)`` per round, worth ``rho gamma (1 - delta) / (h n (1 - disc))``
    over an infinite horizon; ``expected`` accounts for the finite run.
    """
    spec = result.config.spec
    sel = np.flatnonzero(result.agent_type == t) if agents is None else np.asarray(agents)
    u = result.utility_discounted[sel]
    disc = spec.discount(t)
    limit = spec.rho[t] * spec.gamma[t] * (1.0 - spec.delta[t]) / (spec.total_agents * (1.0 - disc))
    expected = limit * (1.0 - disc ** result.config.rounds)
    stderr = float(u.std(ddof=1) / math.sqrt(u.size)) if u.size > 1 else math.nan
    return UtilityCheck(float(u.mean()), stderr, expected, limit)


def satisfaction_probe(result: SimResult, t: int) -> float:
    """Share of type-``t`` requests served among those some able agent was willing to take."""
    cand = result.counters[t, engine.CANDIDATE]
    return float(result.counters[t, engine.SATISFIED_CANDIDATE] / cand) if cand else 0.0


def distribution_csv_rows(result: SimResult) -> list[tuple[int, int, float]]:
    return result.empirical_dist.csv_rows()
