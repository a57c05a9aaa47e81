"""Domain types for scrip economies: agent types, games, and wealth distributions.

A game is a population of agent types with exact rational fractions, a base
population size ``h``, an average amount of money ``m`` per agent and a replica
count ``n``.  :func:`validate_spec` checks integrality, range constraints and
normalizes request rates so that ``sum(rho_t * f_t) == 1``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .errors import BadParameter, ConfigError, NonIntegralMoney, NonIntegralPopulation

logger = logging.getLogger(__name__)

K_HOARD = 5000
DISCOUNT_BASES = ("agents", "replicas")

Profile = tuple[int, ...]
Number = Union[int, float, str, Fraction]


@dataclass(frozen=True)
class Behavior:
    """How agents of a type decide to volunteer.

    ``kind`` is one of ``standard``, ``altruist``, ``hoarder`` or ``fixed``;
    ``fixed`` carries its threshold in ``k``.
    """

    kind: str = "standard"
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("standard", "altruist", "hoarder", "fixed"):
            raise BadParameter(f"unknown behavior {self.kind!r}")
        if self.kind == "fixed":
            if self.k is None or int(self.k) != self.k or self.k < 0:
                raise BadParameter("fixed behavior needs a nonnegative integer threshold")
        elif self.k is not None:
            raise BadParameter(f"{self.kind} behavior takes no threshold")

    @property
    def is_standard(self) -> bool:
        return self.kind == "standard"

    def to_json(self) -> Any:
        if self.kind == "fixed":
            return {"fixed": self.k}
        return self.kind

    @classmethod
    def from_json(cls, raw: Any) -> "Behavior":
        if isinstance(raw, str):
            return cls(raw)
        if isinstance(raw, dict) and set(raw) == {"fixed"}:
            return cls("fixed", int(raw["fixed"]))
        raise ConfigError(f"cannot parse behavior {raw!r}")


STANDARD = Behavior("standard")
ALTRUIST = Behavior("altruist")
HOARDER = Behavior("hoarder")


def fixed(k: int) -> Behavior:
    return Behavior("fixed", k)


@dataclass(frozen=True)
class AgentType:
    alpha: float
    beta: float
    gamma: float
    delta: float
    rho: float = 1.0
    chi: float = 1.0
    behavior: Behavior = STANDARD

    @property
    def omega(self) -> float:
        return self.beta * self.chi / self.rho

    def check(self) -> None:
        # beta == 1 is allowed: the worked examples use always-able agents.
        if not 0.0 < self.beta <= 1.0:
            raise BadParameter(f"beta must lie in (0, 1], got {self.beta}")
        if not 0.0 < self.delta < 1.0:
            raise BadParameter(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.alpha < self.gamma:
            raise BadParameter(f"need 0 < alpha < gamma, got alpha={self.alpha}, gamma={self.gamma}")
        if not self.rho > 0.0 or not math.isfinite(self.rho):
            raise BadParameter(f"rho must be positive, got {self.rho}")
        if not self.chi > 0.0 or not math.isfinite(self.chi):
            raise BadParameter(f"chi must be positive, got {self.chi}")
        if not math.isfinite(self.omega) or self.omega <= 0.0:
            raise BadParameter("omega = beta*chi/rho must be finite and positive")

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
            "delta": self.delta, "rho": self.rho, "chi": self.chi,
            "behavior": self.behavior.to_json(),
        }


def as_fraction(value: Number) -> Fraction:
    """Parse ``"p/q"`` strings and decimal numbers as exact rationals."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError("booleans are not numbers")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(f"non-finite number {value}")
        # repr gives the shortest decimal, so 0.3 becomes 3/10 rather than a binary artefact
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse {value!r} as a rational") from exc


@dataclass(frozen=True)
class GameSpec:
    """A game ``(T, f, h, m, n)`` as written in a config file."""

    types: tuple[AgentType, ...]
    fractions: tuple[Fraction, ...]
    h: int
    m: Fraction
    n: int
    k_hoard: int = K_HOARD
    discount_basis: str = "agents"

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "fractions", tuple(as_fraction(f) for f in self.fractions))
        object.__setattr__(self, "m", as_fraction(self.m))

    @property
    def num_types(self) -> int:
        return len(self.types)

    def with_m(self, m: Number) -> "GameSpec":
        return replace(self, m=as_fraction(m))

    def to_json(self) -> dict:
        return {
            "types": [dict(t.to_json(), fraction=str(f)) for t, f in zip(self.types, self.fractions)],
            "h": self.h,
            "m": str(self.m),
            "n": self.n,
            "k_hoard": self.k_hoard,
            "discount_basis": self.discount_basis,
        }


@dataclass(frozen=True)
class ValidatedSpec(GameSpec):
    """A game that passed :func:`validate_spec`; request rates are normalized."""

    @cached_property
    def f(self) -> np.ndarray:
        return np.array([float(x) for x in self.fractions])

    def _column(self, name: str) -> np.ndarray:
        return np.array([getattr(t, name) for t in self.types], dtype=float)

    @cached_property
    def alpha(self) -> np.ndarray:
        return self._column("alpha")

    @cached_property
    def beta(self) -> np.ndarray:
        return self._column("beta")

    @cached_property
    def gamma(self) -> np.ndarray:
        return self._column("gamma")

    @cached_property
    def delta(self) -> np.ndarray:
        return self._column("delta")

    @cached_property
    def rho(self) -> np.ndarray:
        return self._column("rho")

    @cached_property
    def chi(self) -> np.ndarray:
        return self._column("chi")

    @cached_property
    def omega(self) -> np.ndarray:
        return self.beta * self.chi / self.rho

    @property
    def total_agents(self) -> int:
        return self.h * self.n

    @property
    def total_money(self) -> int:
        return int(self.m * self.h * self.n)

    @cached_property
    def counts(self) -> tuple[int, ...]:
        """Agents of each type in the base population of size ``h``."""
        return tuple(int(f * self.h) for f in self.fractions)

    @cached_property
    def standard_mask(self) -> np.ndarray:
        return np.array([t.behavior.is_standard for t in self.types])

    def discount(self, t: int) -> float:
        """Per-round discount factor of type ``t``.

        With the ``agents`` basis one round is ``1/(h n)`` of the time in which
        an agent makes ``rho`` requests; the ``replicas`` basis divides by ``n``
        only.
        """
        scale = self.total_agents if self.discount_basis == "agents" else self.n
        return 1.0 - (1.0 - self.types[t].delta) / scale

    def fixed_threshold(self, t: int) -> int | None:
        """Threshold of a non-strategic type, ``None`` for standard types."""
        b = self.types[t].behavior
        if b.kind == "fixed":
            return int(b.k)
        if b.kind in ("hoarder", "altruist"):
            return self.k_hoard
        return None

    def with_m(self, m: Number) -> "ValidatedSpec":
        m = as_fraction(m)
        _check_money(m, self.h)
        return replace(self, m=m)

    def rescale_base(self, factor: int) -> "ValidatedSpec":
        """Copy with base population ``h * factor`` describing the same economy.

        Fractions and average money are unchanged.  When ``factor`` divides
        ``n`` the replica count shrinks so the total population stays put;
        otherwise the population grows by ``factor``.  Under the ``replicas``
        discount basis ``delta`` moves so that the per-round discount keeps
        its meaning; the ``agents`` basis needs no adjustment.
        """
        if factor < 1 or int(factor) != factor:
            raise BadParameter("rescale factor must be a positive integer")
        factor = int(factor)
        if factor == 1:
            return self
        types, n = self.types, self.n
        if n % factor == 0:
            n //= factor
        if self.discount_basis == "replicas":
            types = tuple(replace(t, delta=1.0 - (1.0 - t.delta) / factor) for t in types)
        return replace(self, types=types, h=self.h * factor, n=n)

    def integral_for(self, values: Iterable[Number]) -> "ValidatedSpec":
        """Smallest rescaling under which every ``m`` in ``values`` gives integral ``m h``."""
        factor = 1
        for v in values:
            factor = math.lcm(factor, (as_fraction(v) * self.h).denominator)
        return self.rescale_base(factor)


def _check_money(m: Fraction, h: int) -> None:
    if m < 0:
        raise BadParameter(f"average money must be nonnegative, got {m}")
    if (m * h).denominator != 1:
        raise NonIntegralMoney(f"m*h = {m * h} is not an integer (m={m}, h={h})")


def validate_spec(spec: GameSpec) -> ValidatedSpec:
    """Check a game and normalize request rates so that ``sum(rho_t f_t) = 1``."""
    if isinstance(spec, ValidatedSpec):
        return spec
    if not spec.types:
        raise BadParameter("a game needs at least one type")
    if len(spec.types) != len(spec.fractions):
        raise BadParameter("types and fractions differ in length")
    if int(spec.h) != spec.h or spec.h < 1:
        raise BadParameter(f"h must be a positive integer, got {spec.h}")
    if int(spec.n) != spec.n or spec.n < 1:
        raise BadParameter(f"n must be a positive integer, got {spec.n}")
    if spec.discount_basis not in DISCOUNT_BASES:
        raise BadParameter(f"discount_basis must be one of {DISCOUNT_BASES}")
    if int(spec.k_hoard) != spec.k_hoard or spec.k_hoard < 1:
        raise BadParameter("k_hoard must be a positive integer")
    for t in spec.types:
        t.check()
    for f in spec.fractions:
        if f < 0:
            raise BadParameter(f"fractions must be nonnegative, got {f}")
    if sum(spec.fractions) != 1:
        raise BadParameter(f"fractions sum to {sum(spec.fractions)}, not 1")
    for i, f in enumerate(spec.fractions):
        if (f * spec.h).denominator != 1:
            raise NonIntegralPopulation(f"type {i}: f*h = {f * spec.h} is not an integer")
    _check_money(spec.m, spec.h)

    scale = math.fsum(t.rho * float(f) for t, f in zip(spec.types, spec.fractions))
    types = spec.types
    if abs(scale - 1.0) > 1e-15:
        types = tuple(replace(t, rho=t.rho / scale) for t in spec.types)
    return ValidatedSpec(
        types=types,
        fractions=spec.fractions,
        h=int(spec.h),
        m=spec.m,
        n=int(spec.n),
        k_hoard=int(spec.k_hoard),
        discount_basis=spec.discount_basis,
    )


def make_spec(types: Sequence[AgentType | Sequence[float]], fractions: Iterable[Number],
              h: int, m: Number, n: int, **kw) -> ValidatedSpec:
    """Build and validate a game; plain tuples are read as ``(alpha, beta, gamma, delta, rho, chi)``."""
    parsed = tuple(t if isinstance(t, AgentType) else AgentType(*t) for t in types)
    return validate_spec(GameSpec(parsed, tuple(fractions), h, as_fraction(m), n, **kw))


# ---------------------------------------------------------------- JSON config

def spec_from_json(doc: dict) -> GameSpec:
    try:
        types, fractions = [], []
        for raw in doc["types"]:
            raw = dict(raw)
            fractions.append(as_fraction(raw.pop("fraction")))
            behavior = Behavior.from_json(raw.pop("behavior", "standard"))
            unknown = set(raw) - {"alpha", "beta", "gamma", "delta", "rho", "chi"}
            if unknown:
                raise ConfigError(f"unknown type fields {sorted(unknown)}")
            types.append(AgentType(
                alpha=float(raw["alpha"]), beta=float(raw["beta"]), gamma=float(raw["gamma"]),
                delta=float(raw["delta"]), rho=float(raw.get("rho", 1.0)),
                chi=float(raw.get("chi", 1.0)), behavior=behavior,
            ))
        return GameSpec(
            types=tuple(types),
            fractions=tuple(fractions),
            h=_as_int(doc["h"], "h"),
            m=as_fraction(doc["m"]),
            n=_as_int(doc["n"], "n"),
            k_hoard=_as_int(doc.get("k_hoard", K_HOARD), "k_hoard"),
            discount_basis=doc.get("discount_basis", "agents"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _as_int(value: Any, name: str) -> int:
    as_float = float(value)
    if as_float != int(as_float):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(as_float)


def load_spec(path: str | Path) -> ValidatedSpec:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return validate_spec(spec_from_json(doc))


# ------------------------------------------------------- wealth distributions

@dataclass(frozen=True)
class WealthDistribution:
    """``rows[t][i]`` is the fraction of all agents that are of type ``t`` and hold ``i`` dollars."""

    rows: tuple[np.ndarray, ...]
    lam: float | None = field(default=None, compare=False)

    @property
    def num_types(self) -> int:
        return len(self.rows)

    def __getitem__(self, key: tuple[int, int]) -> float:
        t, i = key
        row = self.rows[t]
        return float(row[i]) if 0 <= i < len(row) else 0.0

    def type_mass(self) -> np.ndarray:
        return np.array([row.sum() for row in self.rows])

    def mean(self) -> float:
        return float(sum(np.dot(np.arange(len(row)), row) for row in self.rows))

    def zeta(self) -> float:
        return float(sum(row[0] for row in self.rows))

    def marginal(self) -> np.ndarray:
        """Fraction of agents holding ``i`` dollars, summed over types."""
        out = np.zeros(max(len(row) for row in self.rows))
        for row in self.rows:
            out[: len(row)] += row
        return out

    def csv_rows(self) -> list[tuple[int, int, float]]:
        return [(t, i, float(x)) for t, row in enumerate(self.rows) for i, x in enumerate(row)]
