import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scripkit.errors import BadParameter, ConfigError, NonIntegralMoney, NonIntegralPopulation
from scripkit.model import (ALTRUIST, HOARDER, AgentType, Behavior, GameSpec, as_fraction, fixed, load_spec,
                            make_spec, spec_from_json, validate_spec)

from conftest import HIGH_COST, LOW_COST, two_type_game


def test_as_fraction_reads_decimals_exactly():
    assert as_fraction(0.3) == Fraction(3, 10)
    assert as_fraction("7/10") == Fraction(7, 10)
    assert as_fraction(4) == 4
    with pytest.raises(ConfigError):
        as_fraction("abc")
    with pytest.raises(ConfigError):
        as_fraction(True)


def test_basic_properties(game):
    assert game.total_agents == 1000
    assert game.total_money == 4000
    assert game.counts == (3, 7)
    np.testing.assert_allclose(game.omega, [1.0, 1.0])
    assert game.discount(0) == pytest.approx(1 - 0.05 / 1000)


def test_replicas_basis_divides_by_n_only():
    spec = make_spec([LOW_COST], [1], 10, 2, 100, discount_basis="replicas")
    assert spec.discount(0) == pytest.approx(1 - 0.05 / 100)


def test_rho_is_normalized():
    spec = make_spec([(0.05, 1, 1, 0.95, 2.0, 1.0), (0.15, 1, 1, 0.95, 1.0, 1.0)], ["1/2", "1/2"], 2, 1, 10)
    assert float(np.dot(spec.rho, spec.f)) == pytest.approx(1.0, abs=1e-15)
    assert spec.rho[0] == pytest.approx(2 * spec.rho[1])


def test_validate_is_idempotent(game):
    assert validate_spec(game) is game


@pytest.mark.parametrize("bad", [
    dict(alpha=0.0), dict(alpha=1.0), dict(beta=0.0), dict(beta=1.5),
    dict(delta=1.0), dict(delta=0.0), dict(rho=0.0), dict(chi=-1.0),
])
def test_bad_type_parameters(bad):
    kw = dict(alpha=0.05, beta=1.0, gamma=1.0, delta=0.95)
    kw.update(bad)
    with pytest.raises(BadParameter):
        make_spec([AgentType(**kw)], [1], 1, 1, 10)


def test_fraction_errors():
    with pytest.raises(BadParameter):
        make_spec([LOW_COST, HIGH_COST], ["1/2", "1/3"], 6, 1, 10)
    with pytest.raises(NonIntegralPopulation):
        make_spec([LOW_COST, HIGH_COST], ["3/10", "7/10"], 5, 1, 10)
    with pytest.raises(NonIntegralMoney):
        make_spec([LOW_COST], [1], 10, "1/20", 10)


def test_config_error_exit_codes():
    assert ConfigError.exit_code == 2
    assert issubclass(NonIntegralMoney, ConfigError)


def test_rescale_base_keeps_the_economy(game):
    big = game.rescale_base(5)
    assert big.h == 50 and big.n == 20
    assert big.total_agents == game.total_agents
    assert big.fractions == game.fractions and big.m == game.m
    assert big.discount(0) == game.discount(0)


def test_rescale_base_replicas_basis_moves_delta():
    spec = make_spec([LOW_COST], [1], 1, 2, 7, discount_basis="replicas")
    big = spec.rescale_base(2)
    assert big.n == 7 and big.h == 2
    assert big.types[0].delta == pytest.approx(1 - 0.05 / 2)


def test_integral_for():
    spec = two_type_game()
    grown = spec.integral_for([Fraction(41, 4)])
    assert (Fraction(41, 4) * grown.h).denominator == 1
    grown.with_m(Fraction(41, 4))
    with pytest.raises(NonIntegralMoney):
        spec.with_m(Fraction(41, 40))


def test_fixed_thresholds():
    spec = make_spec([AgentType(0.05, 1, 1, 0.95, behavior=fixed(7)), AgentType(0.05, 1, 1, 0.95, behavior=HOARDER),
                      AgentType(0.05, 1, 1, 0.95, behavior=ALTRUIST), AgentType(*LOW_COST)],
                     ["1/4"] * 4, 4, 1, 10, k_hoard=99)
    assert [spec.fixed_threshold(t) for t in range(4)] == [7, 99, 99, None]
    assert spec.standard_mask.tolist() == [False, False, False, True]


def test_behavior_json_round_trip():
    for b in (Behavior("standard"), HOARDER, ALTRUIST, fixed(3)):
        assert Behavior.from_json(json.loads(json.dumps(b.to_json()))) == b
    with pytest.raises(ConfigError):
        Behavior.from_json("saint")


def test_json_round_trip(tmp_path, game):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(game.to_json()))
    again = load_spec(path)
    assert again.fractions == game.fractions and again.m == game.m
    assert again.types == game.types


def test_json_missing_and_unknown_fields():
    doc = two_type_game().to_json()
    del doc["h"]
    with pytest.raises(ConfigError):
        spec_from_json(doc)
    doc = two_type_game().to_json()
    doc["types"][0]["colour"] = "red"
    with pytest.raises(ConfigError):
        spec_from_json(doc)
    doc = two_type_game().to_json()
    doc["n"] = 10.5
    with pytest.raises(ConfigError):
        spec_from_json(doc)


@given(st.lists(st.integers(1, 20), min_size=1, max_size=4), st.integers(1, 5), st.integers(0, 30))
def test_validated_fractions_sum_to_one(weights, n, m):
    total = sum(weights)
    spec = validate_spec(GameSpec(tuple(AgentType(*LOW_COST) for _ in weights),
                                  tuple(Fraction(w, total) for w in weights), total, m, n))
    assert sum(spec.fractions) == 1
    assert sum(spec.counts) == spec.h
    assert spec.total_money == m * total * n
