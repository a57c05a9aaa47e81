from fractions import Fraction

import pytest

from scripkit.equilibrium import (best_reply_profile, critical_money, greatest_equilibrium, initial_profile,
                                  parse_grid, sweep_header, sweep_rows, welfare_sweep)
from scripkit.errors import BadBracket, ConfigError
from scripkit.model import AgentType, fixed, make_spec

from conftest import LOW_COST, two_type_game


def test_two_type_equilibrium(game):
    rep = greatest_equilibrium(game)
    assert rep.profile == (20, 13)
    assert not rep.crashed
    assert best_reply_profile(game, rep.profile) == rep.profile
    assert rep.trace[0] == initial_profile(game, 1024)
    # best replies only move down from the top
    for a, b in zip(rep.trace, rep.trace[1:]):
        assert all(x >= y for x, y in zip(a, b))
    assert rep.welfare == pytest.approx(0.7224845869, rel=1e-8)


def test_report_json(game):
    doc = greatest_equilibrium(game).to_json(game.n)
    assert doc["profile"] == [20, 13]
    assert doc["welfare_per_unit_time"] == pytest.approx(doc["welfare"] * 100)
    assert doc["iterations"] == len(doc["trace"])


def test_greatest_dominates_equilibria_found_from_below(game):
    top = greatest_equilibrium(game).profile
    for start in [(5, 5), (12, 9), (20, 13)]:
        low = greatest_equilibrium(game, start=start).profile
        assert all(a <= b for a, b in zip(low, top))


def test_fixed_types_keep_their_threshold():
    spec = make_spec([AgentType(*LOW_COST), AgentType(*LOW_COST, behavior=fixed(3))], ["1/2", "1/2"], 2, 1, 100)
    rep = greatest_equilibrium(spec)
    assert rep.profile[1] == 3
    assert rep.profile[0] > 0


def test_infeasible_profile_answers_trivially(game):
    assert best_reply_profile(game, (1, 1)) == (0, 0)


def test_crashed_at_high_money():
    rep = greatest_equilibrium(two_type_game(m=8))
    assert rep.crashed and rep.welfare == 0.0 and rep.profile == (0, 0)


def test_critical_money_regression():
    # frozen from a bisection run on the quarter-dollar grid
    lo, hi = critical_money(two_type_game(), 1, 10, Fraction(1, 4))
    assert (lo, hi) == (Fraction(13, 2), Fraction(27, 4))
    assert not greatest_equilibrium(two_type_game().integral_for([lo]).with_m(lo)).crashed


def test_critical_money_brackets():
    with pytest.raises(BadBracket):
        critical_money(two_type_game(), 8, 10, Fraction(1, 2))
    with pytest.raises(BadBracket):
        critical_money(two_type_game(), 1, 2, Fraction(1, 2))
    with pytest.raises(BadBracket):
        critical_money(two_type_game(), 1, 2, Fraction(1, 3) * 2)


def test_parse_grid():
    assert parse_grid("1:0.5:2") == [1, Fraction(3, 2), 2]
    assert parse_grid("1/4:1/4:3/4") == [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]
    for bad in ("1:2", "1:0:2", "2:1:1", "a:b:c"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_sweep_parallel_and_warm_start_agree():
    spec = two_type_game()
    grid = [Fraction(x, 2) for x in range(2, 16, 3)]
    cold = welfare_sweep(spec, grid)
    key = lambda reps: [(r.m, r.profile, repr(r.lam), r.welfare, r.crashed) for r in reps]
    assert key(welfare_sweep(spec, grid, jobs=2)) == key(cold)
    assert [r.profile for r in welfare_sweep(spec, grid, warm_start=True)] == [r.profile for r in cold]
    assert [r.m for r in cold] == grid


def test_sweep_rows():
    reps = welfare_sweep(two_type_game(), [2, 4])
    assert sweep_header(2) == ["m", "k_0", "k_1", "lambda", "zeta", "welfare", "crashed"]
    rows = sweep_rows(reps)
    assert rows[1][:3] == [4, 20, 13] and rows[1][-1] == 0
