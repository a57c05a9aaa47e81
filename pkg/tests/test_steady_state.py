import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from hypothesis import assume, given, settings, strategies as st

from scripkit.errors import InfeasibleMoney
from scripkit.model import make_spec
from scripkit.steady_state import (expected_welfare, max_money, satisfier_weights, solve_lambda, steady_state,
                                   volunteer_mass, wealth_distribution)

from conftest import LOW_COST, one_type_game, two_type_game

# high-precision root of the mean-money equation at k=(20,13), m=4 (mpmath, 40 digits)
LAMBDA_20_13 = 0.831463818440239522


def test_lambda_matches_high_precision_root(game):
    lam = solve_lambda(game, (20, 13))
    assert lam == pytest.approx(LAMBDA_20_13, rel=1e-9)
    dist = wealth_distribution(game, (20, 13), lam)
    assert dist.mean() == pytest.approx(4.0, rel=1e-9)


def test_distribution_shape(game):
    dist = wealth_distribution(game, (20, 13), LAMBDA_20_13)
    np.testing.assert_allclose(dist.type_mass(), [0.3, 0.7])
    assert len(dist.rows[0]) == 21 and len(dist.rows[1]) == 14
    for row in dist.rows:
        np.testing.assert_allclose(row[1:] / row[:-1], LAMBDA_20_13)
    assert dist.zeta() == pytest.approx(dist.rows[0][0] + dist.rows[1][0])
    assert dist[0, 25] == 0.0


def test_omega_scales_the_ratio():
    spec = make_spec([(0.05, 0.5, 1, 0.95), (0.05, 1.0, 1, 0.95)], ["1/2", "1/2"], 2, 2, 50)
    lam = solve_lambda(spec, (6, 6))
    dist = wealth_distribution(spec, (6, 6), lam)
    assert dist.rows[0][1] / dist.rows[0][0] == pytest.approx(0.5 * lam)
    assert dist.rows[1][1] / dist.rows[1][0] == pytest.approx(lam)


def test_log_space_survives_large_thresholds():
    spec = one_type_game(m=2)
    lam = solve_lambda(spec, (5000,))
    row = wealth_distribution(spec, (5000,), lam).rows[0]
    assert np.isfinite(row).all() and row.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("m", [0, 20, 25])
def test_infeasible_money(m):
    spec = one_type_game(m=2)
    with pytest.raises(InfeasibleMoney):
        solve_lambda(spec, (20,), m)


def test_max_money(game):
    assert max_money(game, (20, 13)) == pytest.approx(0.3 * 20 + 0.7 * 13)


def test_satisfier_weights_sum_to_one(game):
    lam = solve_lambda(game, (20, 13))
    dist = wealth_distribution(game, (20, 13), lam)
    w = satisfier_weights(game, dist)
    assert w.sum() == pytest.approx(1.0)
    ups = volunteer_mass(game, dist)
    np.testing.assert_allclose(ups, [(0.3 - dist.rows[0][-1]) * 1000, (0.7 - dist.rows[1][-1]) * 1000])


def test_welfare_of_single_type_game():
    spec = one_type_game(m=2)
    ss = steady_state(spec, (27,))
    assert ss.welfare_per_round == pytest.approx((1 - ss.zeta) * (1 - 0.05))
    assert expected_welfare(spec, (0,), ss.dist) == 0.0


def _exact_marginal(agents: int, money: int, k: int) -> np.ndarray:
    """Stationary wealth marginal of the full chain on wealth vectors (one type, beta = 1)."""
    states = [s for s in itertools.product(range(k + 1), repeat=agents) if sum(s) == money]
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for s in states:
        a = index[s]
        for i in range(agents):
            volunteers = [j for j in range(agents) if j != i and s[j] < k] if s[i] else []
            if not volunteers:
                rows.append(a), cols.append(a), vals.append(1 / agents)
                continue
            for j in volunteers:
                nxt = list(s)
                nxt[i] -= 1
                nxt[j] += 1
                rows.append(a), cols.append(index[tuple(nxt)]), vals.append(1 / agents / len(volunteers))
    size = len(states)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    A = (P.T - sp.identity(size)).tolil()
    A[0, :] = 1.0
    b = np.zeros(size)
    b[0] = 1.0
    pi = sla.spsolve(A.tocsc(), b)
    d = np.zeros(k + 1)
    for s, p in zip(states, pi):
        for x in s:
            d[x] += p / agents
    return d


@pytest.mark.parametrize("k, money", [(1, 1), (1, 4), (1, 7), (2, 1), (2, 4), (2, 8), (2, 12), (2, 15)])
def test_matches_exact_finite_chain(k, money):
    agents = 8
    spec = make_spec([LOW_COST], [1], agents, Fraction(money, agents), 1)
    lam = solve_lambda(spec, (k,))
    mean_field = wealth_distribution(spec, (k,), lam).rows[0]
    exact = _exact_marginal(agents, money, k)
    assert np.abs(mean_field - exact).sum() <= 0.05


def test_finite_chain_gap_shrinks_with_population():
    gaps = []
    for agents in (4, 6, 8):
        spec = make_spec([LOW_COST], [1], agents, 1, 1)
        lam = solve_lambda(spec, (2,))
        gaps.append(np.abs(wealth_distribution(spec, (2,), lam).rows[0] - _exact_marginal(agents, agents, 2)).sum())
    assert gaps[0] > gaps[1] > gaps[2]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(0.05, 0.95), st.floats(0.2, 1.0))
def test_lambda_reproduces_the_mean(k1, k2, share, beta):
    spec = make_spec([(0.05, beta, 1, 0.95), LOW_COST], ["1/2", "1/2"], 2, 1, 50)
    top = 0.5 * (k1 + k2)
    m = share * top
    lam = solve_lambda(spec, (k1, k2), m)
    dist = wealth_distribution(spec, (k1, k2), lam)
    assert dist.mean() == pytest.approx(m, rel=1e-8)
    assert dist.type_mass().sum() == pytest.approx(1.0)
    assert (np.concatenate(dist.rows) >= 0).all()


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_lambda_increases_with_money(k, a, b):
    assume(abs(a - b) > 1e-6)
    spec = one_type_game()
    lo, hi = sorted((a, b))
    assert solve_lambda(spec, (k,), lo * k) < solve_lambda(spec, (k,), hi * k)
