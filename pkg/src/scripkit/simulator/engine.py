"""Round-by-round kernel of the scrip game.

Agents are grouped into classes of identical (type, behaviour, selection
weight).  Each class keeps an indexed set of its currently willing members,
so a round costs one binomial draw per class: the number of able willing
members, the class of the winner in proportion to ``weight * able``, and
then a uniform willing member of that class.
"""
import numpy as np
from numba import njit

from .rng import binomial, bounded, next_double

# counter columns
MADE, SATISFIED, UNSAT_MONEY, UNSAT_NO_VOLUNTEER, FREE, INTERNAL, CANDIDATE, SATISFIED_CANDIDATE = range(8)
NUM_COUNTERS = 8

KIND_THRESHOLD, KIND_ALTRUIST, KIND_HOARDER = 0, 1, 2


@njit(cache=True)
def _flush(cnt, last, acc, idx, now, tail):
    start = max(last[idx], tail)
    stop = max(now, tail)
    if stop > start:
        acc[idx] += cnt[idx] * (stop - start)
    last[idx] = now


@njit(cache=True)
def _flush2(cnt, last, acc, t, b, now, tail):
    start = max(last[t, b], tail)
    stop = max(now, tail)
    if stop > start:
        acc[t, b] += cnt[t, b] * (stop - start)
    last[t, b] = now


@njit(cache=True)
def _set_add(j, c, set_items, class_ptr, class_count, agent_pos):
    slot = class_count[c]
    set_items[class_ptr[c] + slot] = j
    agent_pos[j] = slot
    class_count[c] = slot + 1


@njit(cache=True)
def _set_remove(j, c, set_items, class_ptr, class_count, agent_pos):
    slot = agent_pos[j]
    last = class_count[c] - 1
    moved = set_items[class_ptr[c] + last]
    set_items[class_ptr[c] + slot] = moved
    agent_pos[moved] = slot
    agent_pos[j] = -1
    class_count[c] = last


@njit(cache=True)
def _refresh_wallet(w, now, tail, balance, wallet_ptr, wallet_agents, agent_type, agent_class, agent_kind,
                    agent_thresh, set_items, class_ptr, class_count, agent_pos, wl_cnt, wl_last, wl_acc):
    bal = balance[w]
    for idx in range(wallet_ptr[w], wallet_ptr[w + 1]):
        j = wallet_agents[idx]
        want = agent_kind[j] == KIND_ALTRUIST or bal < agent_thresh[j]
        have = agent_pos[j] >= 0
        if want != have:
            t = agent_type[j]
            _flush(wl_cnt, wl_last, wl_acc, t, now, tail)
            if want:
                _set_add(j, agent_class[j], set_items, class_ptr, class_count, agent_pos)
                wl_cnt[t] += 1
            else:
                _set_remove(j, agent_class[j], set_items, class_ptr, class_count, agent_pos)
                wl_cnt[t] -= 1


@njit(cache=True)
def run_kernel(rounds, tail, free_prob,
               agent_type, agent_wallet, agent_class, agent_kind, agent_thresh,
               wallet_ptr, wallet_agents, wallet_type, balance,
               class_beta, class_weight, class_kind, class_ptr,
               type_cum, type_ptr, type_agents,
               gamma, alpha, disc, one_minus_delta,
               rng_req, rng_able, rng_win,
               util_disc, util_sum, counters, earned, spent, wl_acc, dist_acc, tail_gain, tail_cost):
    """Simulate ``rounds`` rounds in place; returns ``True`` if money was conserved throughout."""
    N = agent_type.shape[0]
    W = balance.shape[0]
    C = class_beta.shape[0]
    T = gamma.shape[0]
    B = dist_acc.shape[1]

    total_money = 0
    for w in range(W):
        total_money += balance[w]

    # willing sets
    set_items = np.empty(N, dtype=np.int64)
    class_count = np.zeros(C, dtype=np.int64)
    agent_pos = np.full(N, -1, dtype=np.int64)
    wl_cnt = np.zeros(T, dtype=np.int64)
    wl_last = np.zeros(T, dtype=np.int64)
    for w in range(W):
        _refresh_wallet(w, 0, tail, balance, wallet_ptr, wallet_agents, agent_type, agent_class, agent_kind,
                        agent_thresh, set_items, class_ptr, class_count, agent_pos, wl_cnt, wl_last, wl_acc)

    # wealth histogram over wallets
    dist_cnt = np.zeros((T, B), dtype=np.int64)
    dist_last = np.zeros((T, B), dtype=np.int64)
    for w in range(W):
        dist_cnt[wallet_type[w], balance[w]] += 1

    dpow = np.ones(T)
    excl = np.zeros(C, dtype=np.int64)
    able = np.zeros(C, dtype=np.int64)
    conserved = True

    for r in range(rounds):
        now = r + 1
        measure = r >= tail

        # requester
        u = next_double(rng_req)
        t = 0
        while t < T - 1 and u >= type_cum[t]:
            t += 1
        cnt_t = type_ptr[t + 1] - type_ptr[t]
        i = type_agents[type_ptr[t] + bounded(rng_req, cnt_t)]
        if measure:
            counters[t, MADE] += 1

        if free_prob > 0.0 and next_double(rng_req) < free_prob:
            util_disc[i] += one_minus_delta[t] * dpow[t] * gamma[t]
            util_sum[i] += gamma[t]
            if measure:
                counters[t, SATISFIED] += 1
                counters[t, FREE] += 1
                tail_gain[t] += gamma[t]
        else:
            wq = agent_wallet[i]
            can_pay = balance[wq] >= 1
            gsize = wallet_ptr[wq + 1] - wallet_ptr[wq]
            served = False

            # colluders below their shared threshold first ask each other
            if gsize > 1 and balance[wq] < agent_thresh[i]:
                beta_t = class_beta[agent_class[i]]
                helpers = binomial(rng_able, gsize - 1, beta_t)
                if helpers > 0:
                    pick = bounded(rng_win, gsize - 1)
                    seen = 0
                    j = -1
                    for idx in range(wallet_ptr[wq], wallet_ptr[wq + 1]):
                        a = wallet_agents[idx]
                        if a == i:
                            continue
                        if seen == pick:
                            j = a
                            break
                        seen += 1
                    tj = agent_type[j]
                    util_disc[i] += one_minus_delta[t] * dpow[t] * gamma[t]
                    util_sum[i] += gamma[t]
                    util_disc[j] -= one_minus_delta[tj] * dpow[tj] * alpha[tj]
                    util_sum[j] -= alpha[tj]
                    if measure:
                        counters[t, SATISFIED] += 1
                        counters[t, INTERNAL] += 1
                        tail_gain[t] += gamma[t]
                        tail_cost[tj] += alpha[tj]
                    served = True

            if not served:
                for idx in range(wallet_ptr[wq], wallet_ptr[wq + 1]):
                    a = wallet_agents[idx]
                    if agent_pos[a] >= 0:
                        excl[agent_class[a]] += 1
                candidate = False
                total = 0.0
                for c in range(C):
                    nc = class_count[c] - excl[c]
                    excl[c] = 0
                    able[c] = binomial(rng_able, nc, class_beta[c]) if nc > 0 else 0
                    if able[c] > 0:
                        candidate = True
                        if can_pay or class_kind[c] == KIND_ALTRUIST:
                            total += class_weight[c] * able[c]
                if measure and candidate:
                    counters[t, CANDIDATE] += 1

                if total <= 0.0:
                    if measure:
                        if can_pay:
                            counters[t, UNSAT_NO_VOLUNTEER] += 1
                        else:
                            counters[t, UNSAT_MONEY] += 1
                else:
                    x = next_double(rng_win) * total
                    c = 0
                    chosen = -1
                    for c2 in range(C):
                        if able[c2] > 0 and (can_pay or class_kind[c2] == KIND_ALTRUIST):
                            chosen = c2
                            x -= class_weight[c2] * able[c2]
                            if x < 0.0:
                                break
                    c = chosen
                    while True:
                        j = set_items[class_ptr[c] + bounded(rng_win, class_count[c])]
                        if agent_wallet[j] != wq:
                            break
                    tj = agent_type[j]
                    util_disc[i] += one_minus_delta[t] * dpow[t] * gamma[t]
                    util_sum[i] += gamma[t]
                    util_disc[j] -= one_minus_delta[tj] * dpow[tj] * alpha[tj]
                    util_sum[j] -= alpha[tj]
                    if measure:
                        counters[t, SATISFIED] += 1
                        tail_gain[t] += gamma[t]
                        tail_cost[tj] += alpha[tj]
                        if candidate:
                            counters[t, SATISFIED_CANDIDATE] += 1
                    if can_pay:
                        wj = agent_wallet[j]
                        for side in range(2):
                            w = wq if side == 0 else wj
                            delta = -1 if side == 0 else 1
                            tw = wallet_type[w]
                            b_old = balance[w]
                            _flush2(dist_cnt, dist_last, dist_acc, tw, b_old, now, tail)
                            _flush2(dist_cnt, dist_last, dist_acc, tw, b_old + delta, now, tail)
                            dist_cnt[tw, b_old] -= 1
                            dist_cnt[tw, b_old + delta] += 1
                            balance[w] = b_old + delta
                            _refresh_wallet(w, now, tail, balance, wallet_ptr, wallet_agents, agent_type,
                                            agent_class, agent_kind, agent_thresh, set_items, class_ptr,
                                            class_count, agent_pos, wl_cnt, wl_last, wl_acc)
                        if measure:
                            earned[tj] += 1
                            spent[t] += 1
                for c in range(C):
                    able[c] = 0

        for tt in range(T):
            dpow[tt] *= disc[tt]

        if (r & 4095) == 4095:
            s = 0
            for w in range(W):
                if balance[w] < 0:
                    conserved = False
                s += balance[w]
            if s != total_money:
                conserved = False

    for tt in range(T):
        _flush(wl_cnt, wl_last, wl_acc, tt, rounds, tail)
        for b in range(B):
            _flush2(dist_cnt, dist_last, dist_acc, tt, b, rounds, tail)
    s = 0
    for w in range(W):
        if balance[w] < 0:
            conserved = False
        s += balance[w]
    return conserved and s == total_money
