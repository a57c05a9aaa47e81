"""Seeded xoshiro256** streams and an exact binomial sampler, compiled with numba.

Each decision site of the simulator owns its own stream, derived from the
run seed and a stream id through splitmix64.
"""
import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_FIVE = np.uint64(5)
_NINE = np.uint64(9)
_SEVEN = np.uint64(7)
_TO_DOUBLE = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True)
def _splitmix(x):
    x = x + _GOLDEN
    z = x
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def seed_stream(seed, stream):
    """State of stream ``stream`` for run seed ``seed``."""
    s = np.empty(4, dtype=np.uint64)
    x = np.uint64(seed) ^ (np.uint64(stream) * _MIX2)
    for i in range(4):
        x, s[i] = _splitmix(x)
    if s[0] == 0 and s[1] == 0 and s[2] == 0 and s[3] == 0:
        s[0] = np.uint64(1)
    return s


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * _FIVE, 7) * _NINE
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def next_double(s):
    """Uniform on [0, 1) with 53 random bits."""
    return float(next_u64(s) >> np.uint64(11)) * _TO_DOUBLE


@njit(cache=True)
def bounded(s, n):
    """Uniform integer in ``[0, n)`` without modulo bias."""
    un = np.uint64(n)
    limit = np.uint64(0xFFFFFFFFFFFFFFFF) - (np.uint64(0xFFFFFFFFFFFFFFFF) % un)
    while True:
        x = next_u64(s)
        if x < limit:
            return np.int64(x % un)


@njit(cache=True)
def _binomial_inversion(s, n, p):
    q = 1.0 - p
    qn = math.exp(n * math.log(q))
    np_ = n * p
    bound = min(float(n), np_ + 10.0 * math.sqrt(np_ * q + 1.0))
    x = 0
    px = qn
    u = next_double(s)
    while u > px:
        x += 1
        if x > bound:
            x = 0
            px = qn
            u = next_double(s)
        else:
            u -= px
            px = ((n - x + 1) * p * px) / (x * q)
    return x


@njit(cache=True)
def _stirling_tail(v):
    v2 = v * v
    return (13680.0 - (462.0 - (132.0 - (99.0 - 140.0 / v2) / v2) / v2) / v2) / v / 166320.0


@njit(cache=True)
def _binomial_btpe(s, n, p):
    """Kachitvichyanukul-Schmeiser BTPE for ``p <= 1/2`` and large ``n p``."""
    r = p
    q = 1.0 - r
    fm = n * r + r
    m = int(math.floor(fm))
    p1 = math.floor(2.195 * math.sqrt(n * r * q) - 4.6 * q) + 0.5
    xm = m + 0.5
    xl = xm - p1
    xr = xm + p1
    c = 0.134 + 20.5 / (15.3 + m)
    a = (fm - xl) / (fm - xl * r)
    laml = a * (1.0 + a / 2.0)
    a = (xr - fm) / (xr * q)
    lamr = a * (1.0 + a / 2.0)
    p2 = p1 * (1.0 + 2.0 * c)
    p3 = p2 + c / laml
    p4 = p3 + c / lamr
    nrq = n * r * q
    while True:
        u = next_double(s) * p4
        v = next_double(s)
        if u <= p1:
            # triangular centre: accept outright
            return int(math.floor(xm - p1 * v + u))
        if u <= p2:
            x = xl + (u - p1) / c
            v = v * c + 1.0 - abs(m - x + 0.5) / p1
            if v > 1.0:
                continue
            y = int(math.floor(x))
        elif u <= p3:
            if v == 0.0:
                continue
            y = int(math.floor(xl + math.log(v) / laml))
            if y < 0:
                continue
            v = v * (u - p2) * laml
        else:
            if v == 0.0:
                continue
            y = int(math.floor(xr - math.log(v) / lamr))
            if y > n:
                continue
            v = v * (u - p3) * lamr

        k = abs(y - m)
        if k <= 20 or k >= nrq / 2.0 - 1.0:
            # explicit ratio of probabilities
            ss = r / q
            aa = ss * (n + 1)
            f = 1.0
            if m < y:
                for i in range(m + 1, y + 1):
                    f *= aa / i - ss
            elif m > y:
                for i in range(y + 1, m + 1):
                    f /= aa / i - ss
            if v <= f:
                return y
            continue

        rho = (k / nrq) * ((k * (k / 3.0 + 0.625) + 0.16666666666666666) / nrq + 0.5)
        t = -k * k / (2.0 * nrq)
        A = math.log(v)
        if A < t - rho:
            return y
        if A > t + rho:
            continue
        x1 = y + 1.0
        f1 = m + 1.0
        z = n + 1.0 - m
        w = n - y + 1.0
        bound = (xm * math.log(f1 / x1) + (n - m + 0.5) * math.log(z / w)
                 + (y - m) * math.log(w * r / (x1 * q))
                 + _stirling_tail(f1) + _stirling_tail(z) + _stirling_tail(x1) + _stirling_tail(w))
        if A <= bound:
            return y


@njit(cache=True)
def binomial(s, n, p):
    """Exact Binomial(n, p) draw."""
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    flip = p > 0.5
    r = 1.0 - p if flip else p
    if n * r <= 30.0:
        y = _binomial_inversion(s, n, r)
    else:
        y = _binomial_btpe(s, n, r)
    return n - y if flip else y


@njit(cache=True)
def fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = next_u64(s)


@njit(cache=True)
def fill_binomial(s, n, p, out):
    for i in range(out.shape[0]):
        out[i] = binomial(s, n, p)
