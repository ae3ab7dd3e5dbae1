"""Compiled inner loops.

Everything here is nopython numba code operating on plain numpy arrays.
Symbols and scale indices live in flat ``uint64`` word arrays, packed at a
fixed bit width per field; fields may straddle a word boundary.  The public
classes in ``scale``, ``estimators`` and ``buckets`` wrap these functions.
"""

import math

import numpy as np
from numba import njit

MAX_FIELD_BITS = 32

# largest double strictly below 1.0; promotion probabilities are half-open
_BELOW_ONE = 1.0 - 2.0**-53

# single-scale policies
POLICY_CEDAR = 0
POLICY_SATURATE = 1


@njit(cache=True)
def packed_get(words, width, i):
    bit = np.uint64(i) * np.uint64(width)
    k = np.int64(bit >> np.uint64(6))
    off = bit & np.uint64(63)
    mask = (np.uint64(1) << np.uint64(width)) - np.uint64(1)
    v = words[k] >> off
    if off + np.uint64(width) > np.uint64(64):
        v |= words[k + 1] << (np.uint64(64) - off)
    return np.int64(v & mask)


@njit(cache=True)
def packed_set(words, width, i, value):
    bit = np.uint64(i) * np.uint64(width)
    k = np.int64(bit >> np.uint64(6))
    off = bit & np.uint64(63)
    mask = (np.uint64(1) << np.uint64(width)) - np.uint64(1)
    v = np.uint64(value) & mask
    words[k] = (words[k] & ~(mask << off)) | (v << off)
    if off + np.uint64(width) > np.uint64(64):
        shift = np.uint64(64) - off
        words[k + 1] = (words[k + 1] & ~(mask >> shift)) | (v >> shift)


@njit(cache=True)
def packed_unpack(words, width, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = packed_get(words, width, i)
    return out


@njit(cache=True)
def packed_fill(words, width, values):
    for i in range(values.shape[0]):
        packed_set(words, width, i, values[i])


@njit(cache=True)
def scale_values(eps, L, disco):
    """Estimation values A(0..L-1) built by the one-step recursion."""
    v = np.empty(L, dtype=np.float64)
    if eps == 0.0:
        for l in range(L):
            v[l] = l
        return v
    growth = 1.0 + 2.0 * eps * eps
    add = 1.0 if disco else 1.0 + eps * eps
    v[0] = 0.0
    for l in range(L - 1):
        v[l + 1] = growth * v[l] + add
    return v


@njit(cache=True)
def build_tables(step, E, L):
    tables = np.empty((E, L), dtype=np.float64)
    for w in range(E):
        tables[w, :] = scale_values(w * step, L, False)
    return tables


@njit(cache=True)
def capacity(eps, L, disco):
    if eps == 0.0:
        return float(L - 1)
    x = 2.0 * eps * eps
    t = (L - 1) * math.log1p(x)
    if t > 709.0:
        return np.inf
    c = math.expm1(t) / x
    if not disco:
        c *= 1.0 + eps * eps
    return c


@njit(cache=True)
def epsilon_for_capacity(M, L, disco):
    """Smallest double eps with capacity(eps) >= M, by bisection to 1 ulp."""
    if M <= L - 1:
        return 0.0
    if not M < np.inf:
        return np.inf
    hi = 1.0
    while capacity(hi, L, disco) < M:
        hi *= 2.0
    while capacity(hi * 0.5, L, disco) >= M:
        hi *= 0.5
    lo = hi * 0.5
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if capacity(mid, L, disco) < M:
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def target_symbol(a, to_values, eps_to):
    """Bracket ``a`` in ``to_values``: (l', promote probability).

    Returns (-1, 0.0) when ``a`` exceeds the target capacity.
    """
    L = to_values.shape[0]
    if not a <= to_values[L - 1]:
        return -1, 0.0
    if eps_to == 0.0:
        g = np.floor(a)
    else:
        x = 2.0 * eps_to * eps_to
        g = np.floor(math.log1p(x * a / (1.0 + eps_to * eps_to)) / math.log1p(x))
    if g < 0.0:
        g = 0.0
    if g > L - 1:
        g = L - 1
    lp = np.int64(g)
    # the closed form is exact in reals only; settle on the true bracket
    while lp + 1 < L and to_values[lp + 1] <= a:
        lp += 1
    while lp > 0 and to_values[lp] > a:
        lp -= 1
    if lp == L - 1:
        return lp, 0.0
    lo = to_values[lp]
    p = (a - lo) / (to_values[lp + 1] - lo)
    if p > _BELOW_ONE:
        p = _BELOW_ONE
    return lp, p


@njit(cache=True)
def remap_symbol(a, to_values, eps_to, r):
    lp, p = target_symbol(a, to_values, eps_to)
    if lp < 0:
        return -1
    if r < p:
        return lp + 1
    return lp


@njit(cache=True)
def apply_updates(values, start, ops, rng):
    """Run +1/-1 updates on a single counter.

    Returns (final symbol, status) where status is 0 on success, 1 if an
    increment hit the top symbol and 2 if a decrement hit symbol 0.
    """
    L = values.shape[0]
    l = start
    for k in range(ops.shape[0]):
        if ops[k] > 0:
            if l >= L - 1:
                return l, 1
            if rng.random() < 1.0 / (values[l + 1] - values[l]):
                l += 1
        else:
            if l <= 0:
                return l, 2
            if rng.random() < 1.0 / (values[l] - values[l - 1]):
                l -= 1
    return l, 0


# ---------------------------------------------------------------------------
# single-scale arrays (CEDAR-style upscaling, or saturating fixed scale)


@njit(cache=True)
def cedar_upscale(sym, bits, values, eps, N, L, rng):
    new_eps = epsilon_for_capacity(2.0 * capacity(eps[0], L, False), L, False)
    new_values = scale_values(new_eps, L, False)
    for f in range(N):
        l = packed_get(sym, bits, f)
        nl = remap_symbol(values[l], new_values, new_eps, rng.random())
        packed_set(sym, bits, f, nl)
    values[:] = new_values
    eps[0] = new_eps


@njit(cache=True)
def single_process(sym, bits, values, eps, N, L, policy, events, rng, stats):
    """stats[0] counts global upscales, stats[1] saturated packets."""
    for k in range(events.shape[0]):
        f = events[k]
        l = packed_get(sym, bits, f)
        if l == L - 1:
            if policy != POLICY_CEDAR:
                stats[1] += 1
                continue
            while l == L - 1:
                cedar_upscale(sym, bits, values, eps, N, L, rng)
                stats[0] += 1
                l = packed_get(sym, bits, f)
        if rng.random() < 1.0 / (values[l + 1] - values[l]):
            packed_set(sym, bits, f, l + 1)


# ---------------------------------------------------------------------------
# ICE-Buckets


@njit(cache=True)
def ice_local_upscale(sym, bits, wwords, wbits, tables, step, S, N, i, rng):
    w = packed_get(wwords, wbits, i)
    to_values = tables[w + 1]
    eps_to = (w + 1) * step
    for f in range(i * S, min(i * S + S, N)):
        l = packed_get(sym, bits, f)
        nl = remap_symbol(tables[w, l], to_values, eps_to, rng.random())
        packed_set(sym, bits, f, nl)
    packed_set(wwords, wbits, i, w + 1)


@njit(cache=True)
def ice_global_upscale(sym, bits, wwords, wbits, tables, step, S, N, B, E, L, rng):
    """Double the step; odd buckets move one scale up, then every index halves.

    An odd index w lands on (w+1)/2 under the doubled step, which is the same
    error as w+1 under the old one, so the remap goes straight to the new
    table and never needs an index of E.
    """
    new_step = 2.0 * step[0]
    new_tables = build_tables(new_step, E, L)
    for u in range(B):
        w = packed_get(wwords, wbits, u)
        if w % 2 == 1:
            nw = (w + 1) // 2
            to_values = new_tables[nw]
            eps_to = nw * new_step
            for f in range(u * S, min(u * S + S, N)):
                l = packed_get(sym, bits, f)
                nl = remap_symbol(tables[w, l], to_values, eps_to, rng.random())
                packed_set(sym, bits, f, nl)
        else:
            nw = w // 2
        packed_set(wwords, wbits, u, nw)
    tables[:, :] = new_tables
    step[0] = new_step


@njit(cache=True)
def ice_process(sym, bits, wwords, wbits, tables, step, S, N, B, E, L,
                global_enabled, events, rng, stats):
    """Count ``events``; returns the index of the first packet that could not
    be counted (top scale full with global upscale disabled), or -1.

    stats[0] counts local upscales, stats[1] global upscales.
    """
    for k in range(events.shape[0]):
        f = events[k]
        i = f // S
        l = packed_get(sym, bits, f)
        while l == L - 1:
            w = packed_get(wwords, wbits, i)
            if w < E - 1:
                ice_local_upscale(sym, bits, wwords, wbits, tables, step[0], S, N, i, rng)
                stats[0] += 1
            elif global_enabled:
                ice_global_upscale(sym, bits, wwords, wbits, tables, step, S, N, B, E, L, rng)
                stats[1] += 1
            else:
                return k
            l = packed_get(sym, bits, f)
        w = packed_get(wwords, wbits, i)
        if rng.random() < 1.0 / (tables[w, l + 1] - tables[w, l]):
            packed_set(sym, bits, f, l + 1)
    return -1
