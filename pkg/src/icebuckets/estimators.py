"""Probabilistic symbol updates and the single-scale baseline arrays.

Randomness comes from numpy's ``Generator`` over ``PCG64``.  A given seed
yields the same ``random()`` stream on every platform, and the compiled
loops draw from the same generator object, so Python-level and bulk
updates consume identical sequences.
"""

import numpy as np

from . import _kernels
from .errors import ConfigError, DomainError, SymbolOverflowError, SymbolUnderflowError
from .packed import PackedArray
from .scale import EstimationScale, epsilon_for_capacity

CEDAR = "cedar"
DISCO = "disco"
FIXED = "fixed"
POLICIES = (CEDAR, DISCO, FIXED)


def random_source(seed):
    """The package-wide PRNG: PCG64 seeded with a non-negative integer."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def trial_seed(seed, trial):
    """Seed for one trial of an experiment: ``seed XOR trial``."""
    return int(seed) ^ int(trial)


def increment_symbol(scale, l, rng):
    """Advance ``l`` with probability ``1 / D(l)``; one uniform draw per call."""
    values = scale.values
    if l >= len(values) - 1:
        raise SymbolOverflowError(f"symbol {l} is the top symbol; upscale first")
    if rng.random() < 1.0 / (values[l + 1] - values[l]):
        return l + 1
    return l


def decrement_symbol(scale, l, rng):
    """Move ``l`` down with probability ``1 / D(l-1)``; one uniform draw per call."""
    values = scale.values
    if l <= 0:
        raise SymbolUnderflowError("cannot decrement symbol 0")
    if rng.random() < 1.0 / (values[l] - values[l - 1]):
        return l - 1
    return l


def apply_updates(scale, ops, rng, start=0):
    """Apply a sequence of +1 / -1 updates to one counter, return its symbol.

    Same semantics as repeated increment_symbol / decrement_symbol calls,
    run in compiled code.
    """
    ops = np.asarray(ops, dtype=np.int8)
    l, status = _kernels.apply_updates(scale.values, int(start), ops, rng)
    if status == 1:
        raise SymbolOverflowError(f"counter reached the top symbol {l}")
    if status == 2:
        raise SymbolUnderflowError("decrement on symbol 0")
    return int(l)


def disco_epsilon_for_capacity(M, L):
    """Error parameter at which the DISCO function reaches ``M`` at L-1."""
    if M <= L - 1:
        raise DomainError(f"need M > L-1, got M={M}, L={L}")
    return _kernels.epsilon_for_capacity(float(M), int(L), True)


def _log2_exact(x, name):
    if x < 2 or x & (x - 1):
        raise ConfigError(f"{name} must be a power of two >= 2, got {x}")
    return x.bit_length() - 1


class SingleScaleArray:
    """N counters sharing one estimation scale.

    Policies:

    ``cedar``
        optimal function starting at ``epsilon`` (default 0, exact counting).
        When a counter needs to pass the top symbol the whole array is
        upscaled to the epsilon that doubles the current capacity.
    ``disco``
        DISCO function configured once from ``max_count``; a counter at the
        top symbol saturates and the packet is tallied in ``saturated``.
    ``fixed``
        optimal function at a fixed ``epsilon`` (or the one reaching
        ``max_count``), saturating like ``disco``.
    """

    def __init__(self, num_flows, L, policy=CEDAR, epsilon=None, max_count=None):
        if policy not in POLICIES:
            raise ConfigError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        if num_flows < 1:
            raise ConfigError(f"need at least one flow, got {num_flows}")
        self.bits = _log2_exact(int(L), "L")
        self.num_flows = int(num_flows)
        self.L = int(L)
        self.policy = policy

        if epsilon is None:
            if max_count is None:
                if policy != CEDAR:
                    raise ConfigError(f"policy {policy!r} needs epsilon or max_count")
                epsilon = 0.0
            elif policy == DISCO:
                epsilon = _kernels.epsilon_for_capacity(float(max_count), self.L, True)
            else:
                epsilon = epsilon_for_capacity(max_count, self.L)
        self._eps = np.array([float(epsilon)])
        self._values = _kernels.scale_values(self._eps[0], self.L, policy == DISCO)
        self._symbols = PackedArray(self.num_flows, self.bits)
        self._stats = np.zeros(2, dtype=np.int64)

    @property
    def epsilon(self):
        return float(self._eps[0])

    @property
    def scale(self):
        return EstimationScale(self.epsilon, self.L, disco=self.policy == DISCO)

    @property
    def symbols(self):
        return self._symbols

    @property
    def upscale_count(self):
        return int(self._stats[0])

    @property
    def saturated(self):
        return int(self._stats[1])

    @property
    def memory_bits(self):
        return self._symbols.nbits

    def increment(self, flow, rng):
        self.process(np.array([flow], dtype=np.int64), rng)

    def process(self, events, rng):
        events = np.asarray(events, dtype=np.int64)
        if events.size and (events.min() < 0 or events.max() >= self.num_flows):
            raise IndexError(f"flow index outside [0, {self.num_flows})")
        policy = _kernels.POLICY_CEDAR if self.policy == CEDAR else _kernels.POLICY_SATURATE
        _kernels.single_process(
            self._symbols.words, self.bits, self._values, self._eps,
            self.num_flows, self.L, policy, events, rng, self._stats,
        )

    def estimate(self, flow):
        return float(self._values[self._symbols[flow]])

    def estimates(self):
        return self._values[self._symbols.to_numpy()]

    def __repr__(self):
        return (f"SingleScaleArray(num_flows={self.num_flows}, L={self.L}, "
                f"policy={self.policy!r}, epsilon={self.epsilon:.6g})")


def single_array_increment(arr, flow, rng):
    arr.increment(flow, rng)


def single_array_estimate(arr, flow):
    return arr.estimate(flow)


def required_symbols(epsilon, n, headroom=100.0):
    """Smallest power-of-two L whose capacity at ``epsilon`` is ``headroom * n``.

    Used to emulate an unbounded counter in experiments.
    """
    L = 2
    while _kernels.capacity(float(epsilon), L, False) < headroom * n:
        L *= 2
        if L > 2**30:
            raise DomainError(f"no practical L reaches {headroom * n} at epsilon={epsilon}")
    return L


def log2_int(x, name="value"):
    return _log2_exact(int(x), name)


__all__ = [
    "CEDAR", "DISCO", "FIXED", "POLICIES",
    "random_source", "trial_seed",
    "increment_symbol", "decrement_symbol", "apply_updates",
    "disco_epsilon_for_capacity",
    "SingleScaleArray", "single_array_increment", "single_array_estimate",
    "required_symbols", "log2_int",
]
