"""ICE-Buckets: counters grouped into buckets, each bucket on its own scale.

Flow ``f`` lives in bucket ``f // S`` at slot ``f % S``.  Bucket ``i``
decodes its symbols with the optimal function at error ``w[i] * eps_step``;
scale 0 is exact counting.  When an increment finds a symbol at ``L - 1``
the bucket moves one scale up (local upscale).  A bucket already on the top
scale ``E - 1`` triggers a global upscale instead: ``eps_step`` doubles,
odd-indexed buckets take one local step, and every index halves.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .errors import CapacityError, ConfigError, PolicyError
from .estimators import log2_int
from .packed import PackedArray
from .scale import EstimationScale, epsilon_for_capacity


class IceBuckets:
    """Bucketed counter array.

    ``max_count=None`` builds the dynamic variant: the initial step is the
    epsilon that doubles the exact range, ``eps(2(L-1))``, and global upscale
    is enabled.  Passing ``max_count=M`` fixes ``eps_step = eps(M) / (E-1)``
    so that local upscales alone reach capacity ``M``; global upscale is then
    disabled and a packet that would need one raises CapacityError.
    """

    def __init__(self, num_flows, L, E, S, max_count=None):
        if num_flows < 1:
            raise ConfigError(f"need at least one flow, got {num_flows}")
        if S < 1:
            raise ConfigError(f"bucket size must be >= 1, got {S}")
        self.bits = log2_int(L, "L")
        self.scale_bits = log2_int(E, "E")
        self.num_flows = int(num_flows)
        self.L = int(L)
        self.E = int(E)
        self.S = int(S)
        self.num_buckets = -(-self.num_flows // self.S)
        self.max_count = max_count

        if max_count is None:
            step = epsilon_for_capacity(2 * (self.L - 1), self.L)
            self.global_upscale_enabled = True
        else:
            step = epsilon_for_capacity(max_count, self.L) / (self.E - 1)
            self.global_upscale_enabled = False
        self._step = np.array([float(step)])
        self._tables = _kernels.build_tables(self._step[0], self.E, self.L)
        self._symbols = PackedArray(self.num_flows, self.bits)
        self._scales = PackedArray(self.num_buckets, self.scale_bits)
        self._stats = np.zeros(2, dtype=np.int64)

    @classmethod
    def from_config(cls, config, num_flows, max_count=None):
        return cls(num_flows, config.L, config.E, config.S, max_count=max_count)

    # -- state -------------------------------------------------------------

    @property
    def eps_step(self):
        return float(self._step[0])

    @property
    def eps_max(self):
        return (self.E - 1) * self.eps_step

    @property
    def symbols(self):
        """Packed symbol array, flat in flow order (row-major B x S)."""
        return self._symbols

    @property
    def scale_indices(self):
        """Packed per-bucket scale indices ``w``."""
        return self._scales

    @property
    def local_upscales(self):
        return int(self._stats[0])

    @property
    def global_upscales(self):
        return int(self._stats[1])

    @property
    def memory_bits(self):
        return self._symbols.nbits + self._scales.nbits

    def bucket_of(self, flow):
        return flow // self.S

    def epsilon_of(self, bucket):
        return self._scales[bucket] * self.eps_step

    def scale_of(self, bucket):
        return EstimationScale(self.epsilon_of(bucket), self.L)

    # -- updates -----------------------------------------------------------

    def increment(self, flow, rng):
        self.process(np.array([flow], dtype=np.int64), rng)

    def process(self, events, rng):
        events = np.asarray(events, dtype=np.int64)
        if events.size and (events.min() < 0 or events.max() >= self.num_flows):
            raise IndexError(f"flow index outside [0, {self.num_flows})")
        stuck = _kernels.ice_process(
            self._symbols.words, self.bits, self._scales.words, self.scale_bits,
            self._tables, self._step, self.S, self.num_flows, self.num_buckets,
            self.E, self.L, self.global_upscale_enabled, events, rng, self._stats,
        )
        if stuck >= 0:
            flow = int(events[stuck])
            raise CapacityError(
                f"flow {flow} (bucket {flow // self.S}) is full on the top scale "
                f"and global upscale is disabled; {stuck} packets of this batch were counted"
            )

    def local_upscale(self, bucket, rng):
        if not 0 <= bucket < self.num_buckets:
            raise IndexError(f"bucket {bucket} out of range")
        if self._scales[bucket] >= self.E - 1:
            raise PolicyError(f"bucket {bucket} is on the top scale; a global upscale is needed")
        _kernels.ice_local_upscale(
            self._symbols.words, self.bits, self._scales.words, self.scale_bits,
            self._tables, self.eps_step, self.S, self.num_flows, bucket, rng,
        )
        self._stats[0] += 1

    def global_upscale(self, rng):
        if not self.global_upscale_enabled:
            raise PolicyError("global upscale is disabled for a fixed-capacity array")
        _kernels.ice_global_upscale(
            self._symbols.words, self.bits, self._scales.words, self.scale_bits,
            self._tables, self._step, self.S, self.num_flows, self.num_buckets,
            self.E, self.L, rng,
        )
        self._stats[1] += 1

    # -- queries -----------------------------------------------------------

    def estimate(self, flow):
        if not 0 <= flow < self.num_flows:
            raise IndexError(f"flow {flow} out of range")
        return float(self._tables[self._scales[flow // self.S], self._symbols[flow]])

    def estimates(self):
        w = self._scales.to_numpy()
        bucket = np.arange(self.num_flows) // self.S
        return self._tables[w[bucket], self._symbols.to_numpy()]

    def set_state(self, symbols=None, scales=None):
        """Overwrite symbols and/or scale indices (tests and checkpoints)."""
        if symbols is not None:
            symbols = np.asarray(symbols, dtype=np.int64)
            if symbols.size and symbols.max() > self.L - 1:
                raise ValueError("symbol out of range")
            self._symbols.fill_from(symbols)
        if scales is not None:
            scales = np.asarray(scales, dtype=np.int64)
            if scales.size and scales.max() > self.E - 1:
                raise ValueError("scale index out of range")
            self._scales.fill_from(scales)

    def __repr__(self):
        mode = "dynamic" if self.max_count is None else f"fixed_max({self.max_count})"
        return (f"IceBuckets(num_flows={self.num_flows}, L={self.L}, E={self.E}, "
                f"S={self.S}, {mode}, eps_step={self.eps_step:.6g})")


def ice_new(num_flows, L, E, S, max_count=None):
    return IceBuckets(num_flows, L, E, S, max_count=max_count)


# -- analytic bounds ---------------------------------------------------------


def ice_max_error_bound(M, L):
    """Worst-case relative error of any counter: eps(M)."""
    return epsilon_for_capacity(M, L)


def ice_overall_error_bound(M, B, L, E):
    """Bound on the overall relative error of a B-bucket array with E scales."""
    if B < 1:
        raise ConfigError(f"need at least one bucket, got {B}")
    if E < 2:
        raise ConfigError(f"need at least two scales, got {E}")
    return epsilon_for_capacity(M / B + L - 1, L) + epsilon_for_capacity(M, L) / (E - 1)


@dataclass(frozen=True)
class IceConfig:
    L: int
    E: int
    B: int
    S: int
    eps_step: float
    predicted_bound: float

    @property
    def bits_per_symbol(self):
        return self.L.bit_length() - 1

    @property
    def scale_bits(self):
        return self.E.bit_length() - 1


def choose_parameters(T, N, M):
    """Split ``T`` bits across ``N`` counters to minimise the overall bound.

    Every counter gets ``floor(T/N)`` symbol bits (no more than exact
    counting of ``M`` needs); what is left pays for scale indices.
    """
    T = int(T)
    N = int(N)
    if N < 1 or T < N:
        raise ConfigError(f"need T >= N >= 1 bits, got T={T}, N={N}")
    log_l = T // N
    if M > 0:
        log_l = min(log_l, max(1, math.ceil(math.log2(M + 1))))
    return best_scale_split(1 << log_l, T - N * log_l, N, M)


def best_scale_split(L, overhead_bits, N, M):
    """Spend ``overhead_bits`` on scale indices: try every integral
    ``log2 E`` and keep the smallest bound, ties going to the smaller E.
    With no overhead bits the whole array is one bucket."""
    max_log_e = max(1, math.floor(math.log2(M))) if M >= 2 else 1
    if overhead_bits > 0:
        max_log_e = min(max_log_e, overhead_bits)
    eps_m = epsilon_for_capacity(M, L)
    best = None
    for log_e in range(1, max_log_e + 1):
        E = 1 << log_e
        B = max(1, overhead_bits // log_e)
        bound = ice_overall_error_bound(M, B, L, E)
        if best is None or bound < best.predicted_bound:
            best = IceConfig(L, E, B, -(-N // B), eps_m / (E - 1), bound)
    return best


def global_upscale_table(E, eps_step):
    """Rows (old_w, old_eps, new_w, new_eps, needs_upscale) describing how a
    global upscale moves every scale index, followed by the new indices no
    old index maps to (old fields None)."""
    log2_int(E, "E")
    rows = []
    for w in range(E):
        new_w = (w + 1) // 2
        rows.append((w, w * eps_step, new_w, new_w * 2 * eps_step, w % 2 == 1))
    for new_w in range(E // 2 + 1, E):
        rows.append((None, None, new_w, new_w * 2 * eps_step, None))
    return rows
