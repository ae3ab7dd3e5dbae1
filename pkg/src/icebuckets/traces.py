"""Workloads: flow-event files, synthetic Zipf traces and exact counts.

File formats (UTF-8, gzip-compressed when the name ends in ``.gz``):

``flow_per_line``
    one flow key per line, one line per packet.
``flow_count_pairs``
    ``key,count`` per line, no header; expands to ``count`` packets of
    ``key`` in file order.

Keys are opaque strings and get dense ids in first-seen order.
"""

from dataclasses import dataclass, field
import gzip
import io

import numpy as np

from .errors import TraceParseError

FLOW_PER_LINE = "flow_per_line"
FLOW_COUNT_PAIRS = "flow_count_pairs"
FORMATS = (FLOW_PER_LINE, FLOW_COUNT_PAIRS)

# Trace generation and relabelling draw from their own child streams so a
# trace built from seed s never shares draws with counters run on seed s.
_ZIPF_STREAM = 1
_SHUFFLE_STREAM = 2


def _stream(seed, key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


@dataclass(frozen=True)
class FlowTrace:
    events: np.ndarray
    num_flows: int
    keys: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        events = np.ascontiguousarray(self.events, dtype=np.int64)
        if events.size and (events.min() < 0 or events.max() >= self.num_flows):
            raise ValueError("trace event outside [0, num_flows)")
        events.flags.writeable = False
        object.__setattr__(self, "events", events)

    @property
    def total_packets(self):
        return int(self.events.size)

    def __len__(self):
        return self.total_packets


def _open_text(path):
    path = str(path)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline=None)
    return open(path, encoding="utf-8", newline=None)


def load_trace(path, format=FLOW_PER_LINE):
    if format not in FORMATS:
        raise ValueError(f"unknown trace format {format!r}; expected one of {FORMATS}")
    ids = {}
    flows = []
    counts = []
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if format == FLOW_PER_LINE:
                key, count = line, 1
            else:
                key, sep, num = line.rpartition(",")
                if not sep:
                    raise TraceParseError(path, lineno, line, "expected 'key,count'")
                try:
                    count = int(num)
                except ValueError:
                    raise TraceParseError(path, lineno, line, "count is not an integer") from None
                if count < 0:
                    raise TraceParseError(path, lineno, line, "negative count")
            if not key:
                raise TraceParseError(path, lineno, line, "empty flow key")
            flows.append(ids.setdefault(key, len(ids)))
            counts.append(count)
    events = np.repeat(np.asarray(flows, dtype=np.int64), np.asarray(counts, dtype=np.int64))
    return FlowTrace(events, len(ids), keys=list(ids))


def write_trace(trace, path, format=FLOW_PER_LINE):
    """Write ``trace`` so that load_trace(path, format) gives the same events.

    Flows without keys are written as their decimal ids.
    """
    keys = trace.keys if trace.keys is not None else [str(i) for i in range(trace.num_flows)]
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8", newline="\n") as fh:
        if format == FLOW_PER_LINE:
            for f in trace.events.tolist():
                fh.write(keys[f])
                fh.write("\n")
        elif format == FLOW_COUNT_PAIRS:
            # run-length encode so the file order of packets survives
            ev = trace.events
            if ev.size:
                starts = np.flatnonzero(np.diff(ev)) + 1
                starts = np.concatenate(([0], starts))
                lengths = np.diff(np.append(starts, ev.size))
                for f, n in zip(ev[starts].tolist(), lengths.tolist()):
                    fh.write(f"{keys[f]},{n}\n")
        else:
            raise ValueError(f"unknown trace format {format!r}")


def zipf_trace(num_flows, packets, skew, seed):
    """i.i.d. packets with P(flow r-1) proportional to r**-skew, r = 1..N.

    Flow 0 is the most popular; use shuffle_ids to scatter heavy flows.
    """
    if num_flows < 1:
        raise ValueError(f"need at least one flow, got {num_flows}")
    if skew < 0:
        raise ValueError(f"skew must be >= 0, got {skew}")
    rng = _stream(seed, _ZIPF_STREAM)
    weights = np.arange(1, num_flows + 1, dtype=np.float64) ** -float(skew)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    events = np.searchsorted(cdf, rng.random(int(packets)), side="right")
    np.minimum(events, num_flows - 1, out=events)
    return FlowTrace(events, int(num_flows))


def uniform_trace(num_flows, packets, seed):
    return zipf_trace(num_flows, packets, 0.0, seed)


def shuffle_ids(trace, seed):
    """Relabel flows with a seeded random permutation."""
    rng = _stream(seed, _SHUFFLE_STREAM)
    perm = rng.permutation(trace.num_flows)
    keys = None
    if trace.keys is not None:
        keys = [None] * trace.num_flows
        for old, new in enumerate(perm.tolist()):
            keys[new] = trace.keys[old]
    return FlowTrace(perm[trace.events], trace.num_flows, keys=keys)


class ExactOracle:
    """True per-flow counts.  Quacks like a counter array so it can also
    stand in as the ``exact`` scheme."""

    def __init__(self, num_flows):
        self.counts = np.zeros(int(num_flows), dtype=np.int64)

    @property
    def num_flows(self):
        return self.counts.size

    @property
    def total(self):
        return int(self.counts.sum())

    def process(self, events, rng=None):
        events = np.asarray(events, dtype=np.int64)
        self.counts += np.bincount(events, minlength=self.counts.size)[: self.counts.size]

    def apply(self, trace):
        self.process(trace.events)
        return self

    def estimates(self):
        return self.counts.astype(np.float64)

    def estimate(self, flow):
        return float(self.counts[flow])


def oracle_apply(oracle, trace):
    return oracle.apply(trace)
