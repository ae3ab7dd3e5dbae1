"""Relative-error measurements.

All aggregates average squared relative errors before taking the root, so
a set of runs yields ``sqrt(mean over flows of MSRE[n_f])``.  Flows with a
true count of zero have no relative error and are left out.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedMetricError


@dataclass
class ErrorReport:
    overall: float
    per_value: dict = field(default_factory=dict)
    progress: list = field(default_factory=list)
    zero_flows: int = 0


def _squared_relative_errors(estimates, truths):
    estimates = np.asarray(estimates, dtype=np.float64)
    truths = np.asarray(truths)
    if estimates.shape[-1:] != truths.shape[-1:]:
        raise ValueError(f"shape mismatch: {estimates.shape} vs {truths.shape}")
    truths = np.broadcast_to(truths, estimates.shape)
    mask = truths > 0
    n = truths[mask].astype(np.float64)
    rel = (estimates[mask] - n) / n
    return rel * rel


def overall_relative_error(estimates, truths):
    """Root mean squared relative error over flows with a positive count.

    ``estimates`` may be ``(N,)`` or ``(R, N)`` for R runs over the same
    truths.
    """
    sq = _squared_relative_errors(estimates, truths)
    if sq.size == 0:
        raise UndefinedMetricError("no flow has a positive true count")
    return float(np.sqrt(sq.mean()))


def per_value_rmsre(runs):
    """Group flows by true count across runs.

    ``runs`` is an iterable of ``(estimates, truths)`` pairs.  Returns
    ``{n: (mean_estimate, rmsre, samples)}`` for every positive n seen.
    """
    sum_est = np.zeros(0)
    sum_sq = np.zeros(0)
    count = np.zeros(0, dtype=np.int64)
    for estimates, truths in runs:
        estimates = np.asarray(estimates, dtype=np.float64)
        truths = np.asarray(truths, dtype=np.int64)
        mask = truths > 0
        t = truths[mask]
        e = estimates[mask]
        if t.size == 0:
            continue
        size = max(int(t.max()) + 1, count.size)
        if size > count.size:
            sum_est = np.pad(sum_est, (0, size - sum_est.size))
            sum_sq = np.pad(sum_sq, (0, size - sum_sq.size))
            count = np.pad(count, (0, size - count.size))
        rel = (e - t) / t
        sum_est += np.bincount(t, weights=e, minlength=size)
        sum_sq += np.bincount(t, weights=rel * rel, minlength=size)
        count += np.bincount(t, minlength=size)
    out = {}
    for n in np.flatnonzero(count).tolist():
        c = int(count[n])
        out[n] = (float(sum_est[n] / c), float(np.sqrt(sum_sq[n] / c)), c)
    return out


def progress_series(trace, counter, checkpoints, rng):
    """Feed ``trace`` into ``counter`` and record the overall error at
    ``checkpoints`` evenly spaced packet counts.

    The first point is ``(0, 0.0)``: nothing counted, nothing wrong.
    Returns a list of ``(packets_processed, overall)``.
    """
    if checkpoints < 1:
        raise ValueError(f"need at least one checkpoint, got {checkpoints}")
    events = trace.events
    truth = np.zeros(trace.num_flows, dtype=np.int64)
    marks = np.unique(np.linspace(0, events.size, checkpoints + 1).round().astype(np.int64))
    series = [(0, 0.0)]
    for lo, hi in zip(marks[:-1], marks[1:]):
        chunk = events[lo:hi]
        counter.process(chunk, rng)
        truth += np.bincount(chunk, minlength=trace.num_flows)
        series.append((int(hi), overall_relative_error(counter.estimates(), truth)))
    return series
