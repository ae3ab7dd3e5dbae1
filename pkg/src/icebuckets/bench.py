"""Seeded multi-run error measurement of one counting scheme over a trace."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import os

import numpy as np

from .buckets import IceBuckets, IceConfig, best_scale_split, ice_overall_error_bound
from .errors import ConfigError
from .estimators import (
    CEDAR, DISCO, SingleScaleArray, disco_epsilon_for_capacity, random_source, trial_seed,
)
from .metrics import ErrorReport, per_value_rmsre, progress_series
from .scale import epsilon_for_capacity
from .traces import ExactOracle

ICE = "ice"
ICE_NO_GLOBAL = "ice_no_global"
EXACT = "exact"
SCHEMES = (ICE, ICE_NO_GLOBAL, CEDAR, DISCO, EXACT)


@dataclass(frozen=True)
class RunSpec:
    scheme: str
    bits_per_symbol: int = 8
    overhead_bits_per_counter: float = 0.5
    E: int = None
    S: int = None
    M: float = None
    seed: int = 0
    runs: int = 1
    checkpoints: int = 20

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not 1 <= self.bits_per_symbol <= 32:
            raise ConfigError("bits_per_symbol must be in [1, 32]")

    @property
    def L(self):
        return 1 << self.bits_per_symbol


@dataclass
class BenchResult:
    spec: RunSpec
    report: ErrorReport
    bound: float
    max_count: float
    ice_config: IceConfig = None
    upscales: dict = field(default_factory=dict)


def ice_config_for(spec, num_flows, M):
    """Explicit E and S when given, otherwise the bound-minimising choice for
    ``bits_per_symbol + overhead_bits_per_counter`` bits per counter."""
    L = spec.L
    if spec.E is not None and spec.S is not None:
        B = -(-num_flows // spec.S)
        step = epsilon_for_capacity(M, L) / (spec.E - 1)
        return IceConfig(L, spec.E, B, spec.S, step, ice_overall_error_bound(M, B, L, spec.E))
    if spec.E is not None or spec.S is not None:
        raise ConfigError("give both E and S, or neither for automatic choice")
    if not 0 < spec.overhead_bits_per_counter < 1:
        raise ConfigError("automatic ICE configuration needs 0 < overhead < 1 bit per counter")
    return best_scale_split(L, int(num_flows * spec.overhead_bits_per_counter), num_flows, M)


def make_counter(spec, num_flows, M, config=None):
    if spec.scheme == EXACT:
        return ExactOracle(num_flows)
    if spec.scheme == CEDAR:
        return SingleScaleArray(num_flows, spec.L, policy=CEDAR)
    if spec.scheme == DISCO:
        if M <= spec.L - 1:
            return SingleScaleArray(num_flows, spec.L, policy=DISCO, epsilon=0.0)
        return SingleScaleArray(num_flows, spec.L, policy=DISCO, max_count=M)
    config = config or ice_config_for(spec, num_flows, M)
    max_count = M if spec.scheme == ICE_NO_GLOBAL else None
    return IceBuckets(num_flows, config.L, config.E, config.S, max_count=max_count)


def analytic_bound(spec, num_flows, M, config=None):
    """The scheme's guaranteed overall relative error for counts up to M."""
    L = spec.L
    if spec.scheme == EXACT:
        return 0.0
    if spec.scheme == CEDAR:
        return epsilon_for_capacity(M, L)
    if spec.scheme == DISCO:
        return 0.0 if M <= L - 1 else disco_epsilon_for_capacity(M, L)
    config = config or ice_config_for(spec, num_flows, M)
    B = -(-num_flows // config.S)
    return ice_overall_error_bound(M, B, config.L, config.E)


def run_trial(spec, trace, trial, M, config=None):
    """One seeded run: returns (final estimates, progress series, upscale counts)."""
    rng = random_source(trial_seed(spec.seed, trial))
    counter = make_counter(spec, trace.num_flows, M, config)
    progress = progress_series(trace, counter, spec.checkpoints, rng)
    upscales = {}
    if isinstance(counter, IceBuckets):
        upscales = {"local": counter.local_upscales, "global": counter.global_upscales}
    elif isinstance(counter, SingleScaleArray):
        upscales = {"global": counter.upscale_count, "saturated": counter.saturated}
    return counter.estimates(), progress, upscales


_WORKER_TRACE = None


def _init_worker(trace):
    global _WORKER_TRACE
    _WORKER_TRACE = trace


def _worker_trial(args):
    spec, trial, M, config = args
    return run_trial(spec, _WORKER_TRACE, trial, M, config)


def run_bench(spec, trace, workers=1):
    """Run ``spec.runs`` trials; results are reduced in trial order, so the
    outcome does not depend on ``workers``."""
    if trace.total_packets == 0:
        raise ConfigError("trace has no packets")
    M = float(spec.M) if spec.M is not None else float(trace.total_packets)
    config = None
    if spec.scheme in (ICE, ICE_NO_GLOBAL):
        config = ice_config_for(spec, trace.num_flows, M)
    truths = np.bincount(trace.events, minlength=trace.num_flows)

    args = [(spec, t, M, config) for t in range(spec.runs)]
    if workers > 1 and spec.runs > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(trace,)) as pool:
            results = list(pool.map(_worker_trial, args))
    else:
        results = [run_trial(spec, trace, t, M, config) for t in range(spec.runs)]

    per_value = per_value_rmsre((est, truths) for est, _, _ in results)
    samples = sum(c for _, _, c in per_value.values())
    sq = sum(c * r * r for _, r, c in per_value.values())
    overall = float(np.sqrt(sq / samples))

    progress = []
    for k, (packets, _) in enumerate(results[0][1]):
        msre = np.mean([series[k][1] ** 2 for _, series, _ in results])
        progress.append((packets, float(np.sqrt(msre))))

    upscales = {}
    for _, _, counts in results:
        for key, value in counts.items():
            upscales[key] = upscales.get(key, 0) + value
    upscales = {k: v / spec.runs for k, v in upscales.items()}

    report = ErrorReport(overall, per_value, progress, int(np.count_nonzero(truths == 0)))
    bound = analytic_bound(spec, trace.num_flows, M, config)
    return BenchResult(spec, report, bound, M, config, upscales)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_overall_csv(results, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["scheme", "bits", "overall", "bound"])
        for res in results:
            w.writerow([res.spec.scheme, res.spec.bits_per_symbol,
                        repr(res.report.overall), repr(res.bound)])


def write_per_value_csv(report, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["true_value", "mean_est", "rmsre", "count"])
        for n in sorted(report.per_value):
            mean_est, rmsre, count = report.per_value[n]
            w.writerow([n, repr(mean_est), repr(rmsre), count])


def write_progress_csv(report, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["packets", "overall"])
        for packets, overall in report.progress:
            w.writerow([packets, repr(overall)])


def write_results(results, out_dir):
    """``overall.csv`` for all schemes plus ``<scheme>/per_value.csv`` and
    ``<scheme>/progress.csv`` for each."""
    os.makedirs(out_dir, exist_ok=True)
    write_overall_csv(results, os.path.join(out_dir, "overall.csv"))
    for res in results:
        sub = os.path.join(out_dir, res.spec.scheme)
        os.makedirs(sub, exist_ok=True)
        write_per_value_csv(res.report, os.path.join(sub, "per_value.csv"))
        write_progress_csv(res.report, os.path.join(sub, "progress.csv"))
