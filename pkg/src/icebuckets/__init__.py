"""Approximate per-flow counters: optimal estimation scales, ICE-Buckets
arrays, single-scale baselines, traces and error metrics."""

from .buckets import (
    IceBuckets, IceConfig, best_scale_split, choose_parameters, global_upscale_table,
    ice_max_error_bound, ice_new, ice_overall_error_bound,
)
from .errors import (
    CapacityError, ConfigError, DomainError, IceBucketsError, PolicyError,
    SymbolOverflowError, SymbolUnderflowError, TraceParseError, UndefinedMetricError,
)
from .estimators import (
    CEDAR, DISCO, FIXED, SingleScaleArray, apply_updates, decrement_symbol,
    disco_epsilon_for_capacity, increment_symbol, random_source, trial_seed,
)
from .metrics import ErrorReport, overall_relative_error, per_value_rmsre, progress_series
from .packed import PackedArray
from .scale import (
    BitBounds, EstimationScale, bits_required, capacity, delta_from_epsilon,
    epsilon_for_capacity, epsilon_from_chebyshev, epsilon_squared_bounds,
    estimation_value, step_size, upscale_error_lp, upscale_target_symbol,
)
from .traces import ExactOracle, FlowTrace, load_trace, shuffle_ids, write_trace, zipf_trace

__version__ = "0.1.0"
