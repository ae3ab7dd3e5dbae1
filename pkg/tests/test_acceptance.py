"""Acceptance suite.  Each test prints one PASS/FAIL line, then asserts.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
The deterministic checks take milliseconds; the Monte Carlo ones about a
minute in total.
"""

import math
import sys

import numpy as np
import pytest

from icebuckets import (
    EstimationScale, IceBuckets, apply_updates, bits_required, choose_parameters,
    epsilon_for_capacity, global_upscale_table, ice_overall_error_bound, random_source,
    shuffle_ids, upscale_error_lp, upscale_target_symbol, zipf_trace,
)
from icebuckets.bench import RunSpec, run_bench
from icebuckets.estimators import FIXED, SingleScaleArray, required_symbols

R = 10_000


@pytest.fixture
def verdict(capsys):
    def emit(index, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{index:2d}] {title}: {detail}")
        assert ok, detail
    return emit


# -- deterministic -----------------------------------------------------------


def test_capacity_error_values(verdict):
    cases = [(2**32 - 1, 4096, 4.51), (26_750_712, 256, 16.93), (26_750_712, 4096, 3.70)]
    parts, ok = [], True
    for M, L, expected in cases:
        got = 100 * epsilon_for_capacity(M, L)
        good = abs(got - expected) <= 0.005
        ok &= good
        parts.append(f"eps({M}, {L}) = {got:.4f}% vs {expected}% {'ok' if good else 'OFF'}")
    verdict(1, "single-scale error at capacity (+-0.005pp)", ok, "; ".join(parts))


def test_overall_bound_values(verdict):
    # (trace, N, M, L, S, E, expected %)
    cases = [
        ("NZ09 12-bit", 32_737_760, 2**32 - 1, 4096, 12, 64, 0.94),
        ("CHI08 8-bit", 1_420_318, 26_750_712, 256, 10, 32, 5.02),
        ("CHI08 12-bit", 1_420_318, 26_750_712, 4096, 14, 128, 0.42),
    ]
    parts, ok = [], True
    for name, N, M, L, S, E, expected in cases:
        got = 100 * ice_overall_error_bound(M, -(-N // S), L, E)
        good = abs(got - expected) <= 0.01
        ok &= good
        parts.append(f"{name} {got:.4f}% vs {expected}% {'ok' if good else 'OFF'}")
    verdict(2, "bucketed overall error bound (+-0.01pp)", ok, "; ".join(parts))


def test_memory_bound(verdict):
    b = bits_required(2**32, 2**-5)
    ok = b.bits == 13 and b.upper_bits - b.lower_bits <= 2 and b.lower_bits <= b.bits <= b.upper_bits
    verdict(3, "bits for M=2^32 at eps=2^-5", ok,
            f"bits={b.bits} (L={b.exact_L:.1f}), bounds [{b.lower_bits}, {b.upper_bits}]")


def test_global_upscale_table(verdict):
    # old w, old eps %, new w, new eps %, requires upscale
    expected = [
        (0, 0.0, 0, 0.0, False), (1, 0.1, 1, 0.2, True), (2, 0.2, 1, 0.2, False),
        (3, 0.3, 2, 0.4, True), (4, 0.4, 2, 0.4, False), (5, 0.5, 3, 0.6, True),
        (6, 0.6, 3, 0.6, False), (7, 0.7, 4, 0.8, True),
        (None, None, 5, 1.0, None), (None, None, 6, 1.2, None), (None, None, 7, 1.4, None),
    ]
    got = []
    for old_w, old_eps, new_w, new_eps, odd in global_upscale_table(8, 0.001):
        got.append((old_w, None if old_eps is None else round(100 * old_eps, 10),
                    new_w, round(100 * new_eps, 10), odd))
    ok = got == expected
    verdict(4, "global upscale mapping E=8", ok,
            "new w " + ",".join(str(r[2]) for r in got[:8]) + f"; {len(got)} rows")


def test_parameter_choice(verdict):
    N = 32_737_760
    cfg = choose_parameters(int(12.5 * N), N, 2**32 - 1)
    ok = cfg.E == 2**6 and cfg.L == 4096
    verdict(5, "parameter choice at 12.5 bits/counter", ok,
            f"L={cfg.L} E={cfg.E} B={cfg.B} S={cfg.S} bound={100 * cfg.predicted_bound:.4f}%")


def test_upscale_lp_grid(verdict):
    parts, ok = [], True
    for L in (256, 4096):
        for eps in (1e-3, 1e-2, 1e-1):
            ratio = upscale_error_lp(eps, 2 * eps, L) / (2 * eps) ** 2
            ok &= abs(ratio - 1) <= 0.01
            parts.append(f"L={L} eps={eps:g}: {ratio:.6f}")
    verdict(6, "upscale LP objective / eps'^2 within 1%", ok, "; ".join(parts))


# -- statistical ---------------------------------------------------------------


def test_rmsre_equals_epsilon(verdict):
    parts, ok = [], True
    for eps in (0.01, 0.05, 0.25):
        for n in (100, 10_000):
            arr = SingleScaleArray(R, required_symbols(eps, n), policy=FIXED, epsilon=eps)
            rng = random_source(1)
            block = np.tile(np.arange(R), 100)
            for _ in range(n // 100):
                arr.process(block, rng)
            est = arr.estimates()
            rmsre = math.sqrt(np.mean((est / n - 1) ** 2))
            bias = abs(est.mean() - n)
            good = abs(rmsre / eps - 1) <= 0.05 and bias <= 4 * eps * n / math.sqrt(R) and arr.saturated == 0
            ok &= good
            parts.append(f"eps={eps} n={n}: rmsre/eps={rmsre / eps:.4f} bias={bias:.3g}")
    verdict(7, "single-scale RMSRE = eps", ok, "; ".join(parts))


def test_decrement_unbiased(verdict):
    parts, ok = [], True
    mix = np.array([1] * 2000 + [-1] * 1000, dtype=np.int8)
    for eps in (0.02, 0.1):
        scale = EstimationScale(eps, required_symbols(eps, 3000))
        order = random_source(5)
        rng = random_source(6)
        est = np.empty(R)
        for r in range(R):
            ops = np.concatenate([np.ones(1000, dtype=np.int8), order.permutation(mix)])
            est[r] = scale.values[apply_updates(scale, ops, rng)]
        truth = 2000
        bias = est.mean() - truth
        limit = 4 * est.std() / math.sqrt(R)
        good = abs(bias) <= limit
        ok &= good
        parts.append(f"eps={eps}: bias={bias:.3f} limit={limit:.3f}")
    verdict(8, "mixed +/- walk is unbiased", ok, "; ".join(parts))


def _remap_spread(values_from, eps_from, eps_to, L):
    """Analytic per-symbol std of the randomized remap."""
    to = EstimationScale(eps_to, L).values
    sd = np.zeros(L)
    for l in range(L):
        lp, p = upscale_target_symbol(l, eps_from, eps_to, L)
        if lp < L - 1:
            sd[l] = (to[lp + 1] - to[lp]) * math.sqrt(p * (1 - p))
    return sd


def _preserved(before, samples, sd):
    dev = np.abs(samples.mean(axis=0) - before)
    tol = np.maximum(4 * sd / math.sqrt(samples.shape[0]), 1e-9 * np.maximum(before, 1.0))
    return bool(np.all(dev <= tol)), float(np.max(dev / tol))


def test_upscale_preserves_expectation(verdict):
    L, E = 256, 8
    parts, ok = [], True
    for w in (0, 3, 6):
        arr = IceBuckets(R * L, L, E, L)
        step = arr.eps_step
        arr.set_state(symbols=np.tile(np.arange(L), R), scales=np.full(R, w))
        before = EstimationScale(w * step, L).values
        rng = random_source(w)
        for b in range(R):
            arr.local_upscale(b, rng)
        good, worst = _preserved(before, arr.estimates().reshape(R, L),
                                 _remap_spread(before, w * step, (w + 1) * step, L))
        ok &= good
        parts.append(f"local w={w}: worst dev/tol={worst:.2f}")

    arr = IceBuckets(R * E * L, L, E, L)
    step = arr.eps_step
    arr.set_state(symbols=np.tile(np.arange(L), R * E), scales=np.tile(np.arange(E), R))
    arr.global_upscale(random_source(99))
    est = arr.estimates().reshape(R, E, L)
    worst_all = 0.0
    for w in range(E):
        before = EstimationScale(w * step, L).values
        sd = np.zeros(L) if w % 2 == 0 else _remap_spread(before, w * step, (w + 1) * step, L)
        good, worst = _preserved(before, est[:, w, :], sd)
        ok &= good
        worst_all = max(worst_all, worst)
    parts.append(f"global E={E}: worst dev/tol={worst_all:.2f}")
    verdict(9, "upscale keeps every symbol's mean", ok, "; ".join(parts))


@pytest.fixture(scope="module")
def zipf_runs():
    base = zipf_trace(100_000, 10_000_000, 1.0, 2024)
    out = {}
    for placement, trace in (("rank order", base), ("shuffled ids", shuffle_ids(base, 2024))):
        out[placement] = {
            s: run_bench(RunSpec(s, bits_per_symbol=8, overhead_bits_per_counter=0.5, seed=7,
                                 runs=3, checkpoints=4), trace)
            for s in ("ice", "cedar", "ice_no_global")
        }
    return out


def test_ice_beats_single_scale(verdict, zipf_runs):
    parts, ok = [], True
    for placement, res in zipf_runs.items():
        ice, cedar = res["ice"], res["cedar"]
        pi, pc = ice.report.per_value, cedar.report.per_value
        small = [n for n in pi if n < 256 and n in pc]
        below = sum(pi[n][1] < pc[n][1] for n in small)
        good = (ice.report.overall < cedar.report.overall and ice.report.overall < ice.bound
                and below == len(small))
        ok &= good
        parts.append(f"{placement}: ice {100 * ice.report.overall:.2f}% cedar "
                     f"{100 * cedar.report.overall:.2f}% bound {100 * ice.bound:.2f}% "
                     f"per-value below {below}/{len(small)}")
    verdict(10, "bucketed error below single scale on Zipf", ok, "; ".join(parts))


def test_no_global_mode(verdict, zipf_runs):
    parts, ok = [], True
    for placement, res in zipf_runs.items():
        r = res["ice_no_global"]
        good = (r.upscales.get("global", 0) == 0 and r.report.overall <= r.bound
                and r.max_count == 10_000_000)
        ok &= good
        parts.append(f"{placement}: overall {100 * r.report.overall:.2f}% <= bound "
                     f"{100 * r.bound:.2f}%, global upscales {r.upscales.get('global', 0):g}")
    verdict(11, "fixed-capacity run of M packets", ok, "; ".join(parts))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
