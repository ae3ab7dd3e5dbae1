import numpy as np
import pytest

from icebuckets import (
    CapacityError, ConfigError, EstimationScale, IceBuckets, PolicyError, best_scale_split,
    choose_parameters, epsilon_for_capacity, global_upscale_table, ice_max_error_bound,
    ice_overall_error_bound, random_source,
)


def test_layout_and_memory():
    arr = IceBuckets(100, 256, 8, 12)
    assert arr.num_buckets == 9
    assert arr.bucket_of(99) == 8
    assert arr.memory_bits == 100 * 8 + 9 * 3
    assert arr.eps_step == epsilon_for_capacity(510, 256)
    assert arr.eps_max == pytest.approx(7 * arr.eps_step)


def test_exact_below_top_symbol():
    arr = IceBuckets(20, 16, 4, 5)
    rng = random_source(0)
    events = np.repeat(np.arange(20), np.arange(20) % 16)
    arr.process(random_source(1).permutation(events), rng)
    assert arr.estimates().tolist() == [float(i % 16) for i in range(20)]
    assert arr.local_upscales == 0


def test_full_symbol_triggers_local_upscale_of_its_bucket_only():
    arr = IceBuckets(20, 16, 4, 5)
    rng = random_source(0)
    arr.process(np.full(15, 7, dtype=np.int64), rng)
    arr.process(np.full(3, 12, dtype=np.int64), rng)
    arr.increment(7, rng)
    assert arr.local_upscales == 1
    assert arr.scale_indices.to_numpy().tolist() == [0, 1, 0, 0]
    assert arr.estimate(12) == 3.0
    assert arr.epsilon_of(1) == arr.eps_step


def test_global_upscale_doubles_step_and_halves_indices():
    arr = IceBuckets(40, 16, 8, 5)
    arr.set_state(symbols=np.arange(40) % 16, scales=np.arange(8))
    before = arr.estimates()
    step = arr.eps_step
    arr.global_upscale(random_source(0))
    assert arr.eps_step == 2 * step
    assert arr.scale_indices.to_numpy().tolist() == [0, 1, 1, 2, 2, 3, 3, 4]
    after = arr.estimates()
    # even buckets keep their exact estimates
    for b in (0, 2, 4, 6):
        sl = slice(5 * b, 5 * b + 5)
        assert np.array_equal(after[sl], before[sl])
    assert arr.global_upscales == 1


def test_top_scale_full_goes_global():
    n = 500
    arr = IceBuckets(n, 8, 2, 1)
    arr.process(np.tile(np.arange(n), 300), random_source(0))
    assert arr.global_upscales >= 1
    est = arr.estimates()
    # every flow saw 300 packets; the estimates stay unbiased
    assert abs(est.mean() - 300) <= 4 * est.std() / np.sqrt(n)


def test_fixed_capacity_mode():
    arr = IceBuckets(10, 16, 4, 5, max_count=1000)
    assert arr.eps_step == epsilon_for_capacity(1000, 16) / 3
    assert arr.eps_max == pytest.approx(epsilon_for_capacity(1000, 16))
    rng = random_source(0)
    with pytest.raises(PolicyError):
        arr.global_upscale(rng)
    with pytest.raises(CapacityError):
        arr.process(np.zeros(10**6, dtype=np.int64), rng)
    assert arr.global_upscales == 0


def test_local_upscale_errors():
    arr = IceBuckets(10, 16, 2, 5)
    rng = random_source(0)
    arr.local_upscale(0, rng)
    with pytest.raises(PolicyError):
        arr.local_upscale(0, rng)
    with pytest.raises(IndexError):
        arr.local_upscale(2, rng)


def test_local_upscale_preserves_estimate_on_average():
    n = 4000
    arr = IceBuckets(n, 64, 4, n)
    arr.set_state(symbols=np.full(n, 40))
    before = arr.estimate(0)
    arr.local_upscale(0, random_source(2))
    est = arr.estimates()
    sd = est.std()
    assert abs(est.mean() - before) <= 4 * sd / np.sqrt(n)


def test_config_errors():
    with pytest.raises(ConfigError):
        IceBuckets(10, 100, 4, 5)
    with pytest.raises(ConfigError):
        IceBuckets(10, 16, 3, 5)
    with pytest.raises(ConfigError):
        IceBuckets(10, 16, 4, 0)
    with pytest.raises(ValueError):
        IceBuckets(10, 16, 4, 5).set_state(scales=[4, 0])


def test_bounds():
    M = 26_750_712
    assert ice_max_error_bound(M, 256) == epsilon_for_capacity(M, 256)
    b = ice_overall_error_bound(M, 142032, 256, 32)
    assert b == pytest.approx(epsilon_for_capacity(M / 142032 + 255, 256) + epsilon_for_capacity(M, 256) / 31)
    # one bucket and two scales: first term is eps(M + L - 1)
    assert ice_overall_error_bound(M, 1, 256, 2) > epsilon_for_capacity(M, 256)
    with pytest.raises(ConfigError):
        ice_overall_error_bound(M, 0, 256, 32)


def test_choose_parameters_example():
    N = 32_737_760
    cfg = choose_parameters(int(12.5 * N), N, 2**32 - 1)
    assert (cfg.L, cfg.E, cfg.B) == (4096, 64, 16_368_880 // 6)
    assert cfg.S * cfg.B >= N
    assert cfg.B * cfg.scale_bits <= 16_368_880


def test_choose_parameters_is_minimal_over_e():
    cfg = best_scale_split(256, 50_000, 100_000, 10**7)
    for log_e in range(1, 24):
        B = 50_000 // log_e
        assert cfg.predicted_bound <= ice_overall_error_bound(10**7, B, 256, 2**log_e)


def test_choose_parameters_small_m_caps_symbol_bits():
    cfg = choose_parameters(16 * 1000, 1000, 200)
    assert cfg.L == 256


def test_upscale_table_e8():
    rows = global_upscale_table(8, 0.001)
    assert [r[2] for r in rows[:8]] == [0, 1, 1, 2, 2, 3, 3, 4]
    assert [r[4] for r in rows[:8]] == [False, True] * 4
    assert [r[2] for r in rows[8:]] == [5, 6, 7]
    for r in rows:
        assert r[3] == pytest.approx(2 * 0.001 * r[2])
        if r[0] is not None:
            assert r[1] == pytest.approx(r[0] * 0.001)


def test_upscale_table_e2():
    rows = global_upscale_table(2, 0.01)
    assert [(r[0], r[2], r[4]) for r in rows] == [(0, 0, False), (1, 1, True)]


def test_scale_of_bucket():
    arr = IceBuckets(10, 16, 4, 5)
    assert arr.scale_of(0) == EstimationScale(0.0, 16)
