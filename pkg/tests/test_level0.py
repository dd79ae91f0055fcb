import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heterobench import level0
from heterobench._parallel import lanes
from heterobench.level0 import KIB


def test_default_sweep_spans_1k_to_500k():
    sizes = level0.default_copy_sizes()
    assert sizes[0] == KIB and sizes[-1] == 500 * KIB
    assert sizes == sorted(set(sizes))
    assert len(sizes) == 10   # 1..256 KiB doubling, then 500 KiB


def test_copy_leaves_buffers_equal():
    buf = level0.CopyBuffers(64 * KIB, np.random.default_rng(1))
    assert not np.array_equal(buf.a, buf.b)
    res = level0.copy_bandwidth("a_to_b", [KIB, 64 * KIB], buf)
    assert np.array_equal(buf.a, buf.b)
    assert res.sizes == [KIB, 64 * KIB]


def test_single_size_gives_single_point():
    assert len(level0.copy_bandwidth("b_to_a", [KIB]).points) == 1


def test_copy_rejects_bad_input():
    with pytest.raises(ValueError):
        level0.copy_bandwidth("sideways", [KIB])
    with pytest.raises(ValueError):
        level0.copy_bandwidth("a_to_b", [512])


def test_sweep_result_invariants():
    with pytest.raises(ValueError):
        level0.BandwidthSweepResult(((2048, 1.0), (1024, 1.0)))
    with pytest.raises(ValueError):
        level0.BandwidthSweepResult(((1024, 0.0),))


def test_directions_are_symmetric_on_host_memory():
    sizes = [64 * KIB, 128 * KIB, 256 * KIB, 500 * KIB]
    buf = level0.CopyBuffers(500 * KIB, np.random.default_rng(0))
    ratios = []
    for _ in range(3):
        a = level0.copy_bandwidth("a_to_b", sizes, buf).peak
        b = level0.copy_bandwidth("b_to_a", sizes, buf).peak
        ratios.append(abs(a - b) / max(a, b))
    assert min(ratios) <= 0.25


def test_triad_with_zero_scalar_copies_b():
    rng = np.random.default_rng(2)
    b, c = rng.random(10_001), rng.random(10_001)
    assert np.array_equal(level0.triad(b, c, 0.0, workers=4), b)


def test_triad_matches_formula():
    rng = np.random.default_rng(3)
    b, c = rng.random(5000), rng.random(5000)
    a = level0.triad(b, c, 2.5)
    level0.verify_triad(a, b, c, 2.5, rng, fraction=1.0)
    a[17] += 1.0
    with pytest.raises(level0.VerificationError):
        level0.verify_triad(a, b, c, 2.5, rng, fraction=1.0)


@pytest.mark.parametrize("pattern", ["read", "write", "triad"])
def test_hierarchy_patterns_verify_and_keep_shape(pattern):
    sets = level0.default_working_sets(1 << 20)
    res = level0.memory_hierarchy_bandwidth(sets, pattern, min_bytes=1 << 24)
    assert len(res.points) == len(sets)
    # point count and sizes do not depend on the run
    again = level0.memory_hierarchy_bandwidth(sets, pattern, min_bytes=1 << 24)
    assert res.sizes == again.sizes


def test_working_sets_start_at_16k():
    sets = level0.default_working_sets(8 << 20)
    assert sets[0] == 16 * KIB and sets[-1] == 8 << 20


def test_cache_resident_set_is_faster_than_memory_bound_set():
    big = min(8 * level0.last_level_cache_bytes(), 512 << 20)
    res = level0.memory_hierarchy_bandwidth([16 * KIB, big], "read", min_bytes=1 << 29)
    assert res.points[0][1] > res.points[1][1]


def test_f32_flops_positive_and_finite():
    r = level0.max_flops("f32", iters=200_000)
    assert np.isfinite(r.gflops) and r.gflops > 0 and not r.emulated


def test_f64_not_meaningfully_faster_than_f32():
    f32 = max(level0.max_flops("f32", iters=2_000_000).gflops for _ in range(3))
    f64 = min(level0.max_flops("f64", iters=2_000_000).gflops for _ in range(3))
    assert f64 <= f32 * 1.1


def test_f16_is_emulated_and_finite():
    r = level0.max_flops("f16", iters=20_000)
    assert r.emulated and r.gflops > 0
    vals = np.array([level0.f16_bits_to_f32(v) for v in r.accumulators.ravel()])
    assert np.isfinite(vals).all() and (vals != 0).all()


def test_unknown_precision():
    with pytest.raises(ValueError):
        level0.max_flops("f8")


def test_more_workers_do_not_lose_flops():
    if len(os.sched_getaffinity(0)) < 2:
        pytest.skip("needs at least two hardware threads")
    n = len(os.sched_getaffinity(0))
    with lanes(1):
        one = max(level0.max_flops("f32", 1, 2_000_000).gflops for _ in range(3))
    with lanes(n):
        many = max(level0.max_flops("f32", n, 2_000_000).gflops for _ in range(3))
    assert many >= one


@settings(max_examples=300, deadline=None)
@given(st.floats(width=32, allow_nan=False))
def test_half_conversion_matches_numpy_rounding(x):
    x32 = np.float32(x)
    ours = level0.f32_to_f16_bits(x32)
    with np.errstate(over="ignore"):
        ref = np.array(x32).astype(np.float16).view(np.uint16)
    assert int(ours) == int(ref)
    back = level0.f16_bits_to_f32(np.uint16(ours))
    assert np.float32(back) == np.float32(np.array(ref).view(np.float16)) or np.isnan(back)


def test_half_conversion_handles_nan():
    assert np.isnan(level0.f16_bits_to_f32(level0.f32_to_f16_bits(np.float32("nan"))))
