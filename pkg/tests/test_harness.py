import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heterobench.errors import ResourceExhaustedError
from heterobench.harness import (CUSTOM, BenchmarkDescriptor, ConfigError, Param, Registry,
                                 RegistryError, RunConfig, default_registry, resolve_config, run,
                                 run_concurrent, scaling_ladder)
from heterobench.report import Stats


def toy(name="toy", level=1, verify=None, **kw):
    presets = {c: {"n": 8 * c} for c in (1, 2, 3, 4)}
    return BenchmarkDescriptor(
        name=name, level=level, presets=presets,
        params={"n": Param(int, 1, 1000), "scale": Param(float, 0.0, 10.0)},
        setup=lambda p, rng: rng.random(p["n"]),
        compute=lambda x, p: np.cumsum(x),
        verify=verify or (lambda x, out, p: (bool(np.allclose(out, np.cumsum(x))), {"n": p["n"]})),
        metrics=lambda p, out, s: {"items_per_sec": p["n"] / s},
        **kw)


def toy_registry(*descriptors):
    reg = Registry()
    for d in descriptors or (toy(),):
        reg.register(d)
    return reg


def test_duplicate_name_rejected():
    reg = toy_registry(toy("gups"))
    with pytest.raises(RegistryError):
        reg.register(toy("gups"))


def test_suite_registry_has_full_roster():
    listing = default_registry().listing()
    assert len(listing) == 25
    by_level = [sum(d.level == lv for d in listing) for lv in (0, 1, 2)]
    dnn = [d for d in listing if d.name.startswith("dnn-")]
    assert by_level[0] == 4 and by_level[1] == 5
    assert len(dnn) == 9 and by_level[2] == 7 + 9
    assert listing == sorted(listing, key=lambda d: (d.level, d.name))


def test_empty_registry_lists_nothing():
    assert Registry().listing() == [] and len(Registry()) == 0


def test_descriptor_needs_all_presets():
    with pytest.raises(RegistryError):
        BenchmarkDescriptor(name="x", level=0, presets={1: {}, 2: {}, 3: {}}, params={},
                            setup=None, compute=None, verify=None)
    with pytest.raises(RegistryError):
        toy(level=3)


def test_unknown_benchmark():
    with pytest.raises(RegistryError):
        default_registry().get("cfdsolver")


def test_resolve_gemm_presets_and_override():
    gemm = default_registry().get("gemm")
    base = resolve_config(RunConfig("gemm", workers=1), gemm)
    assert base["n"] == gemm.presets[1]["n"]
    over = resolve_config(RunConfig("gemm", custom_params={"n": "384"}, workers=1), gemm)
    assert over["n"] == 384
    assert {k: v for k, v in over.items() if k != "n"} == {k: v for k, v in base.items() if k != "n"}


def test_custom_without_overrides_is_an_error():
    with pytest.raises(ConfigError):
        RunConfig("sort", size_class=CUSTOM)


def test_resolve_rejects_unknown_and_out_of_range():
    d = toy()
    with pytest.raises(ConfigError, match="unknown"):
        resolve_config(RunConfig("toy", custom_params={"m": 1}, workers=1), d)
    with pytest.raises(ConfigError):
        resolve_config(RunConfig("toy", custom_params={"n": 0}, workers=1), d)
    with pytest.raises(ConfigError):
        resolve_config(RunConfig("toy", custom_params={"n": "abc"}, workers=1), d)


@pytest.mark.parametrize("field,value", [("passes", 0), ("workers", 0), ("concurrent_instances", 0),
                                         ("seed", -1), ("output_format", "xml"), ("size_class", 5)])
def test_runconfig_validation(field, value):
    with pytest.raises(ConfigError):
        RunConfig("toy", **{field: value})


def test_param_parsing():
    assert Param(bool).parse("x", "true") is True
    assert Param(bool).parse("x", "0") is False
    assert Param(str, choices=("a", "b")).parse("x", "b") == "b"
    with pytest.raises(ConfigError):
        Param(str, choices=("a", "b")).parse("x", "c")
    with pytest.raises(ConfigError):
        Param(int).parse("x", 2.5)


def test_single_pass_has_zero_stddev():
    rec = run(RunConfig("toy", passes=1, workers=1), toy_registry())
    assert rec.metrics["compute_seconds"].n == 1 and rec.metrics["compute_seconds"].stddev == 0
    assert rec.verified == "pass" and rec.exit_status == 0


def test_five_passes_one_verdict():
    calls = []

    def verify(x, out, p):
        calls.append(1)
        return True, {}

    rec = run(RunConfig("toy", passes=5, workers=1), toy_registry(toy(verify=verify)))
    assert len(rec.timings) == 5 and len(calls) == 1
    assert all(st.n == 5 for st in rec.metrics.values())


def test_failing_verifier_sets_failed_status_and_drops_metrics():
    rec = run(RunConfig("toy", passes=2, workers=1), toy_registry(),
              verifier=lambda *a: (False, {}))
    assert rec.verified == "fail" and rec.exit_status != 0
    assert set(rec.metrics) == {"compute_seconds"}
    assert all(not t.metrics for t in rec.timings)


def test_verifier_exception_counts_as_failure():
    def boom(*a):
        raise AssertionError("mismatch")
    rec = run(RunConfig("toy", workers=1), toy_registry(), verifier=boom)
    assert rec.verified == "fail" and any("mismatch" in n for n in rec.notes)


def test_oversize_parameters_raise_resource_error():
    with pytest.raises(ResourceExhaustedError):
        run(RunConfig("gups", size_class=CUSTOM, custom_params={"table_log2": 40}, workers=1))


def test_setup_excluded_from_compute_and_first_pass_carries_generation():
    rec = run(RunConfig("toy", passes=3, workers=1), toy_registry())
    assert all(t.compute_seconds > 0 and t.setup_seconds >= 0 for t in rec.timings)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6, allow_nan=False), min_size=1, max_size=50))
def test_stats_match_two_pass_computation(xs):
    s = Stats.of(xs)
    mean = math.fsum(xs) / len(xs)
    assert s.n == len(xs)
    assert s.mean == pytest.approx(mean, rel=1e-12)
    if len(xs) > 1:
        var = math.fsum((x - mean) ** 2 for x in xs) / (len(xs) - 1)
        assert s.stddev == pytest.approx(math.sqrt(var), rel=1e-9, abs=1e-12 * mean)
    else:
        assert s.stddev == 0
    assert s.min <= s.mean <= s.max


def test_stats_uses_sample_stddev():
    assert Stats.of([1.0, 2.0, 3.0, 4.0]).stddev == pytest.approx(statistics.stdev([1, 2, 3, 4]))


def test_scaling_ladder():
    assert scaling_ladder(1) == [1]
    assert scaling_ladder(4) == [1, 2, 4]
    assert scaling_ladder(6) == [1, 2, 4, 6]


def test_concurrent_k1_speedup_is_exactly_one():
    rec = run_concurrent(RunConfig("pathfinder", concurrent_instances=1, passes=2, workers=1))
    assert rec.verified == "pass"
    assert rec.metrics["speedup"].mean == 1.0 and rec.scaling[0]["speedup"] == 1.0


def test_concurrent_record_has_scaling_table():
    rec = run_concurrent(RunConfig("pathfinder", concurrent_instances=3, workers=1))
    assert [r["instances"] for r in rec.scaling] == [1, 2, 3]
    assert rec.concurrent_instances == 3
    assert {"throughput", "speedup", "baseline_throughput"} <= set(rec.metrics)


@pytest.mark.slow
def test_single_core_concurrency_gives_no_speedup():
    import os
    if len(os.sched_getaffinity(0)) != 1:
        pytest.skip("bound only holds when the process is confined to one hardware thread")
    rec = run_concurrent(RunConfig("pathfinder", size_class=CUSTOM, concurrent_instances=4,
                                   custom_params={"rows": 2000, "cols": 2000}, passes=3, workers=4))
    # one hardware thread: extra instances cannot add throughput beyond timing noise
    assert rec.scaling[-1]["speedup"] <= 1.25


DETERMINISTIC = ["gups", "bfs", "gemm", "pathfinder", "sort", "dwt2d", "kmeans", "lavamd",
                 "mandelbrot", "needleman-wunsch", "srad", "where", "dnn-activation",
                 "dnn-batchnorm", "dnn-convolution", "dnn-dropout", "dnn-softmax", "dnn-lrn",
                 "dnn-composite", "dnn-pooling", "dnn-connected"]


@pytest.mark.parametrize("name", DETERMINISTIC)
def test_outputs_identical_across_worker_counts(name):
    a = run(RunConfig(name, workers=1, seed=5))
    b = run(RunConfig(name, workers=8, seed=5))
    assert a.verified == b.verified == "pass"
    assert a.artifacts == b.artifacts
