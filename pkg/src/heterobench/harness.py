"""Benchmark registry, configuration resolution and timed execution."""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from heterobench._parallel import default_workers, lanes
from heterobench._rng import stream
from heterobench.errors import ResourceExhaustedError, VerificationError
from heterobench.report import (EnvironmentSnapshot, ResultRecord, Stats, Timing,
                                utc_now)

log = logging.getLogger(__name__)

SIZE_CLASSES = (1, 2, 3, 4)
CUSTOM = "custom"


class RegistryError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    """Type and range of one tunable benchmark parameter."""

    kind: type = int
    min: float | None = None
    max: float | None = None
    choices: tuple | None = None
    help: str = ""

    def parse(self, name: str, value: Any) -> Any:
        try:
            if self.kind is bool:
                if isinstance(value, str):
                    low = value.strip().lower()
                    if low not in ("0", "1", "true", "false", "yes", "no"):
                        raise ValueError(value)
                    value = low in ("1", "true", "yes")
                else:
                    value = bool(value)
            elif self.kind is int:
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError(value)
                value = int(value)
            else:
                value = self.kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: cannot interpret {value!r} as {self.kind.__name__}") from None
        if self.choices is not None and value not in self.choices:
            raise ConfigError(f"{name}={value!r} not in {list(self.choices)}")
        if self.min is not None and value < self.min:
            raise ConfigError(f"{name}={value} below minimum {self.min}")
        if self.max is not None and value > self.max:
            raise ConfigError(f"{name}={value} above maximum {self.max}")
        return value


Verdict = tuple[bool, dict]


def _identity(state):
    return state


@dataclass(frozen=True)
class BenchmarkDescriptor:
    """A benchmark: its size presets plus the callables the harness drives.

    ``setup(params, rng)`` builds the input once per run; ``stage(state)``
    returns the working input for one pass (copies for in-place kernels);
    ``compute(work, params)`` is the timed region; ``verify(state, output,
    params)`` returns ``(ok, artifacts)``; ``metrics(params, output, seconds)``
    derives throughput figures for one pass.
    """

    name: str
    level: int
    presets: Mapping[int, Mapping[str, Any]]
    params: Mapping[str, Param]
    setup: Callable[[dict, np.random.Generator], Any]
    compute: Callable[[Any, dict], Any]
    verify: Callable[[Any, Any, dict], Verdict]
    metrics: Callable[[dict, Any, float], dict] = lambda p, out, s: {}
    stage: Callable[[Any], Any] = _identity
    compute_instance: Callable[[Any, dict], Any] | None = None
    baseline: Callable[[Any, dict], Any] | None = None
    footprint: Callable[[dict], int] | None = None
    notes: Callable[[dict], list[str]] | None = None
    details: Callable[[dict, Any], dict] | None = None
    dwarf: str | None = None
    domain: str | None = None
    description: str = ""
    deterministic: bool = True

    def __post_init__(self):
        if self.level not in (0, 1, 2):
            raise RegistryError(f"{self.name}: level must be 0, 1 or 2")
        missing = [c for c in SIZE_CLASSES if c not in self.presets]
        if missing:
            raise RegistryError(f"{self.name}: no preset for size classes {missing}")
        for c in SIZE_CLASSES:
            unknown = set(self.presets[c]) - set(self.params)
            if unknown:
                raise RegistryError(f"{self.name}: preset {c} has undeclared params {sorted(unknown)}")


class Registry:
    def __init__(self):
        self._by_name: dict[str, BenchmarkDescriptor] = {}

    def register(self, descriptor: BenchmarkDescriptor) -> BenchmarkDescriptor:
        if descriptor.name in self._by_name:
            raise RegistryError(f"benchmark {descriptor.name!r} is already registered")
        self._by_name[descriptor.name] = descriptor
        return descriptor

    def get(self, name: str) -> BenchmarkDescriptor:
        try:
            return self._by_name[name]
        except KeyError:
            raise RegistryError(f"unknown benchmark {name!r}") from None

    def listing(self) -> list[BenchmarkDescriptor]:
        return sorted(self._by_name.values(), key=lambda d: (d.level, d.name))

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __len__(self) -> int:
        return len(self._by_name)


@dataclass(frozen=True)
class RunConfig:
    benchmark: str
    size_class: int | str = 1
    custom_params: Mapping[str, Any] = field(default_factory=dict)
    passes: int = 1
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    concurrent_instances: int = 1
    output_format: str = "json"
    output_path: str | None = None

    def __post_init__(self):
        if self.size_class != CUSTOM and self.size_class not in SIZE_CLASSES:
            raise ConfigError(f"size class must be 1-4 or {CUSTOM!r}, got {self.size_class!r}")
        if self.size_class == CUSTOM and not self.custom_params:
            raise ConfigError("size class 'custom' needs at least one --param override")
        for name in ("passes", "workers", "concurrent_instances"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.output_format not in ("json", "csv"):
            raise ConfigError(f"unknown output format {self.output_format!r}")


def resolve_config(raw: RunConfig, descriptor: BenchmarkDescriptor) -> dict:
    """Preset parameters for the size class with overrides applied and validated.

    ``custom`` starts from the class-1 preset.
    """
    if raw.size_class == CUSTOM and not raw.custom_params:
        raise ConfigError("size class 'custom' needs at least one override")
    base = descriptor.presets[1 if raw.size_class == CUSTOM else raw.size_class]
    unknown = set(raw.custom_params) - set(descriptor.params)
    if unknown:
        raise ConfigError(f"{descriptor.name}: unknown parameter(s) {sorted(unknown)}; "
                          f"accepted: {sorted(descriptor.params)}")
    merged = {**base, **raw.custom_params}
    return {k: descriptor.params[k].parse(k, v) for k, v in sorted(merged.items())}


def digest(*arrays) -> str:
    """SHA-256 over dtype, shape and bytes of each array."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(f"{a.dtype.str}{a.shape}".encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _available_memory() -> int:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (AttributeError, ValueError, OSError):
        return 1 << 62


def _check_footprint(descriptor: BenchmarkDescriptor, params: dict, instances: int = 1):
    if descriptor.footprint is None:
        return
    need = descriptor.footprint(params) * instances
    avail = _available_memory()
    if need > avail:
        raise ResourceExhaustedError(
            f"{descriptor.name} needs ~{need / 2**30:.2f} GiB but only "
            f"{avail / 2**30:.2f} GiB is available; choose a smaller size")


def _setup(descriptor, params, seed):
    try:
        return descriptor.setup(params, stream(seed, descriptor.name))
    except MemoryError as exc:
        raise ResourceExhaustedError(f"{descriptor.name}: allocation failed ({exc})") from exc


def _verify(descriptor, verifier, state, out, params) -> tuple[str, dict, list[str]]:
    fn = verifier or descriptor.verify
    try:
        ok, artifacts = fn(state, out, params)
    except (VerificationError, AssertionError, ValueError, ArithmeticError) as exc:
        return "fail", {}, [f"verification error: {exc}"]
    return ("pass" if ok else "fail"), dict(artifacts), []


def _record(config, descriptor, params, timings, verdict, artifacts, notes,
            details=None, scaling=(), concurrent=1) -> ResultRecord:
    names = sorted(set().union(*(t.metrics for t in timings)))
    metrics = {"compute_seconds": Stats.of([t.compute_seconds for t in timings])}
    if verdict != "fail":
        for name in names:
            metrics[name] = Stats.of([t.metrics[name] for t in timings])
    else:
        # a failed run keeps raw timings but reports no derived performance figures
        timings = [Timing(t.setup_seconds, t.compute_seconds) for t in timings]
    return ResultRecord(
        benchmark=descriptor.name, effective_params=params, seed=config.seed,
        passes=config.passes, timings=tuple(timings), metrics=metrics, verified=verdict,
        environment=EnvironmentSnapshot.capture(), timestamp=utc_now(),
        size_class=str(config.size_class), workers=config.workers,
        concurrent_instances=concurrent, artifacts=artifacts, details=details or {},
        scaling=tuple(scaling), notes=tuple(notes))


def run(config: RunConfig, registry: Registry | None = None,
        verifier: Callable[[Any, Any, dict], Verdict] | None = None) -> ResultRecord:
    """Run ``config.passes`` timed passes of one benchmark and verify the last output.

    The input is generated once from the seed; each pass stages a fresh
    working copy (counted as setup) and times only the compute region. One
    untimed warmup precedes the timed passes.
    """
    registry = registry or default_registry()
    descriptor = registry.get(config.benchmark)
    params = resolve_config(config, descriptor)
    _check_footprint(descriptor, params)
    timings: list[Timing] = []
    failures: list[str] = []
    with lanes(config.workers):
        t0 = time.perf_counter()
        state = _setup(descriptor, params, config.seed)
        generation = time.perf_counter() - t0
        try:
            descriptor.compute(descriptor.stage(state), params)
        except VerificationError as exc:
            failures.append(f"warmup: {exc}")
        out = None
        for p in range(config.passes):
            t0 = time.perf_counter()
            work = descriptor.stage(state)
            t1 = time.perf_counter()
            try:
                out = descriptor.compute(work, params)
            except VerificationError as exc:
                # kernels with built-in checks (the copy and bandwidth sweeps) raise mid-pass
                out = None
                failures.append(f"pass {p}: {exc}")
            t2 = time.perf_counter()
            compute_s = max(t2 - t1, 1e-9)
            metrics = {} if out is None else dict(descriptor.metrics(params, out, compute_s))
            if descriptor.baseline is not None and out is not None:
                b0 = time.perf_counter()
                descriptor.baseline(descriptor.stage(state), params)
                base_s = time.perf_counter() - b0
                metrics["baseline_seconds"] = base_s
                metrics["speedup"] = base_s / compute_s
            setup_s = (t1 - t0) + (generation if p == 0 else 0.0)
            timings.append(Timing(setup_s, compute_s, metrics))
        if failures or out is None:
            verdict, artifacts, notes = "fail", {}, failures or ["no output produced"]
        else:
            verdict, artifacts, notes = _verify(descriptor, verifier, state, out, params)
    details = {}
    if descriptor.details is not None and out is not None:
        details = descriptor.details(params, out)
    if descriptor.notes is not None:
        notes = list(descriptor.notes(params)) + notes
    log.info("%s: %s in %.3fs/pass", descriptor.name, verdict,
             Stats.of([t.compute_seconds for t in timings]).mean)
    return _record(config, descriptor, params, timings, verdict, artifacts, notes, details)


def scaling_ladder(k: int) -> list[int]:
    """1, 2, 4, ... up to and including ``k``."""
    ks, x = [], 1
    while x < k:
        ks.append(x)
        x *= 2
    ks.append(k)
    return ks


def _launch(descriptor, works, params):
    """Run each work item on its own thread, released together.

    Returns ``(wall, outputs)`` where ``wall`` spans the earliest start to the
    latest finish as stamped inside the threads, so thread start-up and join
    latency stay out of the measurement.
    """
    fn = descriptor.compute_instance or descriptor.compute
    outputs = [None] * len(works)
    stamps = [(0.0, 0.0)] * len(works)
    errors: list[BaseException] = []
    gate = threading.Barrier(len(works))

    def body(i):
        with lanes(1):
            gate.wait()
            t0 = time.perf_counter()
            try:
                outputs[i] = fn(works[i], params)
            except BaseException as exc:  # re-raised in the caller
                errors.append(exc)
            stamps[i] = (t0, time.perf_counter())

    threads = [threading.Thread(target=body, args=(i,)) for i in range(len(works))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    wall = max(e for _, e in stamps) - min(s for s, _ in stamps)
    return max(wall, 1e-9), outputs


def run_concurrent(config: RunConfig, registry: Registry | None = None,
                   verifier: Callable[[Any, Any, dict], Verdict] | None = None) -> ResultRecord:
    """Throughput of ``k`` simultaneous single-lane instances of one benchmark.

    Every instance gets its own input buffers. For each ``j`` on the ladder
    1, 2, 4, ..., k the compute regions are launched together and timed from
    release to the last join; setup is excluded. Speedup at ``j`` is
    ``throughput(j) / throughput(1)``, so it is 1.0 at ``j = 1``.
    """
    registry = registry or default_registry()
    descriptor = registry.get(config.benchmark)
    params = resolve_config(config, descriptor)
    k = config.concurrent_instances
    _check_footprint(descriptor, params, instances=k)
    ladder = scaling_ladder(k)
    walls: dict[int, list[float]] = {j: [] for j in ladder}
    setups: list[float] = []
    outputs: list = []
    t0 = time.perf_counter()
    state = _setup(descriptor, params, config.seed)
    generation = time.perf_counter() - t0
    _launch(descriptor, [descriptor.stage(state)], params)
    for p in range(config.passes):
        setup_s = generation if p == 0 else 0.0
        for j in ladder:
            s0 = time.perf_counter()
            works = [descriptor.stage(state) for _ in range(j)]
            setup_s += time.perf_counter() - s0
            wall, outputs = _launch(descriptor, works, params)
            walls[j].append(wall)
        setups.append(setup_s)
    timings = []
    for p in range(config.passes):
        base = 1.0 / walls[1][p]
        throughput = k / walls[k][p]
        timings.append(Timing(setups[p], walls[k][p],
                              {"throughput": throughput,
                               "speedup": 1.0 if k == 1 else throughput / base,
                               "baseline_throughput": base}))
    scaling = []
    for j in ladder:
        thr = Stats.of([j / w for w in walls[j]]).mean
        base = Stats.of([1.0 / w for w in walls[1]]).mean
        scaling.append({"instances": j, "seconds": Stats.of(walls[j]).mean, "throughput": thr,
                        "baseline_throughput": base, "speedup": 1.0 if j == 1 else thr / base})
    verdict, artifacts, notes = _verify(descriptor, verifier, state, outputs[0], params)
    if verdict == "pass" and any(_output_key(o) != _output_key(outputs[0]) for o in outputs[1:]):
        verdict, notes = "fail", notes + ["concurrent instances produced different outputs"]
    notes.append(f"{k} concurrent instance(s), one lane each; setup excluded from throughput")
    return _record(config, descriptor, params, timings, verdict, artifacts, notes,
                   scaling=scaling, concurrent=k)


def _output_key(out) -> str:
    if isinstance(out, np.ndarray):
        return digest(out)
    if isinstance(out, (tuple, list)):
        return "|".join(_output_key(o) for o in out)
    return repr(out)


_DEFAULT: Registry | None = None


def default_registry() -> Registry:
    """The registry holding every suite benchmark (built on first use)."""
    global _DEFAULT
    if _DEFAULT is None:
        from heterobench.suite import build_registry
        _DEFAULT = build_registry()
    return _DEFAULT
