"""Result records: JSON/CSV persistence, environment capture, SVG scaling charts."""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import statistics
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from heterobench import __version__

SCHEMA_VERSION = 1
VERDICTS = ("pass", "fail", "skipped")
# Fields that legitimately differ between otherwise identical runs.
MEASURED_FIELDS = ("timings", "metrics", "details", "scaling", "timestamp")


@dataclass(frozen=True)
class Timing:
    setup_seconds: float
    compute_seconds: float
    metrics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.setup_seconds < 0:
            raise ValueError("setup time cannot be negative")
        if not self.compute_seconds > 0:
            raise ValueError("compute time must be positive")


@dataclass(frozen=True)
class Stats:
    n: int
    mean: float
    stddev: float
    min: float
    max: float

    @classmethod
    def of(cls, samples: Sequence[float]) -> "Stats":
        xs = [float(x) for x in samples]
        if not xs:
            raise ValueError("no samples")
        mean = statistics.fmean(xs)
        sd = statistics.stdev(xs, mean) if len(xs) > 1 else 0.0
        # fmean can land one ulp outside [min, max] for constant samples
        lo, hi = min(xs), max(xs)
        return cls(len(xs), min(max(mean, lo), hi), sd, lo, hi)


@dataclass(frozen=True)
class EnvironmentSnapshot:
    os: str
    cpu_model: str
    logical_cores: int
    memory_bytes: int
    suite_version: str

    @classmethod
    def capture(cls) -> "EnvironmentSnapshot":
        return cls(platform.platform() or "unknown", _cpu_model(), os.cpu_count() or 1,
                   _memory_bytes(), __version__)


def _cpu_model() -> str:
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.lower().startswith("model name"):
                return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine() or "unknown"


def _memory_bytes() -> int:
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (AttributeError, ValueError, OSError):
        return 1


@dataclass(frozen=True)
class ResultRecord:
    benchmark: str
    effective_params: Mapping[str, Any]
    seed: int
    passes: int
    timings: tuple[Timing, ...]
    metrics: Mapping[str, Stats]
    verified: str
    environment: EnvironmentSnapshot
    timestamp: str
    size_class: str = "1"
    workers: int = 1
    concurrent_instances: int = 1
    artifacts: Mapping[str, Any] = field(default_factory=dict)
    details: Mapping[str, Any] = field(default_factory=dict)
    scaling: tuple[Mapping[str, float], ...] = ()
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.verified not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        if len(self.timings) != self.passes:
            raise ValueError("one timing per pass is required")
        for name, st in self.metrics.items():
            if st.n != self.passes:
                raise ValueError(f"metric {name} has {st.n} samples for {self.passes} passes")

    @property
    def ok(self) -> bool:
        return self.verified != "fail"

    @property
    def exit_status(self) -> int:
        return 0 if self.ok else 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["timings"] = [asdict(t) for t in self.timings]
        d["metrics"] = {k: asdict(v) for k, v in sorted(self.metrics.items())}
        d["scaling"] = [dict(r) for r in self.scaling]
        d["notes"] = list(self.notes)
        return {"schema_version": SCHEMA_VERSION, **d}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ResultRecord":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported result schema version {version!r}")
        return cls(
            benchmark=d["benchmark"],
            effective_params=dict(d["effective_params"]),
            seed=int(d["seed"]),
            passes=int(d["passes"]),
            timings=tuple(Timing(t["setup_seconds"], t["compute_seconds"], dict(t["metrics"]))
                          for t in d["timings"]),
            metrics={k: Stats(**v) for k, v in d["metrics"].items()},
            verified=d["verified"],
            environment=EnvironmentSnapshot(**d["environment"]),
            timestamp=d["timestamp"],
            size_class=str(d.get("size_class", "1")),
            workers=int(d.get("workers", 1)),
            concurrent_instances=int(d.get("concurrent_instances", 1)),
            artifacts=dict(d.get("artifacts", {})),
            details=dict(d.get("details", {})),
            scaling=tuple(dict(r) for r in d.get("scaling", ())),
            notes=tuple(d.get("notes", ())),
        )

    def comparable_view(self) -> dict:
        """The record without measured/time-varying fields."""
        d = self.to_dict()
        for k in MEASURED_FIELDS:
            d.pop(k, None)
        return d


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


# --------------------------------------------------------------------------
# JSON / CSV
# --------------------------------------------------------------------------

def to_json(record: ResultRecord) -> str:
    return json.dumps(record.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"


def from_json(text: str) -> ResultRecord:
    return ResultRecord.from_dict(json.loads(text))


def load(path: str | os.PathLike) -> ResultRecord:
    return from_json(Path(path).read_text())


def metric_columns(record: ResultRecord) -> list[str]:
    names: set[str] = set()
    for t in record.timings:
        names.update(t.metrics)
    return sorted(names)


def to_csv(record: ResultRecord) -> str:
    """One row per pass plus a ``mean`` summary row."""
    cols = metric_columns(record)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["benchmark", "pass", "setup_s", "compute_s", *cols])
    for i, t in enumerate(record.timings, 1):
        w.writerow([record.benchmark, i, repr(t.setup_seconds), repr(t.compute_seconds),
                    *(repr(float(t.metrics[c])) if c in t.metrics else "" for c in cols)])
    summary = [record.benchmark, "mean",
               repr(Stats.of([t.setup_seconds for t in record.timings]).mean),
               repr(Stats.of([t.compute_seconds for t in record.timings]).mean)]
    for c in cols:
        samples = [t.metrics[c] for t in record.timings if c in t.metrics]
        summary.append(repr(Stats.of(samples).mean) if samples else "")
    w.writerow(summary)
    return buf.getvalue()


def emit(record: ResultRecord, fmt: str = "json", path: str | os.PathLike | None = None) -> str:
    """Serialize ``record``; writes to ``path`` when given. Raises OSError on I/O failure."""
    if fmt == "json":
        text = to_json(record)
    elif fmt == "csv":
        text = to_csv(record)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# SVG scaling chart
# --------------------------------------------------------------------------

class NotComparableError(ValueError):
    pass


PREFERRED_Y = ("speedup", "throughput", "gflops", "gups", "gbytes_per_sec", "gcups", "teps",
               "records_per_sec", "pixels_per_sec", "items_per_sec")


def _x_params(record: ResultRecord) -> dict:
    return {**record.effective_params, "concurrent_instances": record.concurrent_instances}


def scaling_series(records: Sequence[ResultRecord], y: str | None = None):
    """Returns ``(x_label, y_label, [(x, y), ...])`` sorted by x.

    A single record carrying a concurrency scaling table is plotted against
    its instance counts.
    """
    if len(records) == 1 and records[0].scaling:
        y = y or "speedup"
        rows = records[0].scaling
        if any(y not in row for row in rows):
            raise NotComparableError(f"scaling table has no column {y!r}")
        return "instances", y, sorted((float(r["instances"]), float(r[y])) for r in rows)
    if len(records) < 2:
        raise NotComparableError("need at least two records")
    names = {r.benchmark for r in records}
    if len(names) != 1:
        raise NotComparableError(f"records come from different benchmarks: {sorted(names)}")
    params = [_x_params(r) for r in records]
    keys = sorted(set().union(*params))
    varied = [k for k in keys if len({json.dumps(p.get(k)) for p in params}) > 1]
    if not varied:
        raise NotComparableError("records do not vary any parameter")
    # parameters moving in lockstep (e.g. width and height) form a single axis
    columns = {k: [p.get(k) for p in params] for k in varied}
    if len({json.dumps(v) for v in columns.values()}) > 1:
        raise NotComparableError(f"more than one parameter varies: {varied}")
    xs = columns[varied[0]]
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in xs):
        raise NotComparableError(f"parameter {varied[0]} is not numeric")
    if y is None:
        common = set.intersection(*(set(r.metrics) for r in records))
        y = next((m for m in PREFERRED_Y if m in common), None)
        if y is None:
            raise NotComparableError("records share no plottable metric")
    points = sorted((float(x), float(r.metrics[y].mean)) for x, r in zip(xs, records))
    return "=".join(varied), y, points


def plot_scaling(records: Sequence[ResultRecord], path: str | os.PathLike | None = None,
                 y: str | None = None) -> str:
    """Line chart of one metric against the single varied parameter."""
    x_label, y_label, points = scaling_series(records, y)
    svg = _svg_chart(f"{records[0].benchmark}: {y_label} vs {x_label}", x_label, y_label, points)
    if path is not None:
        Path(path).write_text(svg)
    return svg


def _nice(v: float) -> str:
    return f"{v:.4g}"


def _svg_chart(title: str, x_label: str, y_label: str, points) -> str:
    width, height = 640, 400
    left, right, top, bottom = 70, 20, 40, 50
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = 0.0, max(ys) * 1.1 if max(ys) > 0 else 1.0
    if x1 == x0:
        x1 = x0 + 1.0

    def sx(x):
        return left + (x - x0) / (x1 - x0) * (width - left - right)

    def sy(y):
        return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{_nice(yv)}</text>')
    for x in xs:
        out.append(f'<text x="{sx(x):.1f}" y="{height - bottom + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{_nice(x)}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{_esc(x_label)}</text>')
    out.append(f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {height / 2:.1f})">{_esc(y_label)}</text>')
    path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in points)
    out.append(f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{path}"/>')
    for x, y in points:
        out.append(f'<circle class="point" cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="steelblue">'
                   f'<title>{_nice(x)}, {_nice(y)}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
