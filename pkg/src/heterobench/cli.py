"""Command-line entry point: ``heterobench list | run | suite | plot``."""

from __future__ import annotations

import logging
import sys
import time
from pathlib import Path

import click

from heterobench import report
from heterobench._parallel import default_workers
from heterobench.errors import ResourceExhaustedError
from heterobench.harness import (CUSTOM, ConfigError, RegistryError, RunConfig, default_registry,
                                 run, run_concurrent)

EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_RESOURCES = 4

SIZE_CHOICES = ["1", "2", "3", "4", CUSTOM]


def _parse_params(pairs: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--param")
        out[key.strip()] = value.strip()
    return out


def _size(value: str) -> int | str:
    return CUSTOM if value == CUSTOM else int(value)


def _write(record: report.ResultRecord, fmt: str, path: str | None) -> None:
    try:
        text = report.emit(record, fmt, path)
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc.strerror or exc}", err=True)
        sys.exit(EXIT_IO)
    if path is None:
        click.echo(text, nl=not text.endswith("\n"))


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Portable benchmark suite: microbenchmarks, parallel primitives,
    application kernels and DNN layers."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("list")
def list_cmd() -> None:
    """Show registered benchmarks with their class-1 parameters."""
    for d in default_registry().listing():
        preset = " ".join(f"{k}={v}" for k, v in sorted(d.presets[1].items()))
        click.echo(f"L{d.level}  {d.name:<18} {preset}")


@main.command("run")
@click.argument("name")
@click.option("--size", type=click.Choice(SIZE_CHOICES), default="1", show_default=True)
@click.option("--param", "params", multiple=True, metavar="KEY=VALUE",
              help="Override a preset parameter (repeatable).")
@click.option("--passes", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help="Parallel lanes [default: $HETEROBENCH_WORKERS or CPU count].")
@click.option("--concurrent", type=click.IntRange(min=1), default=None,
              help="Run K single-lane instances at once and report the scaling table.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file [default: stdout].")
def run_cmd(name, size, params, passes, seed, workers, concurrent, fmt, out) -> None:
    """Run one benchmark and emit its result record."""
    try:
        config = RunConfig(benchmark=name, size_class=_size(size), custom_params=_parse_params(params),
                           passes=passes, seed=seed, workers=workers or default_workers(),
                           concurrent_instances=concurrent or 1, output_format=fmt, output_path=out)
        record = (run_concurrent if concurrent else run)(config)
    except (ConfigError, RegistryError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except ResourceExhaustedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RESOURCES)
    _write(record, fmt, out)
    if not record.ok:
        click.echo(f"{name}: verification FAILED; {'; '.join(record.notes)}", err=True)
    sys.exit(record.exit_status)


@main.command("suite")
@click.option("--size", type=click.Choice(["1", "2", "3", "4"]), default="1", show_default=True)
@click.option("--passes", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="heterobench-results",
              show_default=True, help="Directory receiving one file per benchmark.")
@click.option("--only", multiple=True, help="Restrict to these benchmarks (repeatable).")
def suite_cmd(size, passes, seed, workers, fmt, out_dir, only) -> None:
    """Run every registered benchmark at one size class."""
    registry = default_registry()
    names = [d.name for d in registry.listing() if not only or d.name in only]
    unknown = set(only) - set(names)
    if unknown:
        click.echo(f"error: unknown benchmark(s) {sorted(unknown)}", err=True)
        sys.exit(EXIT_USAGE)
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        click.echo(f"error: cannot create {out_dir}: {exc.strerror or exc}", err=True)
        sys.exit(EXIT_IO)
    failed = []
    t_start = time.perf_counter()
    for name in names:
        config = RunConfig(benchmark=name, size_class=int(size), passes=passes, seed=seed,
                           workers=workers or default_workers(), output_format=fmt)
        t0 = time.perf_counter()
        try:
            record = run(config, registry)
        except ResourceExhaustedError as exc:
            click.echo(f"{name:<18} SKIPPED  {exc}")
            failed.append(name)
            continue
        _write(record, fmt, str(Path(out_dir) / f"{name}.{fmt}"))
        click.echo(f"{name:<18} {record.verified.upper():<8} {time.perf_counter() - t0:7.2f}s")
        if not record.ok:
            failed.append(name)
    click.echo(f"{len(names) - len(failed)}/{len(names)} passed in "
               f"{time.perf_counter() - t_start:.1f}s; results in {out_dir}")
    sys.exit(EXIT_VERIFY_FAILED if failed else 0)


@main.command("plot")
@click.argument("output", type=click.Path(dir_okay=False))
@click.argument("records", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--y", "y_metric", default=None, help="Metric for the y axis [default: speedup or throughput].")
def plot_cmd(output, records, y_metric) -> None:
    """Plot a metric against the one parameter that varies across RECORDS (SVG)."""
    try:
        loaded = [report.load(p) for p in records]
        report.plot_scaling(loaded, output, y_metric)
    except report.NotComparableError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except (ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)


if __name__ == "__main__":
    main()
