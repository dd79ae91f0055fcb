"""Relational filter: flag map, exclusive prefix sum, scatter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from heterobench._parallel import chunk_bounds

_OPS = {"<": 0, "<=": 1, ">": 2, ">=": 3, "==": 4, "!=": 5}


@dataclass(frozen=True)
class Predicate:
    """Conjunction of ``column <op> value`` clauses, optionally negated."""

    clauses: tuple[tuple[str, str, int], ...]
    negated: bool = False

    def __post_init__(self):
        for _, op, _ in self.clauses:
            if op not in _OPS:
                raise ValueError(f"unknown comparison {op!r}")

    def negate(self) -> "Predicate":
        return Predicate(self.clauses, not self.negated)

    def evaluate(self, table: dict[str, np.ndarray]) -> np.ndarray:
        """Plain numpy evaluation, used as the sequential reference."""
        n = len(next(iter(table.values()))) if table else 0
        mask = np.ones(n, dtype=bool)
        for col, op, value in self.clauses:
            x = _column(table, col)
            mask &= {"<": x < value, "<=": x <= value, ">": x > value,
                     ">=": x >= value, "==": x == value, "!=": x != value}[op]
        return ~mask if self.negated else mask


def _column(table, name):
    try:
        return table[name]
    except KeyError:
        raise KeyError(f"unknown column {name!r}") from None


@njit(parallel=True, cache=True)
def _flags(cols, ops, values, negated, bounds, flags):
    nchunks = bounds.size - 1
    for c in prange(nchunks):
        for i in range(bounds[c], bounds[c + 1]):
            ok = True
            for k in range(ops.size):
                x = cols[k, i]
                v = values[k]
                op = ops[k]
                if op == 0:
                    ok = x < v
                elif op == 1:
                    ok = x <= v
                elif op == 2:
                    ok = x > v
                elif op == 3:
                    ok = x >= v
                elif op == 4:
                    ok = x == v
                else:
                    ok = x != v
                if not ok:
                    break
            flags[i] = 1 if ok != negated else 0


@njit(parallel=True, cache=True)
def _exclusive_scan(flags, bounds, offsets):
    nchunks = bounds.size - 1
    partial = np.zeros(nchunks + 1, dtype=np.int64)
    for c in prange(nchunks):
        s = 0
        for i in range(bounds[c], bounds[c + 1]):
            s += flags[i]
        partial[c + 1] = s
    for c in range(nchunks):
        partial[c + 1] += partial[c]
    for c in prange(nchunks):
        s = partial[c]
        for i in range(bounds[c], bounds[c + 1]):
            offsets[i] = s
            s += flags[i]
    return partial[nchunks]


@njit(parallel=True, cache=True)
def _scatter(flags, offsets, bounds, out_index):
    nchunks = bounds.size - 1
    for c in prange(nchunks):
        for i in range(bounds[c], bounds[c + 1]):
            if flags[i]:
                out_index[offsets[i]] = i


def where_filter(table: dict[str, np.ndarray], predicate: Predicate) -> dict[str, np.ndarray]:
    """Rows of ``table`` satisfying ``predicate``, in their original order."""
    names = list(table)
    n = len(table[names[0]]) if names else 0
    if any(len(v) != n for v in table.values()):
        raise ValueError("all columns must have the same length")
    cols = np.empty((len(predicate.clauses), n), dtype=np.int64)
    for k, (col, _, _) in enumerate(predicate.clauses):
        cols[k] = _column(table, col)
    ops = np.array([_OPS[op] for _, op, _ in predicate.clauses], dtype=np.int64)
    values = np.array([v for _, _, v in predicate.clauses], dtype=np.int64)
    bounds = chunk_bounds(n)
    flags = np.empty(n, dtype=np.int64)
    _flags(cols, ops, values, predicate.negated, bounds, flags)
    offsets = np.empty(n, dtype=np.int64)
    total = _exclusive_scan(flags, bounds, offsets)
    index = np.empty(total, dtype=np.int64)
    _scatter(flags, offsets, bounds, index)
    return {name: col[index] for name, col in table.items()}


def where_reference(table: dict[str, np.ndarray], predicate: Predicate) -> dict[str, np.ndarray]:
    mask = predicate.evaluate(table)
    return {name: col[mask] for name, col in table.items()}


def random_table(n: int, columns: int, rng: np.random.Generator, high: int = 1000) -> dict[str, np.ndarray]:
    return {f"col{k}": rng.integers(0, high, size=n, dtype=np.int32) for k in range(columns)}
