"""Needleman-Wunsch global alignment with anti-diagonal wavefronts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

GAP = -1  # gap marker in alignment arrays


def default_similarity(alphabet: int, match: int = 1, mismatch: int = -1) -> np.ndarray:
    return np.where(np.eye(alphabet, dtype=bool), match, mismatch).astype(np.int32)


@dataclass(frozen=True)
class SequencePair:
    a: np.ndarray
    b: np.ndarray
    similarity: np.ndarray
    gap_penalty: int = -1

    def __post_init__(self):
        if len(self.a) == 0 or len(self.b) == 0:
            raise ValueError("sequences must be non-empty")
        if not np.array_equal(self.similarity, self.similarity.T):
            raise ValueError("similarity table must be symmetric")

    @classmethod
    def from_strings(cls, a: str, b: str, alphabet: str = "ACGT", match: int = 1,
                     mismatch: int = -1, gap: int = -1) -> "SequencePair":
        code = {ch: i for i, ch in enumerate(alphabet)}
        return cls(np.array([code[ch] for ch in a], dtype=np.int32),
                   np.array([code[ch] for ch in b], dtype=np.int32),
                   default_similarity(len(alphabet), match, mismatch), gap)

    def swapped(self) -> "SequencePair":
        return SequencePair(self.b, self.a, self.similarity, self.gap_penalty)


@dataclass(frozen=True)
class Alignment:
    score: int
    a: np.ndarray   # symbols of a with GAP inserted
    b: np.ndarray
    matrix: np.ndarray = field(repr=False)


@njit(parallel=True, cache=True)
def _fill(a, b, sim, gap):
    la, lb = a.size, b.size
    h = np.empty((la + 1, lb + 1), dtype=np.int32)
    for i in range(la + 1):
        h[i, 0] = i * gap
    for j in range(lb + 1):
        h[0, j] = j * gap
    for d in range(2, la + lb + 1):
        i_lo = max(1, d - lb)
        i_hi = min(la, d - 1)
        for i in prange(i_lo, i_hi + 1):
            j = d - i
            best = h[i - 1, j - 1] + sim[a[i - 1], b[j - 1]]
            up = h[i - 1, j] + gap
            left = h[i, j - 1] + gap
            if up > best:
                best = up
            if left > best:
                best = left
            h[i, j] = best
    return h


@njit(cache=True)
def _traceback(h, a, b, sim, gap):
    i, j = a.size, b.size
    out_a = np.empty(i + j, dtype=np.int32)
    out_b = np.empty(i + j, dtype=np.int32)
    k = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and h[i, j] == h[i - 1, j - 1] + sim[a[i - 1], b[j - 1]]:
            out_a[k], out_b[k] = a[i - 1], b[j - 1]
            i -= 1
            j -= 1
        elif i > 0 and h[i, j] == h[i - 1, j] + gap:
            out_a[k], out_b[k] = a[i - 1], -1
            i -= 1
        else:
            out_a[k], out_b[k] = -1, b[j - 1]
            j -= 1
        k += 1
    return out_a[:k][::-1].copy(), out_b[:k][::-1].copy()


def needleman_wunsch(pair: SequencePair) -> Alignment:
    a = np.ascontiguousarray(pair.a, dtype=np.int32)
    b = np.ascontiguousarray(pair.b, dtype=np.int32)
    sim = np.ascontiguousarray(pair.similarity, dtype=np.int32)
    h = _fill(a, b, sim, np.int32(pair.gap_penalty))
    al_a, al_b = _traceback(h, a, b, sim, np.int32(pair.gap_penalty))
    return Alignment(int(h[-1, -1]), al_a, al_b, h)


def alignment_score(al_a: np.ndarray, al_b: np.ndarray, similarity: np.ndarray, gap: int) -> int:
    score = 0
    for x, y in zip(al_a.tolist(), al_b.tolist()):
        if x == GAP or y == GAP:
            score += gap
        else:
            score += int(similarity[x, y])
    return score


def bruteforce_score(pair: SequencePair) -> int:
    """Best score over an explicit enumeration of every global alignment."""
    a, b = pair.a.tolist(), pair.b.tolist()
    sim, gap = pair.similarity.tolist(), pair.gap_penalty
    best = None

    def walk(i, j, score):
        nonlocal best
        if i == len(a) and j == len(b):
            best = score if best is None else max(best, score)
            return
        if i < len(a) and j < len(b):
            walk(i + 1, j + 1, score + sim[a[i]][b[j]])
        if i < len(a):
            walk(i + 1, j, score + gap)
        if j < len(b):
            walk(i, j + 1, score + gap)

    walk(0, 0, 0)
    return best


@njit(cache=True)
def _fill_rows(a, b, sim, gap):
    la, lb = a.size, b.size
    h = np.empty((la + 1, lb + 1), dtype=np.int32)
    for j in range(lb + 1):
        h[0, j] = j * gap
    for i in range(1, la + 1):
        h[i, 0] = i * gap
        for j in range(1, lb + 1):
            h[i, j] = max(h[i - 1, j - 1] + sim[a[i - 1], b[j - 1]],
                          h[i - 1, j] + gap, h[i, j - 1] + gap)
    return h


def reference_matrix(pair: SequencePair) -> np.ndarray:
    """Score matrix filled row by row on one thread."""
    return _fill_rows(np.ascontiguousarray(pair.a, dtype=np.int32),
                      np.ascontiguousarray(pair.b, dtype=np.int32),
                      np.ascontiguousarray(pair.similarity, dtype=np.int32),
                      np.int32(pair.gap_penalty))
