"""Box-decomposed short-range particle interactions.

Particles carry a charge and interact through ``v = exp(-a2 * r^2)`` with
``a2 = 2 * alpha^2``; the displacement contribution is ``2 v (r_i - r_j)``
scaled by the partner's charge. Pairs farther apart than ``cutoff`` and the
self pair are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange


@dataclass(frozen=True)
class ParticleSpace:
    boxes_per_side: int
    particles_per_box: int
    positions: np.ndarray   # (boxes**3 * ppb, 3), grouped by box
    charges: np.ndarray     # (boxes**3 * ppb,)
    cutoff: float
    box_size: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ValueError("cutoff radius must be positive")
        if self.cutoff > self.box_size:
            raise ValueError(
                f"cutoff {self.cutoff} exceeds box edge {self.box_size}; "
                "interactions would reach past neighbor boxes")
        n = self.boxes_per_side ** 3 * self.particles_per_box
        if self.positions.shape != (n, 3) or self.charges.shape != (n,):
            raise ValueError("positions/charges do not match the box layout")


def random_space(boxes: int, ppb: int, rng: np.random.Generator,
                 cutoff: float = 1.0, box_size: float = 1.0, alpha: float = 0.5) -> ParticleSpace:
    nb = boxes ** 3
    idx = np.arange(nb)
    corner = np.stack([idx // (boxes * boxes), (idx // boxes) % boxes, idx % boxes], axis=1)
    pos = (corner[:, None, :] + rng.random((nb, ppb, 3))) * box_size
    charges = rng.random(nb * ppb) * 0.9 + 0.1
    return ParticleSpace(boxes, ppb, pos.reshape(-1, 3), charges, cutoff, box_size, alpha)


@njit(parallel=True, cache=True)
def _lavamd_kernel(pos, q, boxes, ppb, cutoff2, a2):
    n = pos.shape[0]
    out = np.zeros((n, 4))
    nb = boxes * boxes * boxes
    for home in prange(nb):
        bx = home // (boxes * boxes)
        by = (home // boxes) % boxes
        bz = home % boxes
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    nx, ny, nz = bx + dx, by + dy, bz + dz
                    if nx < 0 or ny < 0 or nz < 0 or nx >= boxes or ny >= boxes or nz >= boxes:
                        continue
                    nbr = (nx * boxes + ny) * boxes + nz
                    for i in range(home * ppb, (home + 1) * ppb):
                        for j in range(nbr * ppb, (nbr + 1) * ppb):
                            if i == j:
                                continue
                            rx = pos[i, 0] - pos[j, 0]
                            ry = pos[i, 1] - pos[j, 1]
                            rz = pos[i, 2] - pos[j, 2]
                            r2 = rx * rx + ry * ry + rz * rz
                            if r2 > cutoff2:
                                continue
                            v = np.exp(-a2 * r2)
                            fs = 2.0 * v * q[j]
                            out[i, 0] += q[j] * v
                            out[i, 1] += fs * rx
                            out[i, 2] += fs * ry
                            out[i, 3] += fs * rz
    return out


def lavamd(space: ParticleSpace) -> np.ndarray:
    """Per-particle ``(potential, dx, dy, dz)`` as an ``(n, 4)`` array."""
    return _lavamd_kernel(space.positions, space.charges, space.boxes_per_side,
                          space.particles_per_box, space.cutoff ** 2,
                          2.0 * space.alpha ** 2)


def lavamd_reference(space: ParticleSpace, subset: np.ndarray | None = None) -> np.ndarray:
    """All-pairs evaluation with the same cutoff, optionally for a subset of particles."""
    pos, q = space.positions, space.charges
    rows = np.arange(len(pos)) if subset is None else np.asarray(subset)
    a2 = 2.0 * space.alpha ** 2
    out = np.zeros((len(rows), 4))
    for start in range(0, len(rows), 256):
        r = rows[start:start + 256]
        d = pos[r, None, :] - pos[None, :, :]
        r2 = (d ** 2).sum(axis=2)
        keep = r2 <= space.cutoff ** 2
        keep[np.arange(len(r)), r] = False
        v = np.where(keep, np.exp(-a2 * r2), 0.0)
        out[start:start + len(r), 0] = v @ q
        out[start:start + len(r), 1:] = np.einsum("ij,ijk->ik", 2.0 * v * q, d)
    return out
