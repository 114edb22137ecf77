"""Canonical phase-space points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhaseState:
    """A point (p, q) in R^n x R^n.

    ``p`` holds the momentum-like block and ``q`` the coordinate-like block.
    For Cartesian systems the (x, y) pair lives in the same slots (x in p,
    y in q); the owning system declares which role the blocks play.
    """

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if p.ndim != 1 or q.ndim != 1 or p.size != q.size or p.size < 1:
            raise DimensionError(
                f"p and q must be equal-length vectors, got {p.shape} and {q.shape}"
            )
        if not (np.isfinite(p).all() and np.isfinite(q).all()):
            raise DimensionError("state components must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.p.size

    def as_z(self) -> np.ndarray:
        """Concatenated [p, q] vector of length 2n."""
        return np.concatenate([self.p, self.q])

    @staticmethod
    def from_z(z: np.ndarray) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return PhaseState(z[:n], z[n:])

    def q_mod_2pi(self) -> np.ndarray:
        """Coordinates reduced to [0, 2pi); reduction happens only on demand."""
        return np.mod(self.q, TWO_PI)
