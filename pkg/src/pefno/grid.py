"""Periodic square-cell grid description shared by all field types."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Raised for unsupported or inconsistent grid definitions."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform discretization of a periodic square cell.

    Parameters
    ----------
    n1, n2 : int
        Number of points along x1 / x2.  Both must be even and >= 2; the
        half-spectrum transform and its differentiation rules are written
        for the even case only.
    l : float
        Physical side length of the square cell.  Defaults to 1 (the
        normalized cell); wavenumbers scale as 2*pi/l.
    """

    n1: int
    n2: int
    l: float = 1.0

    def __post_init__(self) -> None:
        for name, n in (("n1", self.n1), ("n2", self.n2)):
            if int(n) != n or n < 2:
                raise GridError(f"{name} must be an integer >= 2, got {n!r}")
            if n % 2 != 0:
                raise GridError(f"{name} must be even (odd grids unsupported), got {n}")
        if not (np.isfinite(self.l) and self.l > 0):
            raise GridError(f"cell length l must be positive and finite, got {self.l!r}")

    @property
    def npoints(self) -> int:
        return self.n1 * self.n2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Grid-point positions x_d = (i_d / n_d) * l, broadcastable to (n1, n2)."""
        x1 = (np.arange(self.n1) / self.n1 * self.l)[:, None]
        x2 = (np.arange(self.n2) / self.n2 * self.l)[None, :]
        return x1, x2
