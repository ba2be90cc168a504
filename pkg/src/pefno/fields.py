"""Real tensor/vector fields on the grid and the mean-fluctuation split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

# Component slots that must vanish identically for plane-deformation stress
# (third row/column except the 33 entry).
PLANE_ZERO_SLOTS = ((0, 2), (1, 2), (2, 0), (2, 1))
# Supervised stress channels in plane deformation, in fixed order.
PLANE_STRESS_SLOTS = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 2))


class FieldError(ValueError):
    """Raised when field data violate a documented invariant."""


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise FieldError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class TensorField:
    """3x3 real tensor field sampled on a grid.

    comps has shape (3, 3, n1, n2); comps[r, c] is the (r+1, c+1) component.
    Immutable after construction; safe to share across threads.
    """

    grid: GridSpec
    comps: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.comps, dtype=np.float64)
        if a.shape != (3, 3, self.grid.n1, self.grid.n2):
            raise FieldError(
                f"tensor comps must have shape (3, 3, {self.grid.n1}, {self.grid.n2}), got {a.shape}"
            )
        _check_finite(a, "tensor field")
        a = a.copy(order="C")  # never alias caller memory; field is frozen
        a.setflags(write=False)
        object.__setattr__(self, "comps", a)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "TensorField":
        return cls(grid, np.zeros((3, 3, grid.n1, grid.n2)))

    @classmethod
    def constant(cls, grid: GridSpec, matrix: np.ndarray) -> "TensorField":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise FieldError(f"constant tensor must be 3x3, got {m.shape}")
        return cls(grid, np.broadcast_to(m[:, :, None, None], (3, 3, grid.n1, grid.n2)).copy())

    def mean(self) -> np.ndarray:
        """Arithmetic cell average per component, shape (3, 3)."""
        return self.comps.mean(axis=(2, 3))

    def is_plane_deformation(self, tol: float = 0.0) -> bool:
        """True if the 13, 23, 31, 32 slots vanish (within tol, absolute)."""
        return all(np.abs(self.comps[r, c]).max() <= tol for r, c in PLANE_ZERO_SLOTS)


@dataclass(frozen=True)
class VectorField:
    """3-component real vector field on a grid; comps has shape (3, n1, n2)."""

    grid: GridSpec
    comps: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.comps, dtype=np.float64)
        if a.shape != (3, self.grid.n1, self.grid.n2):
            raise FieldError(
                f"vector comps must have shape (3, {self.grid.n1}, {self.grid.n2}), got {a.shape}"
            )
        _check_finite(a, "vector field")
        a = a.copy(order="C")
        a.setflags(write=False)
        object.__setattr__(self, "comps", a)


@dataclass(frozen=True)
class MeanFluctSplit:
    """Decomposition of a tensor field into cell mean and zero-mean remainder."""

    mean: np.ndarray
    fluct: TensorField

    def __post_init__(self) -> None:
        m = np.asarray(self.mean, dtype=np.float64)
        if m.shape != (3, 3):
            raise FieldError(f"mean must be 3x3, got {m.shape}")
        _check_finite(m, "mean")
        object.__setattr__(self, "mean", m)
        resid = np.abs(self.fluct.mean()).max()
        tol = 1e-12 * (np.abs(m).max() + 1.0)
        if resid > tol:
            raise FieldError(
                f"fluctuation mean {resid:.3e} exceeds tolerance {tol:.3e}; not a valid split"
            )

    def reconstruct(self) -> TensorField:
        """mean + fluct, added in this operand order."""
        return TensorField(self.fluct.grid, self.mean[:, :, None, None] + self.fluct.comps)


def split_mean_fluct(f: TensorField) -> MeanFluctSplit:
    """Split a tensor field into its cell average and zero-mean fluctuation.

    The mean is the arithmetic average over all grid points per component,
    refined by a second pass so the fluctuation average sits at the
    round-off floor rather than at single-pass cancellation level.
    """
    _check_finite(f.comps, "input field")
    mean = f.comps.mean(axis=(2, 3))
    fluct = f.comps - mean[:, :, None, None]
    # second-pass correction: remove the rounding residue of the first pass
    correction = fluct.mean(axis=(2, 3))
    fluct -= correction[:, :, None, None]
    mean = mean + correction
    return MeanFluctSplit(mean, TensorField(f.grid, fluct))
