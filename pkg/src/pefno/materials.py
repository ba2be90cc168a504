"""Per-pixel isotropic elastic properties and synthetic grain microstructures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .grid import GridSpec

# Sampling ranges for grain properties: Young's modulus [GPa], Poisson ratio.
E_RANGE = (50.0, 300.0)
NU_RANGE = (0.2, 0.4)


class MaterialError(ValueError):
    """Raised for out-of-domain material parameters."""


def lame_from_engineering(E, nu):
    """Lame moduli (lambda, mu) from Young's modulus and Poisson's ratio.

    lambda = E*nu / ((1+nu)(1-2nu)),  mu = E / (2(1+nu)).  Accepts scalars
    or arrays; nu must lie strictly inside (0, 0.5).
    """
    E = np.asarray(E, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if np.any(nu <= 0.0) or np.any(nu >= 0.5):
        raise MaterialError("Poisson ratio must lie in (0, 0.5)")
    if np.any(E <= 0.0):
        raise MaterialError("Young's modulus must be positive")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    if E.ndim == 0:
        return float(lam), float(mu)
    return lam, mu


@dataclass(frozen=True)
class MaterialField:
    """Pixel-wise Young's modulus [GPa] and Poisson ratio, with derived
    Lame moduli.  Values are immutable after construction."""

    grid: GridSpec
    E: np.ndarray
    nu: np.ndarray

    def __post_init__(self) -> None:
        E = np.asarray(self.E, dtype=np.float64).copy(order="C")
        nu = np.asarray(self.nu, dtype=np.float64).copy(order="C")
        if E.shape != self.grid.shape or nu.shape != self.grid.shape:
            raise MaterialError(
                f"material channels must have shape {self.grid.shape}, got {E.shape}/{nu.shape}"
            )
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(nu))):
            raise MaterialError("material field contains non-finite values")
        if np.any(E < E_RANGE[0]) or np.any(E > E_RANGE[1]):
            raise MaterialError(f"Young's modulus outside {E_RANGE} GPa")
        if np.any(nu < NU_RANGE[0]) or np.any(nu > NU_RANGE[1]):
            raise MaterialError(f"Poisson ratio outside {NU_RANGE}")
        lam, mu = lame_from_engineering(E, nu)
        for name, a in (("E", E), ("nu", nu), ("lam", lam), ("mu", mu)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def channels(self) -> np.ndarray:
        """(2, n1, n2) stack of (E, nu) for container serialization."""
        return np.stack([self.E, self.nu])

    @classmethod
    def uniform(cls, grid: GridSpec, E: float, nu: float) -> "MaterialField":
        return cls(grid, np.full(grid.shape, E), np.full(grid.shape, nu))


def voronoi_microstructure(grid: GridSpec, n_grains: int, rng_seed) -> MaterialField:
    """Periodic Voronoi polycrystal with per-grain uniform properties.

    Seeds are drawn uniformly in the cell; each pixel joins the nearest
    seed under the wrap-around metric.  Per-grain E and nu are drawn
    uniformly from the documented ranges.  Deterministic for a given seed.
    """
    if n_grains < 1:
        raise MaterialError(f"need at least one grain, got {n_grains}")
    if n_grains > grid.npoints:
        raise MaterialError(f"{n_grains} grains exceed the {grid.npoints} grid points")
    rng = np.random.default_rng(rng_seed)
    seeds = rng.uniform(0.0, grid.l, size=(n_grains, 2))
    grain_E = rng.uniform(*E_RANGE, size=n_grains)
    grain_nu = rng.uniform(*NU_RANGE, size=n_grains)
    labels = backends.voronoi_labels(grid.n1, grid.n2, seeds, grid.l)
    return MaterialField(grid, grain_E[labels], grain_nu[labels])
