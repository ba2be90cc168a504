"""Finite-strain kinematics, the Saint Venant-Kirchhoff law, and the
fixed-point spectral solver for quasi-static equilibrium on the periodic cell.

Moduli are carried in GPa; converged stresses are reported in MPa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends
from .fields import FieldError, TensorField
from .grid import GridSpec
from .materials import MaterialField
from .spectral import _irfft2n, _rfft2n, spectral_div, wavenumbers

GPA_TO_MPA = 1.0e3


class ConvergenceError(RuntimeError):
    """Solver failed to reach the residual tolerance; carries the history."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class LoadCase:
    """Prescribed mean deformation gradient, plane-deformation pattern."""

    Fbar: np.ndarray

    def __post_init__(self) -> None:
        F = np.asarray(self.Fbar, dtype=np.float64)
        if F.shape != (3, 3):
            raise FieldError(f"mean deformation gradient must be 3x3, got {F.shape}")
        plane = [F[0, 2], F[1, 2], F[2, 0], F[2, 1]]
        if any(v != 0.0 for v in plane) or F[2, 2] != 1.0:
            raise FieldError("load must be plane deformation: F13=F23=F31=F32=0, F33=1")
        F = F.copy()
        F.setflags(write=False)
        object.__setattr__(self, "Fbar", F)

    @classmethod
    def uniaxial(cls, f22: float = 1.004) -> "LoadCase":
        return cls(np.diag([1.0, f22, 1.0]))


@dataclass(frozen=True)
class Sample:
    """A converged equilibrium solve: inputs, stress in MPa, and diagnostics."""

    material: MaterialField
    load: LoadCase
    P_dat: TensorField
    residual: float
    iterations: int
    deformation: TensorField = field(repr=False, default=None)
    residual_history: tuple = field(repr=False, default=())


def green_strain(F: np.ndarray) -> np.ndarray:
    """E = (F^T F - I) / 2, constructed symmetric."""
    F = np.asarray(F, dtype=np.float64)
    E = 0.5 * (F.T @ F - np.eye(3))
    return 0.5 * (E + E.T)


def svk_stress(F: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """First Piola-Kirchhoff stress P = lam*tr(E)*F + 2*mu*F@E for one point."""
    F = np.asarray(F, dtype=np.float64)
    E = green_strain(F)
    return lam * np.trace(E) * F + 2.0 * mu * F @ E


def _field_norms(P: np.ndarray) -> tuple[float, float]:
    """RMS Frobenius norms of the fluctuation and mean parts of a stress field."""
    mean = P.mean(axis=(2, 3))
    fluct = P - mean[:, :, None, None]
    nf = float(np.sqrt(np.mean(np.sum(fluct**2, axis=(0, 1)))))
    nm = float(np.sqrt(np.sum(mean**2)))
    return nf, nm


def equilibrium_residual(P: TensorField) -> float:
    """Relative equilibrium residual of a stress field.

    RMS of |div P| over the grid, normalized by (2*pi/l) times the sum of
    the fluctuation and mean Frobenius norms of P.  Dimensionless.
    """
    d = spectral_div(P).comps
    num = float(np.sqrt(np.mean(np.sum(d**2, axis=0))))
    nf, nm = _field_norms(P.comps)
    den = (2.0 * np.pi / P.grid.l) * (nf + nm)
    if den == 0.0:
        return 0.0
    return num / den


def _acoustic_inverse(grid: GridSpec, lam0: float, mu0: float) -> np.ndarray:
    """Inverse acoustic tensor of the reference medium on the half spectrum.

    A_ik = mu0*|k|^2 delta_ik + (lam0+mu0) k_i k_k; the inverse is assembled
    from its transverse/longitudinal split and zeroed where |k| = 0.
    """
    k1, k2 = wavenumbers(grid)
    kk1 = np.broadcast_to(k1[:, None], (k1.size, k2.size))
    kk2 = np.broadcast_to(k2[None, :], (k1.size, k2.size))
    ksq = kk1**2 + kk2**2
    safe = np.where(ksq == 0.0, 1.0, ksq)
    n1 = kk1 / np.sqrt(safe)
    n2 = kk2 / np.sqrt(safe)
    alpha = (lam0 + mu0) / (mu0 * (lam0 + 2.0 * mu0))
    ainv = np.zeros((k1.size, k2.size, 3, 3))
    for i in range(3):
        ainv[:, :, i, i] = 1.0 / (mu0 * safe)
    nvec = (n1, n2, np.zeros_like(n1))
    for i in range(3):
        for j in range(3):
            ainv[:, :, i, j] -= alpha / safe * nvec[i] * nvec[j]
    ainv[ksq == 0.0] = 0.0
    return ainv


def _reference_polarization(P: np.ndarray, F: np.ndarray, lam0: float, mu0: float) -> np.ndarray:
    """tau = P - C0 : F for the isotropic reference stiffness C0."""
    trF = F[0, 0] + F[1, 1] + F[2, 2]
    eye_term = np.zeros_like(F)
    for i in range(3):
        eye_term[i, i] = lam0 * trF
    return P - eye_term - mu0 * (F + F.transpose(1, 0, 2, 3))


def solve_equilibrium(
    material: MaterialField,
    load: LoadCase,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> Sample:
    """Drive div P to zero under a prescribed mean deformation.

    Fixed-point iteration with a homogeneous reference medium (lambda0, mu0
    at the midpoint of the per-pixel moduli ranges): evaluate the stress,
    form the polarization against the reference stiffness, and project the
    deformation-gradient fluctuation through the reference Green operator.
    Steps that would raise the residual are backtracked by halving; failure
    to decrease at the smallest step, or exhausting max_iter, raises
    ConvergenceError with the residual history.

    Returns a Sample whose stress is in MPa and whose deformation field has
    mean exactly equal to the prescribed load (the zero mode is pinned).
    """
    grid = material.grid
    lam0 = 0.5 * (material.lam.min() + material.lam.max())
    mu0 = 0.5 * (material.mu.min() + material.mu.max())
    ainv = _acoustic_inverse(grid, lam0, mu0)
    k1, k2 = wavenumbers(grid)

    F = np.broadcast_to(load.Fbar[:, :, None, None], (3, 3, grid.n1, grid.n2)).copy()

    def residual_of(Fc: np.ndarray) -> tuple[float, np.ndarray]:
        P = backends.svk_stress_field(Fc, material.lam, material.mu)
        return equilibrium_residual(TensorField(grid, P)), P

    res, P = residual_of(F)
    history = [res]
    while res > tol:
        if len(history) > max_iter:
            raise ConvergenceError(
                f"no convergence after {max_iter} iterations (residual {res:.3e})", history
            )
        tau = _reference_polarization(P, F, lam0, mu0)
        tau_hat = _rfft2n(tau, grid)
        dF_hat = backends.green_apply(tau_hat, ainv, k1, k2)
        F_prop = load.Fbar[:, :, None, None] + _irfft2n(dF_hat, grid)

        step = 1.0
        while True:
            F_try = F + step * (F_prop - F) if step != 1.0 else F_prop
            res_try, P_try = residual_of(F_try)
            if res_try < res:
                break
            step *= 0.5
            if step < 2.0**-20:
                raise ConvergenceError(
                    f"stalled at residual {res:.3e} (tolerance {tol:.3e})", history
                )
        F, res, P = F_try, res_try, P_try
        history.append(res)

    # iteration count = residual evaluations along the accepted path, so the
    # homogeneous case (already in equilibrium) reports a single iteration
    return Sample(
        material=material,
        load=load,
        P_dat=TensorField(grid, P * GPA_TO_MPA),
        residual=res,
        iterations=len(history),
        deformation=TensorField(grid, F),
        residual_history=tuple(history),
    )
