"""Hot numeric kernels with numba and pure-numpy implementations.

The active implementation is chosen once at import time from the
PEFNO_BACKEND environment variable:

    PEFNO_BACKEND=numba   JIT kernels (default when numba imports cleanly)
    PEFNO_BACKEND=numpy   vectorized numpy fallbacks

Both paths compute the same quantities in float64; they may differ in the
last bits because summation order differs.  Each run is deterministic for
a fixed backend.  ``benchmarks/bench_backends.py`` times the two paths
against each other.
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("PEFNO_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"PEFNO_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    _HAVE_NUMBA = False
else:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        _HAVE_NUMBA = False


def backend_name() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# Saint Venant-Kirchhoff stress, evaluated per pixel
# --------------------------------------------------------------------------

_EYE3 = np.eye(3)


def svk_stress_field_numpy(F: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """P = lam*tr(E)*F + 2*mu*F@E with E = (F^T F - I)/2, per pixel.

    F: (3, 3, n1, n2); lam, mu: (n1, n2).  Returns (3, 3, n1, n2).
    """
    E = 0.5 * (np.einsum("ki...,kj...->ij...", F, F) - _EYE3[:, :, None, None])
    trE = E[0, 0] + E[1, 1] + E[2, 2]
    FE = np.einsum("ik...,kj...->ij...", F, E)
    return lam * trE * F + 2.0 * mu * FE


if _HAVE_NUMBA:

    @njit(cache=True)
    def _svk_stress_field_numba(F, lam, mu):
        n1, n2 = lam.shape
        P = np.empty((3, 3, n1, n2))
        for a in range(n1):
            for b in range(n2):
                # E = (F^T F - I)/2
                E00 = 0.0
                E01 = 0.0
                E02 = 0.0
                E11 = 0.0
                E12 = 0.0
                E22 = 0.0
                for k in range(3):
                    E00 += F[k, 0, a, b] * F[k, 0, a, b]
                    E01 += F[k, 0, a, b] * F[k, 1, a, b]
                    E02 += F[k, 0, a, b] * F[k, 2, a, b]
                    E11 += F[k, 1, a, b] * F[k, 1, a, b]
                    E12 += F[k, 1, a, b] * F[k, 2, a, b]
                    E22 += F[k, 2, a, b] * F[k, 2, a, b]
                E00 = 0.5 * (E00 - 1.0)
                E11 = 0.5 * (E11 - 1.0)
                E22 = 0.5 * (E22 - 1.0)
                E01 *= 0.5
                E02 *= 0.5
                E12 *= 0.5
                trE = E00 + E11 + E22
                la = lam[a, b]
                tm = 2.0 * mu[a, b]
                for i in range(3):
                    Fi0 = F[i, 0, a, b]
                    Fi1 = F[i, 1, a, b]
                    Fi2 = F[i, 2, a, b]
                    P[i, 0, a, b] = la * trE * Fi0 + tm * (Fi0 * E00 + Fi1 * E01 + Fi2 * E02)
                    P[i, 1, a, b] = la * trE * Fi1 + tm * (Fi0 * E01 + Fi1 * E11 + Fi2 * E12)
                    P[i, 2, a, b] = la * trE * Fi2 + tm * (Fi0 * E02 + Fi1 * E12 + Fi2 * E22)
        return P

    def svk_stress_field(F: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
        return _svk_stress_field_numba(
            np.ascontiguousarray(F), np.ascontiguousarray(lam), np.ascontiguousarray(mu)
        )

else:
    svk_stress_field = svk_stress_field_numpy


# --------------------------------------------------------------------------
# Periodic nearest-seed assignment for Voronoi microstructures
# --------------------------------------------------------------------------


def voronoi_labels_numpy(n1: int, n2: int, seeds: np.ndarray, l: float) -> np.ndarray:
    """Label each pixel with the index of its nearest seed under wrap-around
    distance on the periodic cell.  Ties resolve to the lowest seed index.
    Seeds may lie outside [0, l); they are wrapped into the cell first."""
    s = np.asarray(seeds, dtype=np.float64) % l
    x1 = (np.arange(n1) / n1 * l)[:, None, None]
    x2 = (np.arange(n2) / n2 * l)[None, :, None]
    d1 = np.abs(x1 - s[None, None, :, 0])
    d1 = np.minimum(d1, l - d1)
    d2 = np.abs(x2 - s[None, None, :, 1])
    d2 = np.minimum(d2, l - d2)
    return np.argmin(d1 * d1 + d2 * d2, axis=2).astype(np.int64)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _voronoi_labels_numba(n1, n2, seeds, l):
        g = seeds.shape[0]
        labels = np.empty((n1, n2), dtype=np.int64)
        for a in range(n1):
            x1 = a / n1 * l
            for b in range(n2):
                x2 = b / n2 * l
                best = 0
                best_d = np.inf
                for s in range(g):
                    d1 = abs(x1 - seeds[s, 0])
                    if l - d1 < d1:
                        d1 = l - d1
                    d2 = abs(x2 - seeds[s, 1])
                    if l - d2 < d2:
                        d2 = l - d2
                    d = d1 * d1 + d2 * d2
                    if d < best_d:
                        best_d = d
                        best = s
                labels[a, b] = best
        return labels

    def voronoi_labels(n1: int, n2: int, seeds: np.ndarray, l: float) -> np.ndarray:
        wrapped = np.ascontiguousarray(np.asarray(seeds, dtype=np.float64) % l)
        return _voronoi_labels_numba(n1, n2, wrapped, l)

else:
    voronoi_labels = voronoi_labels_numpy


# --------------------------------------------------------------------------
# Green-operator application for the equilibrium solver
# --------------------------------------------------------------------------


def green_apply_numpy(
    tau_hat: np.ndarray, ainv: np.ndarray, k1: np.ndarray, k2: np.ndarray
) -> np.ndarray:
    """Fluctuation update -(A^-1 (tau_hat k)) (x) k on the half spectrum.

    tau_hat: (3, 3, H, n2) complex; ainv: (H, n2, 3, 3) real acoustic-tensor
    inverse (zeroed at k = 0); k1: (H,), k2: (n2,) signed wavenumbers with
    Nyquist entries already zeroed.  Returns (3, 3, H, n2) complex.
    """
    b0 = tau_hat[:, 0] * k1[:, None] + tau_hat[:, 1] * k2[None, :]
    u = np.einsum("xyim,mxy->ixy", ainv, b0)
    out = np.zeros_like(tau_hat)
    out[:, 0] = -u * k1[:, None]
    out[:, 1] = -u * k2[None, :]
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _green_apply_numba(tau_hat, ainv, k1, k2):
        H = k1.shape[0]
        n2 = k2.shape[0]
        out = np.zeros((3, 3, H, n2), dtype=np.complex128)
        for a in range(H):
            ka = k1[a]
            for b in range(n2):
                kb = k2[b]
                b0 = tau_hat[0, 0, a, b] * ka + tau_hat[0, 1, a, b] * kb
                b1 = tau_hat[1, 0, a, b] * ka + tau_hat[1, 1, a, b] * kb
                b2 = tau_hat[2, 0, a, b] * ka + tau_hat[2, 1, a, b] * kb
                for i in range(3):
                    ui = ainv[a, b, i, 0] * b0 + ainv[a, b, i, 1] * b1 + ainv[a, b, i, 2] * b2
                    out[i, 0, a, b] = -ui * ka
                    out[i, 1, a, b] = -ui * kb
        return out

    def green_apply(tau_hat, ainv, k1, k2):
        return _green_apply_numba(
            np.ascontiguousarray(tau_hat),
            np.ascontiguousarray(ainv),
            np.ascontiguousarray(k1),
            np.ascontiguousarray(k2),
        )

else:
    green_apply = green_apply_numpy


# --------------------------------------------------------------------------
# GELU activation (exact erf form) and its derivative
# --------------------------------------------------------------------------

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu_forward_numpy(x: np.ndarray) -> np.ndarray:
    from scipy.special import erf

    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_vjp_numpy(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    from scipy.special import erf

    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return g * (cdf + x * pdf)


if _HAVE_NUMBA:
    import math

    @njit(cache=True)
    def _gelu_forward_numba(x):
        flat = x.reshape(-1)
        out = np.empty_like(flat)
        for i in range(flat.size):
            v = flat[i]
            out[i] = 0.5 * v * (1.0 + math.erf(v / _SQRT2))
        return out.reshape(x.shape)

    @njit(cache=True)
    def _gelu_vjp_numba(x, g):
        fx = x.reshape(-1)
        fg = g.reshape(-1)
        out = np.empty_like(fx)
        for i in range(fx.size):
            v = fx[i]
            cdf = 0.5 * (1.0 + math.erf(v / _SQRT2))
            pdf = _INV_SQRT_2PI * math.exp(-0.5 * v * v)
            out[i] = fg[i] * (cdf + v * pdf)
        return out.reshape(x.shape)

    def gelu_forward(x):
        return _gelu_forward_numba(np.ascontiguousarray(x))

    def gelu_vjp(x, g):
        return _gelu_vjp_numba(np.ascontiguousarray(x), np.ascontiguousarray(g))

else:
    gelu_forward = gelu_forward_numpy
    gelu_vjp = gelu_vjp_numpy


# --------------------------------------------------------------------------
# Spectral-convolution channel mixing (FNO inner kernel) and its adjoints
# --------------------------------------------------------------------------


def mix_forward_numpy(X: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Y[b,o,k] = sum_i R[o,i,k] X[b,i,k] on the retained mode block."""
    return np.einsum("oimk,bimk->bomk", R, X)


def mix_adjoint_input_numpy(gY: np.ndarray, R: np.ndarray) -> np.ndarray:
    """gX[b,i,k] = sum_o conj(R[o,i,k]) gY[b,o,k]."""
    return np.einsum("oimk,bomk->bimk", np.conj(R), gY)


def mix_gradient_weights_numpy(X: np.ndarray, gY: np.ndarray) -> np.ndarray:
    """gR[o,i,k] = sum_b gY[b,o,k] conj(X[b,i,k])."""
    return np.einsum("bomk,bimk->oimk", gY, np.conj(X))


if _HAVE_NUMBA:

    @njit(cache=True)
    def _mix_forward_numba(X, R):
        B, C, M, K = X.shape
        O = R.shape[0]
        Y = np.zeros((B, O, M, K), dtype=np.complex128)
        for b in range(B):
            for o in range(O):
                for i in range(C):
                    for m in range(M):
                        for k in range(K):
                            Y[b, o, m, k] += R[o, i, m, k] * X[b, i, m, k]
        return Y

    @njit(cache=True)
    def _mix_adjoint_input_numba(gY, R):
        B, O, M, K = gY.shape
        C = R.shape[1]
        gX = np.zeros((B, C, M, K), dtype=np.complex128)
        for b in range(B):
            for i in range(C):
                for o in range(O):
                    for m in range(M):
                        for k in range(K):
                            gX[b, i, m, k] += np.conj(R[o, i, m, k]) * gY[b, o, m, k]
        return gX

    @njit(cache=True)
    def _mix_gradient_weights_numba(X, gY):
        B, C, M, K = X.shape
        O = gY.shape[1]
        gR = np.zeros((O, C, M, K), dtype=np.complex128)
        for o in range(O):
            for i in range(C):
                for b in range(B):
                    for m in range(M):
                        for k in range(K):
                            gR[o, i, m, k] += gY[b, o, m, k] * np.conj(X[b, i, m, k])
        return gR

    def mix_forward(X, R):
        return _mix_forward_numba(np.ascontiguousarray(X), np.ascontiguousarray(R))

    def mix_adjoint_input(gY, R):
        return _mix_adjoint_input_numba(np.ascontiguousarray(gY), np.ascontiguousarray(R))

    def mix_gradient_weights(X, gY):
        return _mix_gradient_weights_numba(np.ascontiguousarray(X), np.ascontiguousarray(gY))

else:
    mix_forward = mix_forward_numpy
    mix_adjoint_input = mix_adjoint_input_numpy
    mix_gradient_weights = mix_gradient_weights_numpy
