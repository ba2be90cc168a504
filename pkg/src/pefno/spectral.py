"""Half-spectrum real DFT and Fourier-space differential operators.

Conventions
-----------
* Forward transform is normalized by 1/(n1*n2), so the (0, 0) coefficient
  equals the field mean and coefficients match continuum Fourier-series
  coefficients of band-limited fields at any resolution.
* Coefficients of a real (n1, n2) channel are stored on the half spectrum
  of shape (n1/2 + 1, n2): axis 0 holds kappa1 in {0..n1/2}, axis 1 holds
  kappa2 in FFT order, i.e. the signed set {-n2/2..n2/2-1}.
* Rows kappa1 in {0, n1/2} carry an internal conjugate symmetry in kappa2
  (they are their own mirror); the inverse transform validates it.
* Differentiation multiplies by i*k with k_d = 2*pi*kappa_d/l and the
  factor zeroed at the Nyquist index of either axis: the Nyquist mode of a
  real field has no well-defined odd derivative, and zeroing it keeps
  every operator output exactly real and div(curl(.)) identically zero.

All operators are pure functions; nothing here owns shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldError, TensorField, VectorField
from .grid import GridError, GridSpec


class SpectrumError(ValueError):
    """Raised for half-spectrum data whose symmetry invariants are broken."""


class LayoutError(ValueError):
    """Raised when a potential field violates its required sparsity layout."""


# --------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------


def _rfft2n(a: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Normalized forward transform of (..., n1, n2) real data."""
    return np.fft.rfftn(a, axes=(-1, -2)) / grid.npoints


def _irfft2n(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse of :func:`_rfft2n`; assumes a symmetry-valid half spectrum."""
    return np.fft.irfftn(c * grid.npoints, s=(grid.n2, grid.n1), axes=(-1, -2))


@dataclass(frozen=True)
class HalfSpectrum:
    """Complex coefficients of real channels, shape (..., n1/2 + 1, n2)."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        h = self.grid.n1 // 2 + 1
        if c.shape[-2:] != (h, self.grid.n2):
            raise SpectrumError(
                f"coefficients must end in shape ({h}, {self.grid.n2}), got {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def kappa1(self) -> np.ndarray:
        return np.arange(self.grid.n1 // 2 + 1)

    @property
    def kappa2(self) -> np.ndarray:
        return np.fft.fftfreq(self.grid.n2, 1.0 / self.grid.n2).astype(np.int64)

    def mean(self) -> np.ndarray:
        """Field mean per channel (the kappa = 0 coefficient, real part)."""
        return self.coeffs[..., 0, 0].real


def rdft2_forward(grid: GridSpec, f: np.ndarray) -> HalfSpectrum:
    """Forward half-spectrum transform of one or more real channels.

    f has shape (..., n1, n2).  Coefficients are 1/(n1*n2)-normalized, so
    coeffs[..., 0, 0] is the channel mean.
    """
    a = np.asarray(f, dtype=np.float64)
    if a.shape[-2:] != grid.shape:
        raise GridError(f"channel shape {a.shape[-2:]} does not match grid {grid.shape}")
    return HalfSpectrum(grid, _rfft2n(a, grid))


def symmetry_violation(spec: HalfSpectrum) -> float:
    """Largest violation of the internal conjugate symmetry of the rows
    kappa1 = 0 and kappa1 = n1/2 (absolute)."""
    c = spec.coeffs
    rev = (-np.arange(spec.grid.n2)) % spec.grid.n2
    v = 0.0
    for row in (0, spec.grid.n1 // 2):
        v = max(v, np.abs(c[..., row, :] - np.conj(c[..., row, rev])).max())
    return float(v)


def rdft2_inverse(spec: HalfSpectrum) -> np.ndarray:
    """Reconstruct the real channels from a half spectrum.

    Raises SpectrumError if the self-conjugate rows violate their internal
    symmetry beyond 1e-9 (scaled by the coefficient magnitude); such a
    spectrum does not describe a real field.
    """
    c = spec.coeffs
    scale = max(1.0, float(np.abs(c).max())) if c.size else 1.0
    v = symmetry_violation(spec)
    if v > 1e-9 * scale:
        raise SpectrumError(
            f"half spectrum violates conjugate symmetry by {v:.3e} (tolerance {1e-9 * scale:.3e})"
        )
    return _irfft2n(c, spec.grid)


# --------------------------------------------------------------------------
# Wavenumbers and operator tables
# --------------------------------------------------------------------------


def wavenumbers(grid: GridSpec, zero_nyquist: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Signed physical wavenumbers k_d = 2*pi*kappa_d/l for the half spectrum.

    Returns (k1, k2) with shapes (n1/2+1,) and (n2,).  With zero_nyquist
    (the default used by every differential operator) the kappa = n/2
    entries are set to zero.
    """
    two_pi_l = 2.0 * np.pi / grid.l
    k1 = np.arange(grid.n1 // 2 + 1, dtype=np.float64) * two_pi_l
    k2 = np.fft.fftfreq(grid.n2, 1.0 / grid.n2) * two_pi_l
    if zero_nyquist:
        k1[grid.n1 // 2] = 0.0
        k2[grid.n2 // 2] = 0.0
    return k1, k2


def _axt_ik(grid: GridSpec) -> np.ndarray:
    """The mode-wise matrix axt(i*k) for k = (k1, k2, 0), shape (3, 3, H, n2).

    axt(a) is the skew tensor with axt(a) b = a x b.
    """
    k1, k2 = wavenumbers(grid)
    h, n2 = k1.size, k2.size
    ax = np.zeros((3, 3, h, n2), dtype=np.complex128)
    ik1 = 1j * np.broadcast_to(k1[:, None], (h, n2))
    ik2 = 1j * np.broadcast_to(k2[None, :], (h, n2))
    ax[0, 2] = ik2
    ax[1, 2] = -ik1
    ax[2, 0] = -ik2
    ax[2, 1] = ik1
    return ax


# --------------------------------------------------------------------------
# Divergence
# --------------------------------------------------------------------------


def div_channels(grid: GridSpec, P: np.ndarray) -> np.ndarray:
    """Divergence of (..., 3, 3, n1, n2) tensor channels, (..., 3, n1, n2)."""
    k1, k2 = wavenumbers(grid)
    Ph = _rfft2n(P, grid)
    d = 1j * (Ph[..., :, 0, :, :] * k1[:, None] + Ph[..., :, 1, :, :] * k2[None, :])
    return _irfft2n(d, grid)


def div_adjoint_channels(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`div_channels` as a real-linear map; mode-wise it
    multiplies by the conjugated i*k factors.  (..., 3, n1, n2) in,
    (..., 3, 3, n1, n2) out."""
    Gh = _rfft2n(np.asarray(g, dtype=np.float64), grid)
    k1, k2 = wavenumbers(grid)
    out = np.zeros(Gh.shape[:-3] + (3, 3) + Gh.shape[-2:], dtype=np.complex128)
    out[..., :, 0, :, :] = -1j * k1[:, None] * Gh
    out[..., :, 1, :, :] = -1j * k2[None, :] * Gh
    return _irfft2n(out, grid)


def spectral_div(P: TensorField) -> VectorField:
    """Row-wise divergence (div P)_r = P_r1,1 + P_r2,2 evaluated spectrally.

    The kappa = 0 mode carries the mean and contributes nothing; the third
    component is identically zero for plane-deformation stress because its
    row vanishes.
    """
    return VectorField(P.grid, div_channels(P.grid, P.comps))


def divergence_adjoint(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`spectral_div`: (3, n1, n2) in, (3, 3, n1, n2) out."""
    return div_adjoint_channels(grid, g)


# --------------------------------------------------------------------------
# Curl of a stress potential
# --------------------------------------------------------------------------

# Slots of the reduced potential layout: the mean part lives in the in-plane
# block and the 33 entry, the fluctuation part in the 13, 23, 31, 32 slots.
POTENTIAL_MEAN_SLOTS = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 2))
POTENTIAL_FLUCT_SLOTS = ((0, 2), (1, 2), (2, 0), (2, 1))


def validate_potential_layout(A: TensorField, tol: float = 1e-12) -> None:
    """Check the reduced potential layout: mean-part slots spatially constant,
    fluctuation slots zero-mean, remaining slots unconstrained by zero value
    (they must be exactly absent from both groups)."""
    scale = max(1.0, float(np.abs(A.comps).max()))
    for r, c in POTENTIAL_MEAN_SLOTS:
        ch = A.comps[r, c]
        dev = np.abs(ch - ch.mean()).max()
        if dev > tol * scale:
            raise LayoutError(
                f"potential slot ({r + 1},{c + 1}) must be spatially constant; "
                f"fluctuation {dev:.3e} exceeds {tol * scale:.3e}"
            )
    for r, c in POTENTIAL_FLUCT_SLOTS:
        m = abs(float(A.comps[r, c].mean()))
        if m > tol * scale:
            raise LayoutError(
                f"potential slot ({r + 1},{c + 1}) must have zero mean; "
                f"mean {m:.3e} exceeds {tol * scale:.3e}"
            )


def curl_channels(grid: GridSpec, A: np.ndarray) -> np.ndarray:
    """Curl transform of (..., 3, 3, n1, n2) potential channels: mean
    passthrough at kappa = 0, A_hat(k) (axt i k)^T elsewhere."""
    Ah = _rfft2n(A, grid)
    ax = _axt_ik(grid)
    Ph = np.einsum("...imxy,jmxy->...ijxy", Ah, ax)
    Ph[..., :, :, 0, 0] = Ah[..., :, :, 0, 0]
    return _irfft2n(Ph, grid)


def curl_adjoint_channels(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`curl_channels` as a real-linear map, same shapes."""
    Gh = _rfft2n(np.asarray(g, dtype=np.float64), grid)
    ax = _axt_ik(grid)
    out = np.einsum("jmxy,...ijxy->...imxy", np.conj(ax), Gh)
    out[..., :, :, 0, 0] = Gh[..., :, :, 0, 0]
    return _irfft2n(out, grid)


def curl_potential(A: TensorField, validate: bool = True) -> TensorField:
    """Stress from its tensor potential: mean passthrough at kappa = 0 and
    A_hat(k) (axt i k)^T at every other mode.

    The output is divergence-free by construction (the same i*k tables are
    annihilated by :func:`spectral_div`) and has plane-deformation layout
    for inputs in the reduced potential layout.
    """
    if validate:
        validate_potential_layout(A)
    return TensorField(A.grid, curl_channels(A.grid, A.comps))


def curl_potential_adjoint(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    """Adjoint of the potential-to-stress map: (3, 3, n1, n2) both ways."""
    return curl_adjoint_channels(grid, g)


# --------------------------------------------------------------------------
# Incompatibility operator
# --------------------------------------------------------------------------


def inc_potential(B: TensorField) -> TensorField:
    """Symmetric divergence-free field from a symmetric potential:
    (axt i k) B_hat(k) (axt i k)^T per mode, mean passthrough at kappa = 0.

    Rejects input that is not symmetric to 1e-12 (scaled).  The output is
    symmetrized mode-wise, making it exactly symmetric channel-by-channel.
    """
    asym = np.abs(B.comps - B.comps.transpose(1, 0, 2, 3)).max()
    scale = max(1.0, float(np.abs(B.comps).max()))
    if asym > 1e-12 * scale:
        raise FieldError(f"potential must be symmetric; asymmetry {asym:.3e}")
    grid = B.grid
    Bs = 0.5 * (B.comps + B.comps.transpose(1, 0, 2, 3))
    Bh = _rfft2n(Bs, grid)
    ax = _axt_ik(grid)
    Th = np.einsum("imxy,mnxy,jnxy->ijxy", ax, Bh, ax)
    Th = 0.5 * (Th + Th.transpose(1, 0, 2, 3))
    Th[:, :, 0, 0] = Bh[:, :, 0, 0]
    return TensorField(grid, _irfft2n(Th, grid))
