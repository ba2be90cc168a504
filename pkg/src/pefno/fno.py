"""Fourier neural operator with three output heads and exact reverse-mode
gradients.

The operator is a lift layer, n_layers hidden blocks (spectral convolution
on a retained low-mode block plus a pointwise affine bypass, GELU), and an
affine head.  Heads:

* ``guided`` / ``informed``: five channels mapped directly to the nonzero
  plane-deformation stress components P11, P12, P21, P22, P33.
* ``encoded``: nine potential channels; the five mean slots are projected
  to their spatial average, the four fluctuation slots to zero mean, and
  the assembled potential passes through the curl transform.  The stress
  output is then divergence-free for any parameter values, trained or not.

Every building block carries a hand-written adjoint.  Spectral blocks are
parameterized on kappa1 in [0, modes) x kappa2 in (-modes, modes), with
the kappa1 = 0 row projected onto its conjugate-symmetric part so the
retained spectrum always describes a real field.  All arithmetic is
float64/complex128, single-threaded and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backends
from .container import FormatError, read_channels, write_channels
from .grid import GridSpec
from .manifests import read_manifest, write_manifest
from .spectral import curl_adjoint_channels, curl_channels

HEADS = ("guided", "informed", "encoded")

# Channel order of the direct heads and of the encoded head's mean block.
STRESS_SLOTS = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 2))
# Channel order of the encoded head's fluctuation block.
POTENTIAL_SLOTS = ((0, 2), (1, 2), (2, 0), (2, 1))


class ConfigError(ValueError):
    """Raised for invalid operator configurations."""


@dataclass(frozen=True)
class FnoConfig:
    n_layers: int = 4
    width: int = 20
    modes: int = 12
    head: str = "guided"
    activation: str = "gelu"
    in_channels: int = 2

    def __post_init__(self) -> None:
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.activation != "gelu":
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.n_layers < 1 or self.width < 1 or self.modes < 1 or self.in_channels < 1:
            raise ConfigError("n_layers, width, modes and in_channels must all be >= 1")

    @property
    def out_channels(self) -> int:
        return 9 if self.head == "encoded" else 5

    def check_grid(self, grid: GridSpec) -> None:
        if self.modes > min(grid.n1, grid.n2) // 2:
            raise ConfigError(f"modes={self.modes} exceeds n/2 for grid {grid.n1}x{grid.n2}")


def parameter_count(config: FnoConfig) -> int:
    """Total scalar parameters (complex entries count twice); a pure
    function of the configuration."""
    w, m = config.width, config.modes
    lift = w * config.in_channels + w
    per_layer = 2 * (w * w * m * (2 * m - 1)) + w * w + w
    head = config.out_channels * w + config.out_channels
    return lift + config.n_layers * per_layer + head


@dataclass
class FnoModel:
    """Parameters of one operator plus fixed output-normalization constants.

    out_scale/out_shift map the five raw stress (or mean-potential)
    channels to physical units; fluct_scale sets the magnitude of the
    encoded head's fluctuation potential.  They are dataset statistics
    recorded at training time, not trained parameters.
    """

    config: FnoConfig
    lift_w: np.ndarray
    lift_b: np.ndarray
    spec_w: list
    byp_w: list
    byp_b: list
    head_w: np.ndarray
    head_b: np.ndarray
    out_scale: np.ndarray = field(default_factory=lambda: np.ones(5))
    out_shift: np.ndarray = field(default_factory=lambda: np.zeros(5))
    fluct_scale: float = 1.0

    def parameters(self) -> dict[str, np.ndarray]:
        """Ordered name -> array view of every trainable parameter."""
        params = {"lift.w": self.lift_w, "lift.b": self.lift_b}
        for t in range(self.config.n_layers):
            params[f"layer{t}.spec"] = self.spec_w[t]
            params[f"layer{t}.byp_w"] = self.byp_w[t]
            params[f"layer{t}.byp_b"] = self.byp_b[t]
        params["head.w"] = self.head_w
        params["head.b"] = self.head_b
        return params


def init_model(config: FnoConfig, rng_seed) -> FnoModel:
    """Deterministic initialization.

    Spectral weights: complex uniform in [-s, s]^2 with s = 1/(width*modes^2).
    Affine maps: Kaiming-style uniform with bound sqrt(6/fan_in), bias bound
    1/sqrt(fan_in).
    """
    rng = np.random.default_rng(rng_seed)
    w, m, k2 = config.width, config.modes, 2 * config.modes - 1

    def affine(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray]:
        bound = np.sqrt(6.0 / n_in)
        weight = rng.uniform(-bound, bound, size=(n_out, n_in))
        bias = rng.uniform(-1.0, 1.0, size=n_out) / np.sqrt(n_in)
        return weight, bias

    lift_w, lift_b = affine(w, config.in_channels)
    spec_w, byp_w, byp_b = [], [], []
    s = 1.0 / (w * m * m)
    for _ in range(config.n_layers):
        re = rng.uniform(-s, s, size=(w, w, m, k2))
        im = rng.uniform(-s, s, size=(w, w, m, k2))
        spec_w.append(re + 1j * im)
        bw, bb = affine(w, w)
        byp_w.append(bw)
        byp_b.append(bb)
    head_w, head_b = affine(config.out_channels, w)
    return FnoModel(config, lift_w, lift_b, spec_w, byp_w, byp_b, head_w, head_b)


# --------------------------------------------------------------------------
# Differentiable building blocks
# --------------------------------------------------------------------------


_gelu = backends.gelu_forward
_gelu_vjp = backends.gelu_vjp


def _affine(weight: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    b, c, n1, n2 = x.shape
    y = (weight @ x.reshape(b, c, n1 * n2)).reshape(b, weight.shape[0], n1, n2)
    y += bias[None, :, None, None]
    return y


def _affine_vjp(weight, x, g):
    b, o, n1, n2 = g.shape
    c = x.shape[1]
    g2 = g.transpose(1, 0, 2, 3).reshape(o, -1)
    x2 = x.transpose(1, 0, 2, 3).reshape(c, -1)
    g_w = g2 @ x2.T
    g_b = g2.sum(axis=1)
    g_x = (weight.T @ g.reshape(b, o, n1 * n2)).reshape(b, c, n1, n2)
    return g_w, g_b, g_x


def _block_cols(n2: int, m: int) -> np.ndarray:
    """Half-spectrum column indices for kappa2 in {0..m-1} u {-(m-1)..-1}."""
    return np.concatenate([np.arange(m), np.arange(n2 - m + 1, n2)])


def _sym_row0(R: np.ndarray) -> np.ndarray:
    """Project the kappa1 = 0 row of block weights onto its conjugate-
    symmetric part.  Idempotent and self-adjoint, so it serves both the
    forward parameterization and the gradient routing."""
    K = R.shape[-1]
    rev = (-np.arange(K)) % K
    out = R.copy()
    out[..., 0, :] = 0.5 * (R[..., 0, :] + np.conj(R[..., 0, rev]))
    return out


class _SpectralConv:
    """One spectral convolution: gather the retained block of the half
    spectrum, mix channels with complex weights, scatter back, invert."""

    def __init__(self, grid: GridSpec, modes: int):
        self.grid = grid
        self.m = modes
        self.cols = _block_cols(grid.n2, modes)
        # adjoint row weights of the normalized inverse transform: the
        # self-conjugate rows enter the full spectrum once, all others twice
        wrow = np.full(grid.n1 // 2 + 1, 2.0)
        wrow[0] = 1.0
        wrow[grid.n1 // 2] = 1.0
        self.wrow = wrow

    def _gather(self, C: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(C[:, :, : self.m][:, :, :, self.cols])

    def forward(self, x: np.ndarray, R: np.ndarray):
        grid = self.grid
        Rs = _sym_row0(R)
        Xb = self._gather(np.fft.rfftn(x, axes=(-1, -2)) / grid.npoints)
        Yb = backends.mix_forward(Xb, Rs)
        Y = np.zeros((x.shape[0], R.shape[0], grid.n1 // 2 + 1, grid.n2), dtype=np.complex128)
        Y[np.ix_(range(x.shape[0]), range(R.shape[0]), range(self.m), self.cols)] = Yb
        y = np.fft.irfftn(Y * grid.npoints, s=(grid.n2, grid.n1), axes=(-1, -2))
        return y, (Xb, Rs)

    def backward(self, cache, g: np.ndarray):
        """Returns (g_R, g_x) for an upstream gradient of the layer output."""
        Xb, Rs = cache
        grid = self.grid
        gYb = self._gather(np.fft.rfftn(g, axes=(-1, -2)) * self.wrow[:, None])
        g_R = _sym_row0(backends.mix_gradient_weights(Xb, gYb))
        gXb = backends.mix_adjoint_input(gYb, Rs)
        # adjoint of gather(rfft(x)/N): the real part of the full inverse
        # transform of the unmirrored block, realized on the half spectrum
        # by halving the paired rows and conjugate-averaging the kappa1 = 0
        # row before a standard inverse
        batch, in_ch = gXb.shape[:2]
        Hb = _sym_row0(gXb)
        Hb[:, :, 1:, :] = 0.5 * gXb[:, :, 1:, :]
        H = np.zeros((batch, in_ch, grid.n1 // 2 + 1, grid.n2), dtype=np.complex128)
        H[np.ix_(range(batch), range(in_ch), range(self.m), self.cols)] = Hb
        g_x = np.fft.irfftn(H, s=(grid.n2, grid.n1), axes=(-1, -2))
        return g_R, g_x


# --------------------------------------------------------------------------
# Heads
# --------------------------------------------------------------------------


def _head_direct(model: FnoModel, u: np.ndarray) -> np.ndarray:
    """Five channels -> plane-deformation stress (B, 3, 3, n1, n2)."""
    batch, _, n1, n2 = u.shape
    P = np.zeros((batch, 3, 3, n1, n2))
    for c, (r, s) in enumerate(STRESS_SLOTS):
        P[:, r, s] = u[:, c] * model.out_scale[c] + model.out_shift[c]
    return P


def _head_direct_vjp(model: FnoModel, gP: np.ndarray) -> np.ndarray:
    gu = np.empty((gP.shape[0], 5) + gP.shape[-2:])
    for c, (r, s) in enumerate(STRESS_SLOTS):
        gu[:, c] = gP[:, r, s] * model.out_scale[c]
    return gu


def _head_encoded(model: FnoModel, grid: GridSpec, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nine channels -> (potential A, stress P), both (B, 3, 3, n1, n2).

    Mean slots are the spatial averages of their channels (so the operator
    stays resolution-agnostic); fluctuation slots are projected to zero
    mean.  The curl transform then yields an identically divergence-free
    stress with mean equal to the mean potential block.
    """
    batch, _, n1, n2 = u.shape
    A = np.zeros((batch, 3, 3, n1, n2))
    for c, (r, s) in enumerate(STRESS_SLOTS):
        abar = u[:, c].mean(axis=(-2, -1)) * model.out_scale[c] + model.out_shift[c]
        A[:, r, s] = abar[:, None, None]
    for c, (r, s) in enumerate(POTENTIAL_SLOTS):
        ch = u[:, 5 + c]
        A[:, r, s] = (ch - ch.mean(axis=(-2, -1), keepdims=True)) * model.fluct_scale
    P = curl_channels(grid, A)
    return A, P


def _head_encoded_vjp(model: FnoModel, grid: GridSpec, gP: np.ndarray) -> np.ndarray:
    gA = curl_adjoint_channels(grid, gP)
    npts = grid.npoints
    gu = np.empty((gP.shape[0], 9) + gP.shape[-2:])
    for c, (r, s) in enumerate(STRESS_SLOTS):
        total = gA[:, r, s].sum(axis=(-2, -1)) * model.out_scale[c]
        gu[:, c] = total[:, None, None] / npts
    for c, (r, s) in enumerate(POTENTIAL_SLOTS):
        gch = gA[:, r, s]
        gu[:, 5 + c] = (gch - gch.mean(axis=(-2, -1), keepdims=True)) * model.fluct_scale
    return gu


# --------------------------------------------------------------------------
# Forward / backward
# --------------------------------------------------------------------------


@dataclass
class ForwardResult:
    stress: np.ndarray  # (B, 3, 3, n1, n2), physical units
    potential: np.ndarray | None  # encoded head only
    cache: dict = field(repr=False, default=None)


def fno_forward(model: FnoModel, inputs: np.ndarray, grid: GridSpec) -> ForwardResult:
    """Evaluate the operator on a batch of input channel stacks.

    inputs: (B, in_channels, n1, n2) or a single (in_channels, n1, n2).
    Returns the stress (and, for the encoded head, the potential) along
    with the cache consumed by :func:`fno_backward`.
    """
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1] != model.config.in_channels or x.shape[-2:] != grid.shape:
        raise ConfigError(
            f"input shape {x.shape} does not match ({model.config.in_channels}, {grid.shape})"
        )
    model.config.check_grid(grid)
    conv = _SpectralConv(grid, model.config.modes)

    cache: dict = {"conv": conv, "grid": grid, "single": single}
    z = _affine(model.lift_w, model.lift_b, x)
    cache["x"] = x
    cache["z0"] = z
    layer_caches = []
    for t in range(model.config.n_layers):
        y_spec, spec_cache = conv.forward(z, model.spec_w[t])
        y_byp = _affine(model.byp_w[t], model.byp_b[t], z)
        pre = y_spec + y_byp
        layer_caches.append((z, spec_cache, pre))
        z = _gelu(pre)
    cache["layers"] = layer_caches
    cache["z_final"] = z
    u = _affine(model.head_w, model.head_b, z)
    cache["u"] = u

    if model.config.head == "encoded":
        A, P = _head_encoded(model, grid, u)
        return ForwardResult(stress=P, potential=A, cache=cache)
    P = _head_direct(model, u)
    return ForwardResult(stress=P, potential=None, cache=cache)


def fno_backward(model: FnoModel, result: ForwardResult, g_stress: np.ndarray) -> dict:
    """Exact parameter gradients for an upstream stress-space gradient.

    g_stress: (B, 3, 3, n1, n2) (or single-sample without the batch axis),
    d(loss)/d(stress) in the same units the forward pass emitted.  Returns
    a dict keyed like :meth:`FnoModel.parameters`.
    """
    cache = result.cache
    conv: _SpectralConv = cache["conv"]
    grid: GridSpec = cache["grid"]
    gP = np.asarray(g_stress, dtype=np.float64)
    if gP.ndim == 4:
        gP = gP[None]

    if model.config.head == "encoded":
        gu = _head_encoded_vjp(model, grid, gP)
    else:
        gu = _head_direct_vjp(model, gP)

    grads: dict[str, np.ndarray] = {}
    g_head_w, g_head_b, gz = _affine_vjp(model.head_w, cache["z_final"], gu)
    grads["head.w"] = g_head_w
    grads["head.b"] = g_head_b
    for t in reversed(range(model.config.n_layers)):
        z_in, spec_cache, pre = cache["layers"][t]
        g_pre = _gelu_vjp(pre, gz)
        g_R, g_x_spec = conv.backward(spec_cache, g_pre)
        g_bw, g_bb, g_x_byp = _affine_vjp(model.byp_w[t], z_in, g_pre)
        grads[f"layer{t}.spec"] = g_R
        grads[f"layer{t}.byp_w"] = g_bw
        grads[f"layer{t}.byp_b"] = g_bb
        gz = g_x_spec + g_x_byp
    g_lift_w, g_lift_b, _ = _affine_vjp(model.lift_w, cache["x"], gz)
    grads["lift.w"] = g_lift_w
    grads["lift.b"] = g_lift_b
    return grads


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


def save_checkpoint(directory: str | Path, model: FnoModel, extra: dict | None = None) -> Path:
    """One PEFNO1 container per parameter tensor plus a manifest with the
    configuration, normalization constants and any extra entries."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries: dict = {
        "format": "pefno-checkpoint-1",
        "fno.layers": model.config.n_layers,
        "fno.width": model.config.width,
        "fno.modes": model.config.modes,
        "fno.head": model.config.head,
        "fno.activation": model.config.activation,
        "fno.in_channels": model.config.in_channels,
        "norm.fluct_scale": model.fluct_scale,
    }
    for c in range(5):
        entries[f"norm.scale.{c}"] = float(model.out_scale[c])
        entries[f"norm.shift.{c}"] = float(model.out_shift[c])
    for name, arr in model.parameters().items():
        fname = name.replace(".", "_") + ".pefno"
        flat = np.ascontiguousarray(arr).view(np.float64).reshape(1, 1, -1)
        write_channels(directory / fname, flat)
        entries[f"param.{name}.file"] = fname
        entries[f"param.{name}.shape"] = "x".join(str(s) for s in arr.shape)
        entries[f"param.{name}.dtype"] = "complex128" if np.iscomplexobj(arr) else "float64"
    for k, v in (extra or {}).items():
        entries[str(k)] = v
    write_manifest(directory / "manifest.txt", entries)
    return directory


def load_checkpoint(directory: str | Path) -> FnoModel:
    directory = Path(directory)
    man = read_manifest(directory / "manifest.txt")
    if man.get("format") != "pefno-checkpoint-1":
        raise FormatError(f"{directory}: not a pefno checkpoint")
    config = FnoConfig(
        n_layers=int(man["fno.layers"]),
        width=int(man["fno.width"]),
        modes=int(man["fno.modes"]),
        head=man["fno.head"],
        activation=man["fno.activation"],
        in_channels=int(man["fno.in_channels"]),
    )

    def load_param(name: str) -> np.ndarray:
        fname = man[f"param.{name}.file"]
        shape = tuple(int(s) for s in man[f"param.{name}.shape"].split("x"))
        dtype = man[f"param.{name}.dtype"]
        _, _, flat = read_channels(directory / fname)
        arr = flat.reshape(-1)
        if dtype == "complex128":
            return np.ascontiguousarray(arr).view(np.complex128).reshape(shape)
        return arr.reshape(shape)

    spec_w = [load_param(f"layer{t}.spec") for t in range(config.n_layers)]
    byp_w = [load_param(f"layer{t}.byp_w") for t in range(config.n_layers)]
    byp_b = [load_param(f"layer{t}.byp_b") for t in range(config.n_layers)]
    model = FnoModel(
        config,
        load_param("lift.w"),
        load_param("lift.b"),
        spec_w,
        byp_w,
        byp_b,
        load_param("head.w"),
        load_param("head.b"),
        out_scale=np.array([float(man[f"norm.scale.{c}"]) for c in range(5)]),
        out_shift=np.array([float(man[f"norm.shift.{c}"]) for c in range(5)]),
        fluct_scale=float(man["norm.fluct_scale"]),
    )
    return model
