"""Losses, the gradient-based weighting matrix, Adam, and the training and
evaluation loops for all three operator heads.

Loss conventions follow the data-term/penalty split: the weighted mean
absolute data error is normalized by the sample count only (point sums are
not averaged), and the divergence penalty is unweighted by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import TensorField, VectorField
from .fno import STRESS_SLOTS, FnoModel, fno_backward, fno_forward, save_checkpoint
from .grid import GridSpec
from .manifests import format_value
from .materials import E_RANGE, NU_RANGE, MaterialField
from .mechanics import Sample
from .spectral import _irfft2n, _rfft2n, div_adjoint_channels, div_channels, wavenumbers


class TrainingError(RuntimeError):
    """Raised when training aborts; carries the diagnostic snapshot path."""

    def __init__(self, message: str, snapshot: Path | None = None):
        super().__init__(message)
        self.snapshot = snapshot


# --------------------------------------------------------------------------
# Weighting matrix
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightField:
    """Positive per-point weights for the five supervised stress channels."""

    grid: GridSpec
    comps: np.ndarray  # (5, n1, n2), ordered like STRESS_SLOTS

    def __post_init__(self) -> None:
        a = np.ascontiguousarray(self.comps, dtype=np.float64)
        if a.shape != (5, self.grid.n1, self.grid.n2):
            raise ValueError(f"weight comps must be (5, n1, n2), got {a.shape}")
        if not np.all(np.isfinite(a)) or np.any(a < 1.0):
            raise ValueError("weights must be finite and >= 1")
        a.setflags(write=False)
        object.__setattr__(self, "comps", a)


def weight_matrix(P_dat: TensorField) -> WeightField:
    """W_c = 1 + |grad P_c| / (ref_c + eps) per supervised component.

    The gradient is evaluated spectrally; ref_c is the cell mean of |P_c|
    and eps = 1e-8 times the largest ref, so the weights are invariant
    under rescaling the stress and peak where the data vary fastest (grain
    boundaries).  A uniform field gets W = 1 everywhere.
    """
    grid = P_dat.grid
    k1, k2 = wavenumbers(grid)
    chans = np.stack([P_dat.comps[r, c] for r, c in STRESS_SLOTS])
    refs = np.abs(chans).mean(axis=(-2, -1))
    if refs.max() == 0.0:
        return WeightField(grid, np.ones((5, grid.n1, grid.n2)))
    eps = 1e-8 * refs.max()
    ch_hat = _rfft2n(chans, grid)
    d1 = _irfft2n(1j * k1[:, None] * ch_hat, grid)
    d2 = _irfft2n(1j * k2[None, :] * ch_hat, grid)
    mag = np.hypot(d1, d2)
    W = 1.0 + mag / (refs + eps)[:, None, None]
    return WeightField(grid, W)


# --------------------------------------------------------------------------
# Losses (value + gradient in stress space)
# --------------------------------------------------------------------------


def loss_data(
    P_out: np.ndarray, P_dat: np.ndarray, W: np.ndarray, n_dat: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted mean absolute data error over a batch.

    P_out, P_dat: (B, 3, 3, n1, n2); W: (B, 5, n1, n2).  Returns
    (total, per_sample, grad) where total = sum_a sum_points sum_channels
    W * |dP| / n_dat, per_sample holds the unnormalized per-sample sums,
    and grad is d(total)/d(P_out).
    """
    if P_out.shape != P_dat.shape:
        raise ValueError(f"shape mismatch: {P_out.shape} vs {P_dat.shape}")
    per_sample = np.zeros(P_out.shape[0])
    grad = np.zeros_like(P_out)
    for c, (r, s) in enumerate(STRESS_SLOTS):
        delta = P_out[:, r, s] - P_dat[:, r, s]
        per_sample += np.sum(W[:, c] * np.abs(delta), axis=(-2, -1))
        grad[:, r, s] = W[:, c] * np.sign(delta) / n_dat
    return float(per_sample.sum() / n_dat), per_sample, grad


def loss_div(
    P_out: np.ndarray,
    grid: GridSpec,
    n_dat: int,
    weights: np.ndarray | None = None,
    div_field: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Divergence penalty: sum of |div P| row entries over the grid, per
    sample, divided by n_dat.  Unweighted unless an optional per-row weight
    field (B, 3, n1, n2) is supplied.

    Returns (value, grad, div) with grad = d(value)/d(P_out) and div the
    (B, 3, n1, n2) divergence field for reuse in metrics.
    """
    d = div_field if div_field is not None else div_channels(grid, P_out)
    if weights is None:
        value = float(np.abs(d).sum() / n_dat)
        sgn = np.sign(d) / n_dat
    else:
        value = float((weights * np.abs(d)).sum() / n_dat)
        sgn = weights * np.sign(d) / n_dat
    grad = div_adjoint_channels(grid, sgn)
    return value, grad, d


# --------------------------------------------------------------------------
# Optimizer
# --------------------------------------------------------------------------


class Adam:
    """Adam over the model's parameter dict; complex parameters are updated
    through their real/imaginary float views."""

    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.views = {k: v.view(np.float64) for k, v in params.items()}
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in self.views.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.views.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in self.views.items():
            g = grads[k].view(np.float64)
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# --------------------------------------------------------------------------
# Configuration, metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 8
    lr: float = 1e-3
    lr_final: float = 1e-4
    c: float = 0.1
    seed: int = 0
    weighted_div: bool = False

    def __post_init__(self) -> None:
        if self.c < 0:
            raise ValueError("divergence-penalty weight c must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


METRIC_COLUMNS = (
    "epoch",
    "L_dat",
    "L_div",
    "mae_p11",
    "mae_p12",
    "mae_p21",
    "mae_p22",
    "mae_p33",
    "max_div",
)


@dataclass
class Metrics:
    """Per-epoch metric rows plus the post-training clean evaluation."""

    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def append(self, row: dict, csv_path: Path | None = None) -> None:
        self.rows.append(row)
        if csv_path is not None:
            new = not csv_path.exists()
            with open(csv_path, "a") as fh:
                if new:
                    fh.write(",".join(METRIC_COLUMNS) + "\n")
                fh.write(",".join(format_value(row[c]) for c in METRIC_COLUMNS) + "\n")

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]


def normalize_input(material: MaterialField) -> np.ndarray:
    """Fixed affine map of (E, nu) onto [0, 1]^2 input channels."""
    e = (material.E - E_RANGE[0]) / (E_RANGE[1] - E_RANGE[0])
    nu = (material.nu - NU_RANGE[0]) / (NU_RANGE[1] - NU_RANGE[0])
    return np.stack([e, nu])


def fit_normalizer(model: FnoModel, samples: list[Sample]) -> None:
    """Record per-channel dataset statistics on the model so raw head
    outputs land at physical stress scale: out_shift/out_scale standardize
    the five supervised channels, fluct_scale sets the encoded head's
    potential magnitude so that curl output matches the fluctuation scale.
    """
    grid = samples[0].P_dat.grid
    stacked = np.stack([s.P_dat.comps for s in samples])
    chans = np.stack([stacked[:, r, c] for r, c in STRESS_SLOTS])
    means = chans.mean(axis=(1, 2, 3))
    stds = chans.std(axis=(1, 2, 3))
    model.out_shift = means
    model.out_scale = np.where(stds > 0, stds, 1.0)
    sigma = float(stds.mean())
    model.fluct_scale = (sigma if sigma > 0 else 1.0) * grid.l / (2.0 * np.pi)


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------


def _cosine_lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.epochs == 1:
        return cfg.lr
    t = epoch / (cfg.epochs - 1)
    return cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + np.cos(np.pi * t))


def _div_weights(W: np.ndarray) -> np.ndarray:
    """Per-row divergence weights derived from the data weights: row r is
    the mean of the weights of its in-plane components; row 3 stays 1."""
    out = np.ones((W.shape[0], 3) + W.shape[-2:])
    out[:, 0] = 0.5 * (W[:, 0] + W[:, 1])
    out[:, 1] = 0.5 * (W[:, 2] + W[:, 3])
    return out


def _clean_pass(model, X, P, W, grid, batch_size) -> tuple[float, float]:
    """Dataset-level data and divergence losses at the current parameters."""
    n = X.shape[0]
    total_dat = 0.0
    total_div = 0.0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        res = fno_forward(model, X[idx], grid)
        _, per_sample, _ = loss_data(res.stress, P[idx], W[idx], n_dat=n)
        total_dat += per_sample.sum() / n
        total_div += float(np.abs(div_channels(grid, res.stress)).sum() / n)
    return total_dat, total_div


def train(
    model: FnoModel,
    samples: list[Sample],
    config: TrainConfig,
    out_dir: str | Path | None = None,
) -> tuple[FnoModel, Metrics]:
    """Train one operator on a converged dataset.

    Deterministic for a fixed (model init, config.seed) pair: batches are
    drawn from a dedicated generator, gradients accumulate in a fixed
    order, and the optimizer is single-threaded.  Per-epoch metrics are
    appended to metrics.csv and the latest checkpoint is rewritten every
    epoch when out_dir is given.  Non-finite losses abort with a
    diagnostic snapshot of the parameters and the offending batch.

    The data term trains every head; the divergence penalty (weight
    config.c) applies to the informed head only.
    """
    if not samples:
        raise TrainingError("cannot train on an empty dataset")
    grid = samples[0].P_dat.grid
    for s in samples:
        if s.P_dat.grid != grid:
            raise TrainingError("all samples must share one grid")
        if not np.array_equal(s.load.Fbar, samples[0].load.Fbar):
            raise TrainingError("all samples must share one load case")
    model.config.check_grid(grid)

    X = np.stack([normalize_input(s.material) for s in samples])
    P = np.stack([s.P_dat.comps for s in samples])
    W = np.stack([weight_matrix(s.P_dat).comps for s in samples])
    Wdiv = _div_weights(W) if config.weighted_div else None
    n = len(samples)
    n_dis = grid.npoints

    fit_normalizer(model, samples)
    rng = np.random.default_rng(config.seed)
    adam = Adam(model.parameters())
    out_dir = Path(out_dir) if out_dir is not None else None
    csv_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "metrics.csv"
        if csv_path.exists():
            csv_path.unlink()
    metrics = Metrics()
    use_penalty = model.config.head == "informed" and config.c > 0.0

    initial_dat, initial_div = _clean_pass(model, X, P, W, grid, config.batch_size)
    metrics.summary = {"initial_L_dat": initial_dat, "initial_L_div": initial_div}

    for epoch in range(config.epochs):
        lr = _cosine_lr(config, epoch)
        perm = rng.permutation(n)
        dat_sum = 0.0
        div_sum = 0.0
        abs_err = np.zeros(5)
        max_div = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            B = len(idx)
            res = fno_forward(model, X[idx], grid)
            _, per_sample, gP = loss_data(res.stress, P[idx], W[idx], n_dat=B)
            dval, gdiv, d = loss_div(
                res.stress, grid, n_dat=B, weights=Wdiv[idx] if Wdiv is not None else None
            )
            if use_penalty:
                gP = gP + config.c * gdiv
            batch_loss = per_sample.sum() / B + (config.c * dval if use_penalty else 0.0)
            if not np.isfinite(batch_loss):
                snapshot = None
                if out_dir is not None:
                    snapshot = save_checkpoint(
                        out_dir / "diagnostic_abort",
                        model,
                        extra={
                            "abort.epoch": epoch,
                            "abort.batch_indices": " ".join(str(i) for i in idx),
                        },
                    )
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} (batch {idx.tolist()})", snapshot
                )
            grads = fno_backward(model, res, gP)
            adam.step(grads, lr)

            dat_sum += per_sample.sum()
            div_sum += dval * B
            for c, (r, s) in enumerate(STRESS_SLOTS):
                abs_err[c] += np.abs(res.stress[:, r, s] - P[idx][:, r, s]).sum()
            max_div = max(max_div, float(np.abs(d).max()))

        row = {
            "epoch": epoch,
            "L_dat": dat_sum / n,
            "L_div": div_sum / n,
            "max_div": max_div,
        }
        for c in range(5):
            row[f"mae_p{STRESS_SLOTS[c][0] + 1}{STRESS_SLOTS[c][1] + 1}"] = abs_err[c] / (
                n * n_dis
            )
        metrics.append(row, csv_path)
        if out_dir is not None:
            save_checkpoint(out_dir / "checkpoint_latest", model, extra={"epoch": epoch})

    final_dat, final_div = _clean_pass(model, X, P, W, grid, config.batch_size)
    metrics.summary["final_L_dat"] = final_dat
    metrics.summary["final_L_div"] = final_div
    if out_dir is not None:
        save_checkpoint(
            out_dir / "checkpoint_final",
            model,
            extra={
                "train.final_L_dat": final_dat,
                "train.final_L_div": final_div,
                "train.seed": config.seed,
                "train.epochs": config.epochs,
            },
        )
    return model, metrics


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


@dataclass
class EvalResult:
    stress: TensorField
    error_fields: np.ndarray  # (5, n1, n2) absolute errors, MPa
    div_rows: VectorField  # row-wise divergence fields, MPa/l
    mae: np.ndarray  # (5,) per-component mean absolute error, MPa
    max_abs_div: float  # MPa/l
    data_loss: float  # weighted point sum as in the data term, one sample


def evaluate_stress(P_out: TensorField, sample: Sample) -> EvalResult:
    """Reduce a stress field against one sample: per-component absolute
    error fields, per-row divergence fields (the third row is identically
    zero in plane deformation), and scalar summaries."""
    grid = sample.P_dat.grid
    W = weight_matrix(sample.P_dat)
    _, per_sample, _ = loss_data(
        P_out.comps[None], sample.P_dat.comps[None], W.comps[None], n_dat=1
    )
    err = np.stack(
        [np.abs(P_out.comps[r, c] - sample.P_dat.comps[r, c]) for r, c in STRESS_SLOTS]
    )
    d = div_channels(grid, P_out.comps)
    return EvalResult(
        stress=P_out,
        error_fields=err,
        div_rows=VectorField(grid, d),
        mae=err.mean(axis=(-2, -1)),
        max_abs_div=float(np.abs(d).max()),
        data_loss=float(per_sample[0]),
    )


def evaluate(model: FnoModel, sample: Sample) -> EvalResult:
    """Evaluate a trained model against one converged sample."""
    grid = sample.P_dat.grid
    res = fno_forward(model, normalize_input(sample.material), grid)
    return evaluate_stress(TensorField(grid, res.stress[0]), sample)
