"""Time the numba kernels against their pure-numpy fallbacks.

Usage:
    python3 benchmarks/bench_backends.py [--repeat N]

The active package backend is irrelevant here: both implementations are
imported explicitly.  Numba kernels are warmed once before timing so
compilation does not pollute the numbers.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pefno import backends
from pefno.grid import GridSpec
from pefno.spectral import wavenumbers


def timeit(fn, args, repeat):
    fn(*args)  # warm (JIT compile / cache touch)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()

    if not backends._HAVE_NUMBA:
        raise SystemExit(
            "numba is not active (PEFNO_BACKEND=numpy?); nothing to compare"
        )

    rng = np.random.default_rng(0)
    grid = GridSpec(64, 64)
    rows = []

    # Saint Venant-Kirchhoff stress over the grid
    F = np.tile(np.eye(3)[:, :, None, None], (1, 1, 64, 64)) + 0.01 * rng.normal(
        size=(3, 3, 64, 64)
    )
    lam = rng.uniform(20.0, 300.0, size=grid.shape)
    mu = rng.uniform(20.0, 300.0, size=grid.shape)
    rows.append(
        (
            "svk_stress_field (64^2)",
            timeit(backends.svk_stress_field_numpy, (F, lam, mu), args.repeat),
            timeit(backends.svk_stress_field, (F, lam, mu), args.repeat),
        )
    )

    # periodic Voronoi assignment
    seeds = rng.uniform(0.0, 1.0, size=(30, 2))
    rows.append(
        (
            "voronoi_labels (256^2, 30 seeds)",
            timeit(backends.voronoi_labels_numpy, (256, 256, seeds, 1.0), args.repeat),
            timeit(backends.voronoi_labels, (256, 256, seeds, 1.0), args.repeat),
        )
    )

    # Green-operator application on the half spectrum
    k1, k2 = wavenumbers(grid)
    tau_hat = rng.normal(size=(3, 3, 33, 64)) + 1j * rng.normal(size=(3, 3, 33, 64))
    ainv = rng.normal(size=(33, 64, 3, 3))
    rows.append(
        (
            "green_apply (64^2)",
            timeit(backends.green_apply_numpy, (tau_hat, ainv, k1, k2), args.repeat),
            timeit(backends.green_apply, (tau_hat, ainv, k1, k2), args.repeat),
        )
    )

    # spectral-convolution channel mixing (batch 8, width 20, modes 12)
    X = rng.normal(size=(8, 20, 12, 23)) + 1j * rng.normal(size=(8, 20, 12, 23))
    R = rng.normal(size=(20, 20, 12, 23)) + 1j * rng.normal(size=(20, 20, 12, 23))
    gY = rng.normal(size=(8, 20, 12, 23)) + 1j * rng.normal(size=(8, 20, 12, 23))
    rows.append(
        (
            "mix_forward (8x20x20)",
            timeit(backends.mix_forward_numpy, (X, R), args.repeat),
            timeit(backends.mix_forward, (X, R), args.repeat),
        )
    )
    rows.append(
        (
            "mix_adjoint_input",
            timeit(backends.mix_adjoint_input_numpy, (gY, R), args.repeat),
            timeit(backends.mix_adjoint_input, (gY, R), args.repeat),
        )
    )
    rows.append(
        (
            "mix_gradient_weights",
            timeit(backends.mix_gradient_weights_numpy, (X, gY), args.repeat),
            timeit(backends.mix_gradient_weights, (X, gY), args.repeat),
        )
    )

    # GELU forward/derivative on a hidden-layer-sized block
    xact = rng.normal(size=(8, 20, 64, 64))
    gact = rng.normal(size=(8, 20, 64, 64))
    rows.append(
        (
            "gelu_forward (8x20x64^2)",
            timeit(backends.gelu_forward_numpy, (xact,), args.repeat),
            timeit(backends.gelu_forward, (xact,), args.repeat),
        )
    )
    rows.append(
        (
            "gelu_vjp",
            timeit(backends.gelu_vjp_numpy, (xact, gact), args.repeat),
            timeit(backends.gelu_vjp, (xact, gact), args.repeat),
        )
    )

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(
            f"{name:<{width}}  {t_np * 1e3:>8.3f}ms  {t_nb * 1e3:>8.3f}ms  "
            f"{t_np / t_nb:>7.2f}x"
        )


if __name__ == "__main__":
    main()
