"""Training-data generation and the on-disk dataset directory layout.

A dataset directory holds one material container and one stress container
per sample plus a plain-text manifest recording grid, load, tolerances,
seeds, per-sample solver iterations and file hashes.
"""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path

import numpy as np

from .container import FormatError, read_channels, read_tensor, write_channels, write_tensor
from .grid import GridSpec
from .manifests import read_manifest, write_manifest
from .materials import MaterialField, voronoi_microstructure
from .mechanics import ConvergenceError, LoadCase, Sample, equilibrium_residual, solve_equilibrium

log = logging.getLogger(__name__)

DEFAULT_GRAIN_RANGE = (5, 30)


def _sample_rngs(rng_seed: int, index: int, attempt: int):
    """Two independent deterministic streams for (grain count, microstructure)."""
    ss = np.random.SeedSequence((rng_seed, index, attempt))
    child_count, child_micro = ss.spawn(2)
    return np.random.default_rng(child_count), child_micro


def generate_dataset(
    n_dat: int,
    grid: GridSpec,
    load: LoadCase,
    grain_range: tuple[int, int] = DEFAULT_GRAIN_RANGE,
    rng_seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 500,
    redraw_budget: int = 10,
) -> tuple[list[Sample], dict]:
    """Generate n_dat independent converged samples under one shared load.

    Each sample draws its grain count uniformly from grain_range and its
    microstructure from a per-(sample, attempt) seed, so results do not
    depend on scheduling order.  Unconverged draws are rejected and redrawn
    up to redraw_budget times per sample; the rejection count is logged and
    returned in the info dict.
    """
    if n_dat < 1:
        raise ValueError(f"n_dat must be >= 1, got {n_dat}")
    gmin, gmax = grain_range
    if not (1 <= gmin <= gmax):
        raise ValueError(f"invalid grain range {grain_range}")
    samples: list[Sample] = []
    attempts_used: list[int] = []
    rejections = 0
    for i in range(n_dat):
        last_err: ConvergenceError | None = None
        for attempt in range(redraw_budget):
            rng_count, micro_seed = _sample_rngs(rng_seed, i, attempt)
            n_grains = int(rng_count.integers(gmin, gmax + 1))
            material = voronoi_microstructure(grid, n_grains, micro_seed)
            try:
                sample = solve_equilibrium(material, load, tol=tol, max_iter=max_iter)
            except ConvergenceError as err:
                rejections += 1
                last_err = err
                log.warning("sample %d attempt %d rejected: %s", i, attempt, err)
                continue
            samples.append(sample)
            attempts_used.append(attempt)
            break
        else:
            raise ConvergenceError(
                f"sample {i}: no converged draw within {redraw_budget} attempts",
                last_err.history if last_err else [],
            )
    if rejections:
        log.info("dataset generation finished with %d rejected draws", rejections)
    info = {
        "rejections": rejections,
        "attempts": attempts_used,
        "seed": rng_seed,
        "grain_range": grain_range,
        "tol": tol,
        "max_iter": max_iter,
    }
    return samples, info


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_dataset(
    directory: str | Path, samples: list[Sample], info: dict, extra: dict | None = None
) -> Path:
    """Write samples and the manifest into a dataset directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = samples[0].material.grid
    load = samples[0].load
    entries: dict = {
        "format": "pefno-dataset-1",
        "n_samples": len(samples),
        "grid.n1": grid.n1,
        "grid.n2": grid.n2,
        "grid.l": grid.l,
        "load.F11": load.Fbar[0, 0],
        "load.F12": load.Fbar[0, 1],
        "load.F21": load.Fbar[1, 0],
        "load.F22": load.Fbar[1, 1],
        "solver.tol": info["tol"],
        "solver.max_iter": info["max_iter"],
        "seed": info["seed"],
        "grains.min": info["grain_range"][0],
        "grains.max": info["grain_range"][1],
        "rejections": info["rejections"],
    }
    for i, sample in enumerate(samples):
        mat_name = f"sample_{i:04d}_material.pefno"
        sts_name = f"sample_{i:04d}_stress.pefno"
        write_channels(directory / mat_name, sample.material.channels)
        write_tensor(directory / sts_name, sample.P_dat)
        entries[f"sample.{i}.material"] = mat_name
        entries[f"sample.{i}.stress"] = sts_name
        entries[f"sample.{i}.attempt"] = info["attempts"][i]
        entries[f"sample.{i}.iterations"] = sample.iterations
        entries[f"sample.{i}.residual"] = sample.residual
        entries[f"sample.{i}.sha256.material"] = _sha256(directory / mat_name)
        entries[f"sample.{i}.sha256.stress"] = _sha256(directory / sts_name)
    for k, v in (extra or {}).items():
        entries[str(k)] = v
    write_manifest(directory / "manifest.txt", entries)
    return directory


def load_dataset(directory: str | Path) -> tuple[list[Sample], dict[str, str]]:
    """Load a dataset directory back into Sample objects (no deformation)."""
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.txt")
    if manifest.get("format") != "pefno-dataset-1":
        raise FormatError(f"{directory}: not a pefno dataset (format key missing/unknown)")
    grid = GridSpec(int(manifest["grid.n1"]), int(manifest["grid.n2"]), float(manifest["grid.l"]))
    Fbar = np.eye(3)
    Fbar[0, 0] = float(manifest["load.F11"])
    Fbar[0, 1] = float(manifest["load.F12"])
    Fbar[1, 0] = float(manifest["load.F21"])
    Fbar[1, 1] = float(manifest["load.F22"])
    load = LoadCase(Fbar)
    samples = []
    for i in range(int(manifest["n_samples"])):
        n1, n2, chans = read_channels(directory / manifest[f"sample.{i}.material"])
        if chans.shape[0] != 2:
            raise FormatError(
                f"{manifest[f'sample.{i}.material']}: channel count {chans.shape[0]} != 2 "
                "for a material field"
            )
        if (n1, n2) != grid.shape:
            raise FormatError(
                f"{manifest[f'sample.{i}.material']}: grid {n1}x{n2} does not match manifest"
            )
        material = MaterialField(grid, chans[0], chans[1])
        stress = read_tensor(directory / manifest[f"sample.{i}.stress"], l=grid.l)
        samples.append(
            Sample(
                material=material,
                load=load,
                P_dat=stress,
                residual=float(manifest[f"sample.{i}.residual"]),
                iterations=int(manifest[f"sample.{i}.iterations"]),
            )
        )
    return samples, manifest


def verify_dataset(directory: str | Path) -> list[str]:
    """Re-check file hashes and equilibrium residuals; returns found issues."""
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.txt")
    tol = float(manifest["solver.tol"])
    issues: list[str] = []
    for i in range(int(manifest["n_samples"])):
        for kind in ("material", "stress"):
            name = manifest[f"sample.{i}.{kind}"]
            recorded = manifest[f"sample.{i}.sha256.{kind}"]
            actual = _sha256(directory / name)
            if actual != recorded:
                issues.append(f"{name}: sha256 mismatch (file changed since generation)")
    samples, _ = load_dataset(directory)
    for i, sample in enumerate(samples):
        res = equilibrium_residual(sample.P_dat)
        if res > tol:
            issues.append(
                f"sample {i}: stored stress residual {res:.3e} exceeds tolerance {tol:.3e}"
            )
    return issues
