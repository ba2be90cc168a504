"""Command-line front end: reproducible generation, training, evaluation,
plot export and verification runs driven by a flat key=value config.

Exit codes: 0 ok, 2 usage, 3 data/format, 4 convergence, 5 internal.
Every command writes a manifest (resolved config, seeds, artifact hashes)
into its output directory; commands compose through paths only.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .container import FormatError, read_channels, write_channels, write_tensor, write_vector
from .dataset import _sample_rngs, generate_dataset, load_dataset, save_dataset, verify_dataset
from .fields import FieldError
from .fno import ConfigError as FnoConfigError
from .fno import init_model, load_checkpoint
from .grid import GridError
from .manifests import write_manifest
from .materials import MaterialError, voronoi_microstructure
from .mechanics import ConvergenceError
from .plots import write_ppm
from .spectral import LayoutError, SpectrumError
from .training import TrainingError, evaluate, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_INTERNAL = 5


class UsageError(ValueError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _hash_entries(paths: list[Path], root: Path) -> dict:
    return {f"sha256.{p.relative_to(root)}": _sha256(p) for p in sorted(paths)}


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_gen_micro(cfg: RunConfig, out: Path) -> int:
    count = cfg["micro.count"]
    if count < 1:
        raise UsageError(f"micro.count must be >= 1, got {count}")
    gmin, gmax = cfg["micro.grains_min"], cfg["micro.grains_max"]
    if not (1 <= gmin <= gmax):
        raise UsageError(f"invalid grain range [{gmin}, {gmax}]")
    grid = cfg.grid()
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(count):
        rng_count, micro_seed = _sample_rngs(cfg["seed"], i, 0)
        n_grains = int(rng_count.integers(gmin, gmax + 1))
        material = voronoi_microstructure(grid, n_grains, micro_seed)
        path = out / f"micro_{i:04d}.pefno"
        write_channels(path, material.channels)
        files.append(path)
        print(f"wrote {path} ({n_grains} grains)")
    entries = {"command": "gen-micro", **cfg.manifest_entries(), **_hash_entries(files, out)}
    write_manifest(out / "manifest.txt", entries)
    return EXIT_OK


def cmd_gen_data(cfg: RunConfig, out: Path) -> int:
    samples, info = generate_dataset(
        n_dat=cfg["data.n"],
        grid=cfg.grid(),
        load=cfg.load(),
        grain_range=(cfg["micro.grains_min"], cfg["micro.grains_max"]),
        rng_seed=cfg["seed"],
        tol=cfg["solver.tol"],
        max_iter=cfg["solver.max_iter"],
        redraw_budget=cfg["solver.redraw_budget"],
    )
    save_dataset(out, samples, info, extra={"command": "gen-data", **cfg.manifest_entries()})
    worst = max(s.residual for s in samples)
    print(f"wrote {len(samples)} samples to {out} (worst residual {worst:.3e})")
    return EXIT_OK


def cmd_train(cfg: RunConfig, dataset_dir: Path, out: Path) -> int:
    samples, _ = load_dataset(dataset_dir)
    model = init_model(cfg.fno(), cfg["seed"])
    model, metrics = train(model, samples, cfg.train(), out_dir=out)
    files = [out / "metrics.csv", *sorted((out / "checkpoint_final").glob("*"))]
    entries = {
        "command": "train",
        "dataset": str(dataset_dir),
        **cfg.manifest_entries(),
        "final_L_dat": metrics.summary["final_L_dat"],
        "final_L_div": metrics.summary["final_L_div"],
        **_hash_entries(files, out),
    }
    write_manifest(out / "manifest.txt", entries)
    print(
        f"trained {cfg['fno.head']} head for {cfg['train.epochs']} epochs: "
        f"L_dat {metrics.rows[0]['L_dat']:.6g} -> {metrics.summary['final_L_dat']:.6g}, "
        f"L_div {metrics.summary['final_L_div']:.6g}"
    )
    return EXIT_OK


def cmd_eval(cfg: RunConfig, checkpoint: Path, dataset_dir: Path, index: int, out: Path) -> int:
    model = load_checkpoint(checkpoint)
    samples, _ = load_dataset(dataset_dir)
    if not 0 <= index < len(samples):
        raise UsageError(f"sample index {index} outside dataset of {len(samples)}")
    sample = samples[index]
    result = evaluate(model, sample)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "stress_out.pefno", result.stress)
    write_channels(out / "error_fields.pefno", result.error_fields)
    write_vector(out / "div_rows.pefno", result.div_rows)
    names = ("p11", "p12", "p21", "p22", "p33")
    summary = [
        "# evaluation summary",
        *[f"mae_{n}_mpa={result.mae[i]:.17g}" for i, n in enumerate(names)],
        f"max_abs_div_mpa_per_l={result.max_abs_div:.17g}",
        f"weighted_data_error={result.data_loss:.17g}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    files = [
        out / "stress_out.pefno",
        out / "error_fields.pefno",
        out / "div_rows.pefno",
        out / "summary.txt",
    ]
    entries = {
        "command": "eval",
        "checkpoint": str(checkpoint),
        "dataset": str(dataset_dir),
        "sample": index,
        **cfg.manifest_entries(),
        **_hash_entries(files, out),
    }
    write_manifest(out / "manifest.txt", entries)
    print((out / "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_export_plots(field_files: list[Path], out: Path) -> int:
    if not field_files:
        raise UsageError("no field files given")
    out.mkdir(parents=True, exist_ok=True)
    produced = []
    meta_lines = []
    for path in field_files:
        _, _, chans = read_channels(path)
        for c in range(chans.shape[0]):
            name = f"{path.stem}_ch{c}.ppm"
            vmin, vmax = write_ppm(out / name, chans[c])
            produced.append(out / name)
            line = f"{name}: min={vmin:.17g} max={vmax:.17g}"
            meta_lines.append(line)
            print(line)
    (out / "ranges.txt").write_text("\n".join(meta_lines) + "\n")
    produced.append(out / "ranges.txt")
    entries = {"command": "export-plots", **_hash_entries(produced, out)}
    write_manifest(out / "manifest.txt", entries)
    return EXIT_OK


def cmd_verify(dataset_dir: Path) -> int:
    issues = verify_dataset(dataset_dir)
    if issues:
        for issue in issues:
            print(f"FAIL {issue}")
        return EXIT_DATA
    print(f"ok: {dataset_dir} passes integrity and residual checks")
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pefno",
        description="Divergence-free stress surrogates: data generation, "
        "training, evaluation and export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument(
            "overrides",
            nargs="*",
            metavar="key=value",
            help="configuration overrides applied after the file",
        )

    p = sub.add_parser("gen-micro", help="generate material microstructure files")
    p.add_argument("--out", type=Path, required=True)
    common(p)

    p = sub.add_parser("gen-data", help="generate a converged training dataset")
    p.add_argument("--out", type=Path, required=True)
    common(p)

    p = sub.add_parser("train", help="train one operator head on a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint against one sample")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    common(p)

    p = sub.add_parser("export-plots", help="export container channels as PPM heatmaps")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("fields", nargs="*", type=Path, help="PEFNO1 container files")

    p = sub.add_parser("verify", help="re-check dataset integrity and residuals")
    p.add_argument("--dataset", type=Path, required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code not in (0, None) else EXIT_OK
    try:
        if args.command == "export-plots":
            return cmd_export_plots(args.fields, args.out)
        if args.command == "verify":
            return cmd_verify(args.dataset)
        cfg = RunConfig(args.config, args.overrides)
        if args.command == "gen-micro":
            return cmd_gen_micro(cfg, args.out)
        if args.command == "gen-data":
            return cmd_gen_data(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.dataset, args.out)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.dataset, args.sample, args.out)
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, ConfigError, FnoConfigError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, FieldError, GridError, MaterialError, SpectrumError, LayoutError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as err:
        print(f"convergence error: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except TrainingError as err:
        print(f"training error: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as err:  # anything unexpected
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
