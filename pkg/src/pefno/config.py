"""Flat key=value run configuration with documented defaults.

Every key has a default; a run's resolved configuration (file values plus
command-line overrides) is echoed verbatim into its manifest so any
artifact can be regenerated bit-identically.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .fno import FnoConfig
from .grid import GridSpec
from .mechanics import LoadCase
from .training import TrainConfig


class ConfigError(ValueError):
    """Unknown key or unparseable value in a run configuration."""


DEFAULTS: dict[str, object] = {
    "grid.n1": 64,
    "grid.n2": 64,
    "grid.l": 1.0,
    "load.F11": 1.0,
    "load.F12": 0.0,
    "load.F21": 0.0,
    "load.F22": 1.004,
    "micro.count": 1,
    "micro.grains_min": 5,
    "micro.grains_max": 30,
    "solver.tol": 1e-6,
    "solver.max_iter": 500,
    "solver.redraw_budget": 10,
    "data.n": 16,
    "fno.layers": 4,
    "fno.width": 20,
    "fno.modes": 12,
    "fno.head": "guided",
    "fno.activation": "gelu",
    "train.epochs": 300,
    "train.batch": 8,
    "train.lr": 1e-3,
    "train.lr_final": 1e-4,
    "train.c": 0.1,
    "train.weighted_div": False,
    "seed": 0,
}


def _parse_value(key: str, raw: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as err:
        raise ConfigError(f"{key}: {err}") from None
    return raw.strip()


class RunConfig:
    """Resolved configuration: defaults, then file entries, then overrides."""

    def __init__(self, path: str | Path | None = None, overrides: list[str] | None = None):
        self.values = dict(DEFAULTS)
        if path is not None:
            for raw in Path(path).read_text().splitlines():
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                self._apply(line, where=str(path))
        for item in overrides or []:
            self._apply(item, where="command line")

    def _apply(self, item: str, where: str) -> None:
        if "=" not in item:
            raise ConfigError(f"{where}: expected key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{where}: unknown configuration key {key!r}")
        self.values[key] = _parse_value(key, raw)

    def __getitem__(self, key: str):
        return self.values[key]

    def manifest_entries(self, prefix: str = "config.") -> dict:
        return {prefix + k: v for k, v in sorted(self.values.items())}

    # typed views ----------------------------------------------------------

    def grid(self) -> GridSpec:
        return GridSpec(self["grid.n1"], self["grid.n2"], self["grid.l"])

    def load(self) -> LoadCase:
        F = np.eye(3)
        F[0, 0] = self["load.F11"]
        F[0, 1] = self["load.F12"]
        F[1, 0] = self["load.F21"]
        F[1, 1] = self["load.F22"]
        return LoadCase(F)

    def fno(self) -> FnoConfig:
        return FnoConfig(
            n_layers=self["fno.layers"],
            width=self["fno.width"],
            modes=self["fno.modes"],
            head=self["fno.head"],
            activation=self["fno.activation"],
        )

    def train(self) -> TrainConfig:
        return TrainConfig(
            epochs=self["train.epochs"],
            batch_size=self["train.batch"],
            lr=self["train.lr"],
            lr_final=self["train.lr_final"],
            c=self["train.c"],
            seed=self["seed"],
            weighted_div=self["train.weighted_div"],
        )
