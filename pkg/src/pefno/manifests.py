"""Flat key=value manifests used by dataset directories, checkpoints, runs."""

from __future__ import annotations

from pathlib import Path


def format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_manifest(path: str | Path, entries: dict) -> None:
    lines = [f"{k}={format_value(v)}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: malformed manifest line {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
