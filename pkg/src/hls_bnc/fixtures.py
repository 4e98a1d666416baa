"""Bundled benchmark datasets (small public tables, missing rows removed)."""

from __future__ import annotations

from importlib import resources

from .data import Dataset, load_csv
from .exceptions import ConfigError

_PACKAGE = "hls_bnc.datasets"


def list_fixtures() -> list[str]:
    root = resources.files(_PACKAGE)
    return sorted(p.name[: -len(".csv")] for p in root.iterdir() if p.name.endswith(".csv"))


def load_fixture(name: str) -> Dataset:
    """Load a bundled dataset by name; numeric columns are left raw."""
    if name not in list_fixtures():
        raise ConfigError(f"unknown fixture {name!r}; available: {', '.join(list_fixtures())}")
    root = resources.files(_PACKAGE)
    with resources.as_file(root / f"{name}.csv") as csv_path, resources.as_file(root / f"{name}.schema") as schema:
        return load_csv(csv_path, schema)
