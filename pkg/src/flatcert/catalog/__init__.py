"""Built-in example systems shipped as spec files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..errors import UnknownCatalogEntry

ENTRIES = ("double_integrator", "pendulum", "planar_mass_point", "unicycle", "broken_phi_fixture")


def catalog_text(name: str) -> str:
    if name not in ENTRIES:
        raise UnknownCatalogEntry(name)
    return resources.files(__name__).joinpath(f"{name}.flat").read_text(encoding="utf-8")


def describe(name: str) -> str:
    """First comment line of the entry."""
    first = catalog_text(name).splitlines()[0]
    return first.lstrip("# ").strip()


def write_entry(name: str, directory: str | Path = ".") -> Path:
    path = Path(directory) / f"{name}.flat"
    path.write_text(catalog_text(name), encoding="utf-8")
    return path


def load_entry(name: str):
    from ..specfile import parse_spec

    return parse_spec(catalog_text(name), f"{name}.flat")
