"""Field serialisation: raw little-endian complex blob plus a JSON sidecar.

A field saved to ``name.bin`` gets a header ``name.json`` with
``{"dimension", "n", "kind", "dtype"}``; kind is "sampled", "spectral" or
"phasespace".  CSV export flattens to (index, re, im) rows.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .grids import Grid, SampledField, SpectralField
from .modulation import PhaseSpaceField

_KINDS = {
    SampledField: "sampled",
    SpectralField: "spectral",
    PhaseSpaceField: "phasespace",
}


def _payload(obj) -> np.ndarray:
    if isinstance(obj, SampledField):
        return obj.values
    if isinstance(obj, SpectralField):
        return obj.coeffs
    if isinstance(obj, PhaseSpaceField):
        return obj.values
    raise InputError(f"cannot serialise {type(obj).__name__}")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_field(obj, path, dtype: str = "complex128") -> Path:
    """Write the binary blob and its JSON header; returns the blob path."""
    path = Path(path)
    if path.suffix != ".bin":
        path = path.with_suffix(".bin")
    arr = _payload(obj)
    np_dtype = {"complex128": "<c16", "complex64": "<c8"}.get(dtype)
    if np_dtype is None:
        raise InputError(f"unsupported dtype {dtype!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    arr.astype(np_dtype).tofile(path)
    header = {
        "dimension": obj.grid.dimension,
        "n": obj.grid.n,
        "kind": _KINDS[type(obj)],
        "dtype": dtype,
    }
    sidecar_path(path).write_text(json.dumps(header, sort_keys=True, indent=1))
    return path


def load_field(path):
    """Read a field written by :func:`save_field`."""
    path = Path(path)
    if path.suffix != ".bin":
        path = path.with_suffix(".bin")
    sc = sidecar_path(path)
    if not path.exists() or not sc.exists():
        raise FileNotFoundError(f"missing blob or sidecar for {path}")
    header = json.loads(sc.read_text())
    try:
        grid = Grid(int(header["dimension"]), int(header["n"]))
        kind = header["kind"]
        np_dtype = {"complex128": "<c16", "complex64": "<c8"}[header.get("dtype", "complex128")]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed sidecar {sc}: {exc}") from exc
    data = np.fromfile(path, dtype=np_dtype).astype(complex)
    if kind == "sampled":
        return SampledField(grid, data)
    if kind == "spectral":
        return SpectralField(grid, data)
    if kind == "phasespace":
        return PhaseSpaceField(grid, data.reshape(grid.size, grid.size))
    raise InputError(f"unknown field kind {kind!r}")


def export_csv(obj, path) -> Path:
    """Flatten a field to (index, re, im) CSV rows."""
    path = Path(path)
    arr = _payload(obj).ravel()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "re", "im"])
        for i, v in enumerate(arr):
            writer.writerow([i, repr(float(v.real)), repr(float(v.imag))])
    return path
