"""Field exchange formats and result manifests.

Fields travel as CSV with header ``x,y,re,im`` (complex) or ``x,y,val``
(real), row-major over the grid, full-precision decimal (%.17g reproduces
float64 bit-exactly), one row per unmasked node; masked rows are omitted and
counted in the sidecar manifest, which records the grid parameters needed to
rebuild the field.  Heatmaps are 8-bit binary PGM with the linear scaling
recorded in the manifest, so no imaging dependency is needed anywhere.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .fields import ComplexField, Grid, RealField

__all__ = [
    "export_field",
    "import_field",
    "write_manifest",
    "read_manifest",
    "file_sha256",
    "MANIFEST_VERSION",
]

MANIFEST_VERSION = 1
FLOAT_FMT = "%.17g"


def file_sha256(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _grid_manifest(grid: Grid) -> dict:
    return {
        "center": [grid.center.real, grid.center.imag],
        "half_width": grid.half_width,
        "n": grid.n,
        "spacing": grid.spacing,
    }


def export_field(field, path: Union[str, Path], format: str = "csv",
                 manifest_path: Optional[Union[str, Path]] = None) -> dict:
    """Write a field to disk; returns the sidecar manifest dictionary.

    ``format='csv'`` writes full-precision rows (bit-exact round trip);
    ``format='pgm-heatmap'`` writes an 8-bit grayscale map of the real part
    (symmetric linear scale about zero, so a zero field is mid-gray).
    """
    path = Path(path)
    g = field.grid
    complex_valued = isinstance(field, ComplexField) or np.iscomplexobj(field.values)
    mask = field.unmasked
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "kind": "complex" if complex_valued else "real",
        "format": format,
        "grid": _grid_manifest(g),
        "masked_nodes_omitted": int(mask.size - mask.sum()),
    }
    if format == "csv":
        Z = g.nodes()
        rows_mask = mask.ravel()
        x = Z.real.ravel()[rows_mask]
        y = Z.imag.ravel()[rows_mask]
        v = field.values.ravel()[rows_mask]
        if complex_valued:
            header = "x,y,re,im"
            data = np.column_stack([x, y, v.real, v.imag])
        else:
            header = "x,y,val"
            data = np.column_stack([x, y, v.real])
        np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")
    elif format == "pgm-heatmap":
        vals = np.where(mask, field.values.real, 0.0)
        vmax = float(np.max(np.abs(vals))) if np.any(vals) else 1.0
        scaled = np.clip((vals / vmax + 1.0) * 0.5 * 255.0, 0, 255).astype(np.uint8)
        img = scaled.T[::-1, :]  # y upward, x rightward
        with open(path, "wb") as fh:
            fh.write(f"P5\n{g.n} {g.n}\n255\n".encode())
            fh.write(img.tobytes())
        manifest["scale"] = {"vmin": -vmax, "vmax": vmax, "zero_level": 127.5}
    else:
        raise ValueError(f"unknown export format {format!r}")
    manifest["sha256"] = file_sha256(path)
    if manifest_path is None:
        manifest_path = path.with_suffix(path.suffix + ".manifest.json")
    write_manifest(manifest, manifest_path)
    return manifest


def import_field(path: Union[str, Path],
                 manifest_path: Optional[Union[str, Path]] = None):
    """Rebuild a field from a CSV export and its sidecar manifest."""
    path = Path(path)
    if manifest_path is None:
        manifest_path = path.with_suffix(path.suffix + ".manifest.json")
    manifest = read_manifest(manifest_path)
    if manifest.get("format") != "csv":
        raise ValueError("only CSV exports can be re-imported")
    gm = manifest["grid"]
    grid = Grid(complex(gm["center"][0], gm["center"][1]), gm["half_width"], gm["n"])
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    complex_valued = manifest["kind"] == "complex"
    if raw.shape[1] != (4 if complex_valued else 3):
        raise ValueError(f"CSV column count {raw.shape[1]} does not match kind {manifest['kind']}")
    vals = np.zeros((grid.n, grid.n), dtype=complex if complex_valued else float)
    mask = np.zeros((grid.n, grid.n), dtype=bool)
    lo = grid.center - grid.half_width * (1 + 1j)
    ii = np.rint((raw[:, 0] - lo.real) / grid.spacing).astype(int)
    jj = np.rint((raw[:, 1] - lo.imag) / grid.spacing).astype(int)
    if np.any((ii < 0) | (ii >= grid.n) | (jj < 0) | (jj >= grid.n)):
        raise ValueError("CSV rows fall outside the declared grid")
    vals[ii, jj] = raw[:, 2] + 1j * raw[:, 3] if complex_valued else raw[:, 2]
    mask[ii, jj] = True
    full = bool(mask.all())
    cls = ComplexField if complex_valued else RealField
    return cls(grid, vals, None if full else mask)


def write_manifest(manifest: dict, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_manifest(path: Union[str, Path]) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj)}")
