"""CSV and JSON sidecar formats.

Spectra CSV: the first row holds the wavelength axis (its first cell is a
label), every following row is ``sample_id, absorbance...``.  Lines starting
with ``#`` are comments; writers put a one-line JSON provenance header there.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .core import HyperCube, SpectraMatrix, SpectralDataError, WavelengthAxis

PROVENANCE_PREFIX = "# provenance: "


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(command: str, seed=None, inputs: Iterable = (), **options) -> dict:
    """Provenance record; output paths are deliberately not part of it."""
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "options": {k: options[k] for k in sorted(options)},
        "inputs": {str(Path(p).name): file_digest(p) for p in inputs},
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def _rows(path) -> list[list[str]]:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return [row for row in csv.reader(lines)]


def read_spectra(path, unit: Optional[str] = None) -> SpectraMatrix:
    rows = _rows(path)
    if len(rows) < 2:
        raise SpectralDataError(f"{path}: need an axis row and at least one sample")
    try:
        axis_vals = [float(v) for v in rows[0][1:]]
        ids = [r[0] for r in rows[1:]]
        data = [[float(v) for v in r[1:]] for r in rows[1:]]
    except ValueError as exc:
        raise SpectralDataError(f"{path}: non-numeric cell ({exc})") from None
    widths = {len(r) for r in data}
    if widths != {len(axis_vals)}:
        raise SpectralDataError(f"{path}: ragged rows, expected {len(axis_vals)} values")
    if unit is None:
        unit = "nm" if axis_vals[-1] > axis_vals[0] else "cm-1"
    return SpectraMatrix(np.array(data), WavelengthAxis(np.array(axis_vals), unit), ids)


def format_spectra(A: SpectraMatrix, header: Optional[dict] = None, label="sample") -> str:
    buf = io.StringIO()
    if header is not None:
        buf.write(PROVENANCE_PREFIX + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([label] + [_fmt(v) for v in A.axis.values])
    for sid, row in zip(A.sample_ids, A.values):
        w.writerow([sid] + [_fmt(v) for v in row])
    return buf.getvalue()


def write_spectra(path, A: SpectraMatrix, header: Optional[dict] = None, label="sample"):
    Path(path).write_text(format_spectra(A, header, label))


def read_vector(path) -> np.ndarray:
    """First data row of a spectra CSV as a plain vector."""
    return read_spectra(path).values[0].copy()


def write_table(path, columns: Sequence[str], rows, header: Optional[dict] = None):
    buf = io.StringIO()
    if header is not None:
        buf.write(PROVENANCE_PREFIX + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    Path(path).write_text(buf.getvalue())


def read_table(path) -> tuple[list[str], np.ndarray]:
    rows = _rows(path)
    if not rows:
        raise SpectralDataError(f"{path}: empty table")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise SpectralDataError(f"{path}: non-numeric cell ({exc})") from None
    return rows[0], data


def read_column(path, name: Optional[str] = None) -> np.ndarray:
    """One numeric column of a table, by header name (default: the last)."""
    rows = _rows(path)
    if len(rows) < 2:
        raise SpectralDataError(f"{path}: table has no data rows")
    header = rows[0]
    if name is None:
        j = len(header) - 1
    elif name in header:
        j = header.index(name)
    else:
        raise SpectralDataError(f"{path}: no column {name!r}; have {header}")
    try:
        return np.array([float(r[j]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise SpectralDataError(f"{path}: bad value in column {header[j]!r} ({exc})") from None


def write_json(path, payload: dict, header: Optional[dict] = None):
    body = dict(payload)
    if header is not None:
        body = {"provenance": header, **body}
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_suffix(".json")


def read_cube(path, sidecar=None) -> HyperCube:
    meta = json.loads(Path(sidecar or sidecar_path(path)).read_text())
    if meta.get("pixel_order", "row-major") != "row-major":
        raise SpectralDataError("only row-major pixel order is supported")
    return HyperCube(int(meta["width"]), int(meta["height"]), read_spectra(path))


def write_cube(path, cube: HyperCube, header: Optional[dict] = None):
    write_spectra(path, cube.spectra, header, label="pixel")
    meta = {"width": cube.width, "height": cube.height, "pixel_order": "row-major"}
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")
