"""CSV serialization of grid fields, spectra and iteration traces."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .geometry import Geometry, GeometryError, GridField, StateVector


def _axis_names(geometry: Geometry) -> list[str]:
    return [f"x{i + 1}" for i in range(geometry.ndim)]


def grid_csv(field: GridField) -> str:
    """Header ``x1[,x2[,x3]],u_1,...,u_N2``; one row per grid point in lattice order."""
    geo = field.geometry
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_axis_names(geo) + [f"u_{k + 1}" for k in range(field.n_components)])
    coords = np.stack([g.ravel() for g in geo.grid], axis=1)
    vals = field.values.reshape(field.n_components, -1).T
    for c, v in zip(coords, vals):
        writer.writerow([f"{x:.17g}" for x in c] + [f"{u:.17g}" for u in v])
    return buf.getvalue()


def read_grid_csv(text: str, geometry: Geometry) -> GridField:
    """Parse :func:`grid_csv` output back onto ``geometry``; coordinates must match."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty solution file")
    header, body = rows[0], rows[1:]
    axes = _axis_names(geometry)
    if header[: len(axes)] != axes or not all(h.startswith("u_") for h in header[len(axes):]):
        raise ValueError(f"unexpected header {header}")
    data = np.array(body, dtype=float)
    npts = int(np.prod(geometry.shape))
    if data.shape[0] != npts:
        raise GeometryError(f"solution has {data.shape[0]} rows, grid has {npts} points")
    expected = np.stack([g.ravel() for g in geometry.grid], axis=1)
    if not np.allclose(data[:, : len(axes)], expected, rtol=0, atol=1e-9):
        raise GeometryError("solution coordinates do not match the configured grid")
    vals = data[:, len(axes):].T.reshape((-1,) + geometry.shape)
    return GridField(geometry, vals)


def spectral_csv(state: StateVector) -> str:
    """Columns ``k, n1[, n2...], re, im`` with one block per component."""
    geo = state.geometry
    modes = geo.lattice.mode_entries()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k"] + [f"n{i + 1}" for i in range(geo.ndim)] + ["re", "im"])
    for k in range(state.n_components):
        flat = state.coeffs[k].ravel()
        for m, c in zip(modes, flat):
            writer.writerow([k + 1, *(int(v) for v in m), f"{c.real:.17g}", f"{c.imag:.17g}"])
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
