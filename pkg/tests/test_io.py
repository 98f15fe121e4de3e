import numpy as np
import pytest

from nonlocal_fp.geometry import GeometryError, GridField, build_geometry, forward_transform
from nonlocal_fp.io import grid_csv, read_grid_csv, spectral_csv


@pytest.mark.parametrize("geo", [
    build_geometry("interval", mode_cutoff=8),
    build_geometry("whole_space", d=2, box_half_width=3.0, grid_points=4),
    build_geometry("layer", d=2, box_half_width=3.0, grid_points=4, mode_cutoff=4),
])
def test_grid_round_trip(geo, rng):
    field = GridField(geo, rng.standard_normal((2,) + geo.shape))
    text = grid_csv(field)
    header = text.splitlines()[0].split(",")
    assert header == [f"x{i + 1}" for i in range(geo.ndim)] + ["u_1", "u_2"]
    assert len(text.splitlines()) == 1 + int(np.prod(geo.shape))
    back = read_grid_csv(text, geo)
    assert np.array_equal(back.values, field.values)


def test_row_order_is_lattice_order():
    geo = build_geometry("whole_space", d=2, box_half_width=2.0, grid_points=2)
    rows = grid_csv(GridField(geo, np.arange(4.0).reshape(2, 2))).splitlines()[1:]
    assert [r.split(",")[:2] for r in rows] == [["-2", "-2"], ["-2", "0"], ["0", "-2"], ["0", "0"]]
    assert [float(r.split(",")[2]) for r in rows] == [0, 1, 2, 3]


def test_grid_mismatch():
    geo = build_geometry("interval", mode_cutoff=8)
    text = grid_csv(GridField(geo, np.zeros(8)))
    with pytest.raises(GeometryError):
        read_grid_csv(text, build_geometry("interval", mode_cutoff=16))


def test_spectral_dump():
    geo = build_geometry("interval", mode_cutoff=4)
    state = forward_transform(GridField(geo, np.stack([np.cos(geo.coords[0]), np.ones(4)])))
    lines = spectral_csv(state).splitlines()
    assert lines[0] == "k,n1,re,im"
    assert len(lines) == 1 + 2 * 4
    assert lines[1].startswith("1,-2,")
    assert lines[5].startswith("2,-2,")
