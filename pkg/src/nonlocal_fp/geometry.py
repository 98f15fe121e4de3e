"""Domain geometries, frequency lattices and the spectral transforms.

Three domains are supported:

* ``interval``: the periodic interval [0, 2pi], Fourier series with the
  unitary normalization ``G_n = int G(x) e^{-inx} / sqrt(2pi) dx``;
* ``whole_space``: R^d (d = 1..3) truncated to the box [-L, L]^d, with the
  unitary Fourier transform ``(2pi)^{-d/2} int G(x) e^{-ipx} dx`` evaluated by
  the trapezoid rule;
* ``layer``: [0, 2pi] x R^d (d = 1, 2), the product of the two.

All spectral arrays are stored in *centered* order: along every axis the
entry with index ``i`` carries the integer mode ``i - N/2``.  For a
continuous axis the physical frequency is ``mode * dp`` with
``dp = 2pi / (2L)``.  The lattice is ordered lexicographically (C order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
REALNESS_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid geometry parameters or mismatched fields."""


class RealnessError(ValueError):
    """An inverse transform produced a non-negligible imaginary part."""


class Kind(str, Enum):
    INTERVAL = "interval"
    WHOLE_SPACE = "whole_space"
    LAYER = "layer"

    @classmethod
    def parse(cls, value: "Kind | str") -> "Kind":
        if isinstance(value, Kind):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"wholespace": "whole_space", "ws": "whole_space", "int": "interval"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise GeometryError(f"unknown geometry kind {value!r}") from None


@dataclass(frozen=True)
class FrequencyLattice:
    """Discrete frequency set of a geometry.

    ``axes`` holds the frequency values per axis (integers for periodic
    axes, ``mode * dp`` for continuous ones).  ``magnitude`` is |n|, |p| or
    sqrt(n^2 + p^2) on the full lattice, and ``weight`` the (uniform)
    quadrature weight of one lattice entry in Parseval sums.
    """

    kind: Kind
    modes: tuple[np.ndarray, ...]
    axes: tuple[np.ndarray, ...]
    weight: float
    spacing: float

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(m**2 for m in self.mesh))

    @cached_property
    def transverse_magnitude(self) -> np.ndarray:
        """|p| (continuous part only); equals ``magnitude`` off the layer."""
        if self.kind is Kind.LAYER:
            return np.sqrt(sum(m**2 for m in self.mesh[1:]))
        if self.kind is Kind.INTERVAL:
            return np.zeros(self.shape)
        return self.magnitude

    def entries(self) -> np.ndarray:
        """Frequency points in lattice order, shape (size, ndim)."""
        return np.stack([m.ravel() for m in self.mesh], axis=-1)

    def mode_entries(self) -> np.ndarray:
        """Integer mode indices in lattice order, shape (size, ndim)."""
        grids = np.meshgrid(*self.modes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def index_of_mode(self, mode: Sequence[int]) -> tuple[int, ...]:
        """Array index of an integer mode tuple; raises if out of range."""
        idx = []
        for m, axis_modes in zip(mode, self.modes):
            i = int(m) - int(axis_modes[0])
            if not 0 <= i < len(axis_modes):
                raise GeometryError(f"mode {tuple(mode)} outside lattice")
            idx.append(i)
        return tuple(idx)

    def negated_index(self) -> tuple[np.ndarray, ...]:
        """Index arrays mapping each entry to the entry at -xi (Nyquist wraps)."""
        out = []
        for axis_modes in self.modes:
            n = len(axis_modes)
            i = np.arange(n)
            out.append((n - i) % n)
        return np.ix_(*out)


@dataclass(frozen=True)
class Geometry:
    kind: Kind
    d: int | None = None
    box_half_width: float | None = None
    grid_points: int | None = None
    mode_cutoff: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if self.kind is Kind.INTERVAL:
            if self.mode_cutoff is None:
                raise GeometryError("interval geometry needs mode_cutoff")
            _check_even(self.mode_cutoff, "mode_cutoff")
            return
        if self.d is None:
            raise GeometryError(f"{self.kind.value} geometry needs a dimension d")
        dmax = 3 if self.kind is Kind.WHOLE_SPACE else 2
        if not 1 <= int(self.d) <= dmax:
            raise GeometryError(f"{self.kind.value} needs 1 <= d <= {dmax}, got {self.d}")
        if self.box_half_width is None or not self.box_half_width > 0:
            raise GeometryError("box_half_width must be positive")
        if self.grid_points is None:
            raise GeometryError("grid_points required")
        _check_even(self.grid_points, "grid_points")
        if self.kind is Kind.LAYER:
            if self.mode_cutoff is None:
                raise GeometryError("layer geometry needs mode_cutoff")
            _check_even(self.mode_cutoff, "mode_cutoff")

    # ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        """Transverse dimension d used in the normalization constants."""
        return 0 if self.kind is Kind.INTERVAL else int(self.d)

    @property
    def ndim(self) -> int:
        """Number of array axes of a field."""
        if self.kind is Kind.INTERVAL:
            return 1
        if self.kind is Kind.WHOLE_SPACE:
            return int(self.d)
        return 1 + int(self.d)

    @property
    def periodic_axes(self) -> tuple[bool, ...]:
        if self.kind is Kind.INTERVAL:
            return (True,)
        if self.kind is Kind.WHOLE_SPACE:
            return (False,) * int(self.d)
        return (True,) + (False,) * int(self.d)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(
            int(self.mode_cutoff) if per else int(self.grid_points)
            for per in self.periodic_axes
        )

    @property
    def cell_volume(self) -> float:
        """Physical quadrature weight of one grid sample."""
        vol = 1.0
        for per, n in zip(self.periodic_axes, self.shape):
            vol *= (TWO_PI / n) if per else (2.0 * self.box_half_width / n)
        return vol

    @property
    def dp(self) -> float:
        """Frequency spacing of the continuous axes (pi / L)."""
        if self.kind is Kind.INTERVAL:
            return 1.0
        return TWO_PI / (2.0 * self.box_half_width)

    @property
    def convolution_constant(self) -> float:
        """(2pi)^{d/2}, sqrt(2pi) or (2pi)^{(d+1)/2}."""
        return TWO_PI ** (self.transform_dim / 2.0)

    @property
    def transform_dim(self) -> int:
        if self.kind is Kind.INTERVAL:
            return 1
        if self.kind is Kind.WHOLE_SPACE:
            return int(self.d)
        return int(self.d) + 1

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        out = []
        for per, n in zip(self.periodic_axes, self.shape):
            if per:
                out.append(TWO_PI * np.arange(n) / n)
            else:
                h = 2.0 * self.box_half_width / n
                out.append(-self.box_half_width + h * np.arange(n))
        return tuple(out)

    @cached_property
    def grid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    @cached_property
    def lattice(self) -> FrequencyLattice:
        modes, axes = [], []
        for per, n in zip(self.periodic_axes, self.shape):
            m = np.arange(-n // 2, n // 2)
            modes.append(m)
            axes.append(m.astype(float) if per else m * self.dp)
        weight = self.dp ** (self.dim if self.kind is not Kind.INTERVAL else 0)
        return FrequencyLattice(self.kind, tuple(modes), tuple(axes), weight, self.dp)

    def refined(self, factor: int = 2) -> "Geometry":
        """Same resolution on a box ``factor`` times wider (continuous axes only)."""
        if self.kind is Kind.INTERVAL:
            return self
        return Geometry(
            self.kind,
            self.d,
            self.box_half_width * factor,
            self.grid_points * factor,
            self.mode_cutoff,
        )

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kind is Kind.INTERVAL:
            out["mode_cutoff"] = int(self.mode_cutoff)
        else:
            out.update(d=int(self.d), box_half_width=float(self.box_half_width),
                       grid_points=int(self.grid_points))
            if self.kind is Kind.LAYER:
                out["mode_cutoff"] = int(self.mode_cutoff)
        return out


def _check_even(n, name):
    if int(n) != n or n <= 0 or int(n) % 2:
        raise GeometryError(f"{name} must be a positive even integer, got {n}")


def build_geometry(kind, d=None, box_half_width=None, grid_points=None, mode_cutoff=None):
    """Build a validated Geometry; its lattice is available as ``.lattice``."""
    kind = Kind.parse(kind)
    if kind is Kind.INTERVAL:
        return Geometry(kind, mode_cutoff=mode_cutoff)
    return Geometry(kind, d, box_half_width, grid_points, mode_cutoff)


def physical_env(geometry: Geometry, coords: tuple[np.ndarray, ...]) -> dict:
    """Variable bindings (x, x1, x2, ...) for expressions on ``coords``."""
    if geometry.kind is Kind.INTERVAL:
        return {"x": coords[0]}
    env = {f"x{i + 1}": c for i, c in enumerate(coords)}
    if geometry.kind is Kind.WHOLE_SPACE and geometry.d == 1:
        env["x"] = coords[0]
    return env


# ----------------------------------------------------------------------
# Field containers
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of one component on the geometry's lattice."""

    geometry: Geometry
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.geometry.shape:
            raise GeometryError(f"spectral shape {c.shape} != lattice {self.geometry.shape}")
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, mode):
        lat = self.geometry.lattice
        if np.isscalar(mode):
            mode = (mode,)
        return self.coeffs[lat.index_of_mode(mode)]

    def symmetry_defect(self) -> float:
        """max |c(-xi) - conj(c(xi))|."""
        flipped = self.coeffs[self.geometry.lattice.negated_index()]
        return float(np.max(np.abs(flipped - np.conj(self.coeffs)), initial=0.0))


@dataclass(frozen=True)
class StateVector:
    """N2 spectral components sharing one lattice, shape (N2, *lattice)."""

    geometry: Geometry
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != self.geometry.ndim + 1 or c.shape[1:] != self.geometry.shape:
            raise GeometryError(f"state shape {c.shape} incompatible with {self.geometry.shape}")
        if c.shape[0] < 1:
            raise GeometryError("state needs at least one component")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[0]

    def component(self, k: int) -> SpectralField:
        return SpectralField(self.geometry, self.coeffs[k])

    @classmethod
    def zeros(cls, geometry: Geometry, n_components: int) -> "StateVector":
        return cls(geometry, np.zeros((n_components,) + geometry.shape, dtype=complex))

    @classmethod
    def from_components(cls, fields: Iterable[SpectralField]) -> "StateVector":
        fields = list(fields)
        geo = fields[0].geometry
        if any(f.geometry != geo for f in fields):
            raise GeometryError("components live on different lattices")
        return cls(geo, np.stack([f.coeffs for f in fields]))

    def __sub__(self, other: "StateVector") -> "StateVector":
        _same_geometry(self.geometry, other.geometry)
        return StateVector(self.geometry, self.coeffs - other.coeffs)

    def __add__(self, other: "StateVector") -> "StateVector":
        _same_geometry(self.geometry, other.geometry)
        return StateVector(self.geometry, self.coeffs + other.coeffs)

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.geometry, factor * self.coeffs)


@dataclass(frozen=True)
class GridField:
    """Real samples on the physical grid, shape (n_components, *grid)."""

    geometry: Geometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            raise GeometryError("grid field values must be real")
        v = v.astype(float)
        if v.ndim == self.geometry.ndim:
            v = v[None]
        if v.shape[1:] != self.geometry.shape:
            raise GeometryError(f"grid shape {v.shape[1:]} != geometry grid {self.geometry.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]


def _same_geometry(a: Geometry, b: Geometry):
    if a != b:
        raise GeometryError("fields live on different geometries")


# ----------------------------------------------------------------------
# Transforms
# ----------------------------------------------------------------------


def _axes(geometry: Geometry, lead: int) -> tuple[int, ...]:
    return tuple(range(lead, lead + geometry.ndim))


def _continuous_axes(geometry: Geometry, lead: int) -> tuple[int, ...]:
    return tuple(lead + i for i, per in enumerate(geometry.periodic_axes) if not per)


def fft_forward(values: np.ndarray, geometry: Geometry) -> np.ndarray:
    """Array-level forward transform over the trailing ``ndim`` axes."""
    values = np.asarray(values)
    lead = values.ndim - geometry.ndim
    axes = _axes(geometry, lead)
    cont = _continuous_axes(geometry, lead)
    # continuous axes start at -L: move the origin sample to index 0 first
    shifted = np.fft.ifftshift(values, axes=cont) if cont else values
    out = np.fft.fftshift(np.fft.fftn(shifted, axes=axes), axes=axes)
    return out * (geometry.cell_volume / TWO_PI ** (geometry.transform_dim / 2.0))


def fft_inverse(coeffs: np.ndarray, geometry: Geometry) -> np.ndarray:
    """Array-level inverse of :func:`fft_forward` (complex output)."""
    coeffs = np.asarray(coeffs)
    lead = coeffs.ndim - geometry.ndim
    axes = _axes(geometry, lead)
    cont = _continuous_axes(geometry, lead)
    out = np.fft.ifftn(np.fft.ifftshift(coeffs, axes=axes), axes=axes)
    if cont:
        out = np.fft.fftshift(out, axes=cont)
    return out * (TWO_PI ** (geometry.transform_dim / 2.0) / geometry.cell_volume)


def forward_transform(field: GridField) -> StateVector:
    return StateVector(field.geometry, fft_forward(field.values, field.geometry))


def inverse_transform(state: StateVector | SpectralField, *, realness_tol: float = REALNESS_TOL) -> GridField:
    """Synthesize grid samples; raises :class:`RealnessError` if the result
    is not real to within ``realness_tol * max(1, max|Re|)``."""
    coeffs = state.coeffs if isinstance(state, StateVector) else state.coeffs[None]
    out = fft_inverse(coeffs, state.geometry)
    residue = float(np.max(np.abs(out.imag), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(out.real), initial=0.0)))
    if residue > realness_tol * scale:
        raise RealnessError(f"imaginary residue {residue:.3e} after inverse transform")
    return GridField(state.geometry, out.real)


# ----------------------------------------------------------------------
# Norms and constrained subspaces
# ----------------------------------------------------------------------


def l2_norm(state: StateVector | SpectralField) -> float:
    w = state.geometry.lattice.weight
    return float(np.sqrt(np.sum(np.abs(state.coeffs) ** 2) * w))


def h2_norm(state: StateVector | SpectralField) -> float:
    """sqrt(sum_k sum_xi (1 + |xi|^4) |u_k(xi)|^2 * weight)."""
    lat = state.geometry.lattice
    mult = 1.0 + lat.magnitude**4
    return float(np.sqrt(np.sum(mult * np.abs(state.coeffs) ** 2) * lat.weight))


def grid_l2_norm(field: GridField) -> float:
    return float(np.sqrt(np.sum(field.values**2) * field.geometry.cell_volume))


def constrained_modes(regimes, geometry: Geometry) -> list[list[int]]:
    """Per component, the integer interval modes forced to zero."""
    out = []
    for reg in regimes:
        case = getattr(reg, "case", None)
        if case == "II":
            out.append([-int(reg.n_k), int(reg.n_k)])
        elif case == "III":
            out.append([0])
        else:
            out.append([])
    return out


def project_constrained(state: StateVector, regimes) -> StateVector:
    """Zero the resonant modes of case II (+-n_k) and case III (0) components."""
    geo = state.geometry
    if geo.kind is not Kind.INTERVAL:
        raise GeometryError("mode constraints only apply to interval geometry")
    if len(regimes) != state.n_components:
        raise GeometryError("one regime per component required")
    coeffs = state.coeffs.copy()
    lat = geo.lattice
    for k, modes in enumerate(constrained_modes(regimes, geo)):
        for n in modes:
            try:
                coeffs[(k,) + lat.index_of_mode((n,))] = 0.0
            except GeometryError:
                pass  # mode beyond cutoff carries nothing
    return StateVector(geo, coeffs)
