"""Fourier-multiplier ratios G^/D and the norm constants M, P, R.

For a plus component the denominator ``D(xi) = |xi| - a`` vanishes on the
resonant set.  Interval resonances sit on exact integer modes where the
orthogonality conditions force ``G_n = 0``; there the ratio is defined as 0
(the solution is sought orthogonal to those harmonics).  On continuous axes
the lattice may land arbitrarily close to the resonant sphere, and the ratio
is replaced by its radial limit (l'Hopital), computed by central
differences along the ray through the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry, Kind
from .kernels import DEFAULT_TOL, KernelSpec, RegimeTag, kernel_spectrum, resonant_set, spectrum_at

CONSTANT_NAMES = {Kind.WHOLE_SPACE: "M", Kind.INTERVAL: "P", Kind.LAYER: "R"}


class BlowUpError(ArithmeticError):
    """A plus-component kernel does not vanish on its resonant set."""

    def __init__(self, message: str, xi=None):
        self.xi = None if xi is None else tuple(float(v) for v in np.ravel(xi))
        super().__init__(message)


def default_eps_res(a: float) -> float:
    return 1e-6 * max(1.0, a)


def _magnitude(xi: np.ndarray, kind: Kind) -> float:
    return float(np.sqrt(np.sum(np.asarray(xi, float) ** 2)))


def denominator(regime: RegimeTag, magnitude):
    return magnitude - regime.a if regime.is_plus else magnitude + regime.a


def resonance_ratio(
    kernel: KernelSpec,
    geometry: Geometry,
    xi,
    *,
    eps_res: float | None = None,
    radial_step: float | None = None,
    tolerance: float = DEFAULT_TOL,
) -> complex:
    """G^(xi) / D(xi), with the resonant limit where D (nearly) vanishes."""
    regime = kernel.regime
    if regime.kind is not geometry.kind:
        regime = regime.with_kind(geometry.kind)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    mag = _magnitude(xi, geometry.kind)
    D = denominator(regime, mag)
    eps = default_eps_res(regime.a) if eps_res is None else eps_res

    if geometry.kind is Kind.INTERVAL:
        if D == 0.0:
            g = spectrum_at(kernel, geometry, [xi])[0]
            if abs(g) > tolerance:
                raise BlowUpError(f"|G_n| = {abs(g):.3e} at resonant mode n = {xi[0]:g}", xi)
            return 0j
        return complex(spectrum_at(kernel, geometry, [xi])[0] / D)

    if not regime.is_plus or abs(D) >= eps:
        return complex(spectrum_at(kernel, geometry, [xi])[0] / D)

    h = geometry.dp / 4.0 if radial_step is None else radial_step
    if geometry.kind is Kind.LAYER:
        n, p = xi[0], xi[1:]
    else:
        n, p = 0.0, xi
    pnorm = float(np.linalg.norm(p))
    direction = p / pnorm if pnorm > 0 else np.eye(len(p))[0]
    t_star = math.sqrt(max(regime.a**2 - n**2, 0.0))

    def on_ray(ts):
        pts = np.array([np.concatenate([[n], t * direction]) if geometry.kind is Kind.LAYER
                        else t * direction for t in ts])
        return spectrum_at(kernel, geometry, pts)

    g_m, g_0, g_p = on_ray([t_star - h, t_star, t_star + h])
    if abs(g_0) > tolerance:
        raise BlowUpError(
            f"|G^| = {abs(g_0):.3e} on the resonant set at |xi| = {regime.a:g}",
            np.concatenate([[n], t_star * direction]) if geometry.kind is Kind.LAYER else t_star * direction,
        )
    if t_star > 0 or regime.a == 0:
        # D'(t*) = t*/a on the layer sphere, 1 in the whole space or at an origin with a = 0
        d1 = 1.0 if (geometry.kind is Kind.WHOLE_SPACE or regime.a == 0) else t_star / regime.a
        return complex((g_p - g_m) / (2 * h) / d1)
    # layer point (n, 0) with |n| = a > 0: D ~ t^2 / (2a)
    return complex(regime.a * (g_p - 2 * g_0 + g_m) / h**2)


@dataclass(frozen=True)
class MultiplierTable:
    """Lattice arrays for one component: spectrum, ratio G^/D and resonant mask."""

    spectrum: np.ndarray
    ratio: np.ndarray
    resonant: np.ndarray
    blow_up: str | None = None


def multiplier_table(
    kernel: KernelSpec,
    geometry: Geometry,
    *,
    tolerance: float = DEFAULT_TOL,
    eps_res: float | None = None,
    radial_step: float | None = None,
    strict: bool = True,
) -> MultiplierTable:
    regime = kernel.regime
    if regime.kind is not geometry.kind:
        regime = regime.with_kind(geometry.kind)
        kernel = KernelSpec(kernel.index, regime, kernel.expr, kernel.spectral, kernel.modes, kernel.scale)
    spec = kernel_spectrum(kernel, geometry).coeffs
    lat = geometry.lattice
    D = denominator(regime, lat.magnitude)
    eps = default_eps_res(regime.a) if eps_res is None else eps_res
    if geometry.kind is Kind.INTERVAL:
        resonant = (D == 0.0) if regime.is_plus else np.zeros(D.shape, bool)
    else:
        resonant = (np.abs(D) < eps) if regime.is_plus else np.zeros(D.shape, bool)
    safe = np.where(resonant, 1.0, D)
    ratio = np.where(resonant, 0.0, spec / safe).astype(complex)
    blow = None
    if resonant.any():
        for idx in zip(*np.nonzero(resonant)):
            xi = np.array([m[idx] for m in lat.mesh])
            try:
                ratio[idx] = resonance_ratio(kernel, geometry, xi, eps_res=eps_res,
                                             radial_step=radial_step, tolerance=tolerance)
            except BlowUpError as exc:
                if strict:
                    raise
                blow = str(exc)
                ratio[idx] = spec[idx] / D[idx] if D[idx] != 0 else 0.0
    return MultiplierTable(spec, ratio, resonant, blow)


@dataclass(frozen=True)
class ComponentConstant:
    component: int
    value: float
    ratio1: float
    ratio2: float
    location: tuple[float, ...]
    attained_by: str
    blow_up: bool = False
    warning: str | None = None

    def to_dict(self) -> dict:
        out = {
            "component": self.component + 1,
            "value": self.value,
            "ratio1_sup": self.ratio1,
            "ratio2_sup": self.ratio2,
            "location": list(self.location),
            "attained_by": self.attained_by,
            "blow_up": self.blow_up,
        }
        if self.warning:
            out["warning"] = self.warning
        return out


@dataclass(frozen=True)
class MultiplierReport:
    name: str
    components: tuple[ComponentConstant, ...]
    tolerance: float
    eps_res: str = "1e-6*max(1,a)"
    notes: tuple[str, ...] = field(default=())

    @property
    def constants(self) -> tuple[float, ...]:
        return tuple(c.value for c in self.components)

    @property
    def system_constant(self) -> float:
        return max(self.constants, default=0.0)

    @property
    def blow_up(self) -> bool:
        return any(c.blow_up for c in self.components)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "system_constant": self.system_constant,
            "components": [c.to_dict() for c in self.components],
            "blow_up": self.blow_up,
            "tolerance": self.tolerance,
            "eps_res": self.eps_res,
        }


def component_constant(
    kernel: KernelSpec,
    geometry: Geometry,
    *,
    tolerance: float = DEFAULT_TOL,
    table: MultiplierTable | None = None,
    resonant_samples: bool = True,
) -> ComponentConstant:
    """max over the lattice (and resonant-set samples) of |G^/D| and |xi|^2 |G^/D|."""
    if table is None:
        table = multiplier_table(kernel, geometry, tolerance=tolerance, strict=False)
    lat = geometry.lattice
    r1 = np.abs(table.ratio).ravel()
    r2 = (lat.magnitude**2 * np.abs(table.ratio)).ravel()
    points = lat.entries()
    regime = kernel.regime.with_kind(geometry.kind)
    blow = table.blow_up
    if resonant_samples and regime.is_plus and geometry.kind is not Kind.INTERVAL:
        rs = resonant_set(regime, geometry)
        extra1, extra2 = [], []
        for pt in rs.points:
            try:
                val = abs(resonance_ratio(kernel, geometry, pt, tolerance=tolerance))
            except BlowUpError as exc:
                blow = blow or str(exc)
                val = 0.0
            extra1.append(val)
            extra2.append(regime.a**2 * val)
        if len(rs):
            r1 = np.concatenate([r1, extra1])
            r2 = np.concatenate([r2, extra2])
            points = np.concatenate([points, rs.points])
    i1 = int(np.argmax(r1)) if len(r1) else 0
    i2 = int(np.argmax(r2)) if len(r2) else 0
    s1 = float(r1[i1]) if len(r1) else 0.0
    s2 = float(r2[i2]) if len(r2) else 0.0
    if s2 > s1:
        value, idx, which = s2, i2, "ratio2"
    else:
        value, idx, which = s1, i1, "ratio1"
    loc = tuple(float(v) for v in points[idx]) if len(points) else ()
    warning = f"divergent multiplier, value at lattice resolution: {blow}" if blow else None
    return ComponentConstant(kernel.index, value, s1, s2, loc, which, blow is not None, warning)


def multiplier_norms(kernels, geometry: Geometry, *, tolerance: float = DEFAULT_TOL,
                     tables=None, strict: bool = False) -> MultiplierReport:
    """Per-component constants and their maximum (M, P or R by geometry)."""
    comps = []
    for i, kernel in enumerate(kernels):
        table = tables[i] if tables is not None else None
        comp = component_constant(kernel, geometry, tolerance=tolerance, table=table)
        if strict and comp.blow_up:
            raise BlowUpError(comp.warning or "blow-up")
        comps.append(comp)
    return MultiplierReport(CONSTANT_NAMES[geometry.kind], tuple(comps), tolerance)
