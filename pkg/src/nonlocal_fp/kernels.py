"""Integral kernels, their spectra, and the admissibility (orthogonality) checks.

A kernel is given either physically, as an expression in ``x`` (or ``x1``,
``x2``, ``x3``), spectrally as a real even expression in the frequency
variables, or as a table of lattice coefficients.  Its regime tag says which
multiplier denominator it meets and therefore which orthogonality
conditions it must satisfy.

Condition identifiers used in reports:

=======  ==========================================================
or1      WS d=1, case I:   G^(+-a) = 0
or2      WS d=2,3, case I: G^ = 0 on the sphere |p| = a
or3      WS case II:       int G = 0
or4      interval II:      G_{+-n_k} = 0
or5      interval III:     int G = 0
or6/or7  layer I:          G^_n(p) = 0 for |p| = sqrt(a^2 - n^2), |n| <= n_k
or8/or9  layer II:         same with a = n_k and |n| <= n_k - 1
or10     layer II:         zeroth and first transverse moments at n = +-n_k
or11     layer III:        int G = 0
=======  ==========================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .expr import PHYSICAL_VARS, SPECTRAL_VARS, Expression, parse_expr
from .geometry import (
    TWO_PI,
    Geometry,
    GeometryError,
    Kind,
    SpectralField,
    fft_forward,
    fft_inverse,
    physical_env,
)

DEFAULT_TOL = 1e-8
SPHERE_SAMPLES = 64
PERIODICITY_TOL = 1e-8
SYMMETRY_TOL = 1e-12
DIVERGENCE_GROWTH = 0.01


class KernelError(ValueError):
    """Malformed kernel: non-real, asymmetric spectrum, not periodic."""


class RegimeError(ValueError):
    """Regime tag inconsistent with its parameters or the geometry."""


@dataclass(frozen=True)
class RegimeTag:
    """Which multiplier a component sees.

    ``case`` is one of I, II, III (plus sign, natality >= mortality) or
    IV (minus sign).  ``n_k`` is derived: the resonant integer for interval
    and layer case II, and ``floor(a)`` for layer case I.
    """

    case: str
    a: float
    kind: Kind | None = None

    def __post_init__(self):
        case = str(self.case).strip().upper()
        if case not in ("I", "II", "III", "IV"):
            raise RegimeError(f"unknown regime case {self.case!r}")
        object.__setattr__(self, "case", case)
        object.__setattr__(self, "a", float(self.a))
        if self.kind is not None:
            object.__setattr__(self, "kind", Kind.parse(self.kind))
        if self.a < 0:
            raise RegimeError("rate constant a must be nonnegative")
        if case == "IV" and not self.a > 0:
            raise RegimeError("case IV (minus sign) needs a > 0")
        if case == "II" and self.kind in (Kind.INTERVAL, Kind.LAYER):
            if self.a != round(self.a) or self.a < 1:
                raise RegimeError(f"case II needs a = n_k in N, got {self.a}")
        if self.kind is not None:
            self.validate(self.kind)

    @property
    def sign(self) -> str:
        return "minus" if self.case == "IV" else "plus"

    @property
    def is_plus(self) -> bool:
        return self.case != "IV"

    @property
    def n_k(self) -> int | None:
        if self.case == "II" and self.kind is not Kind.WHOLE_SPACE:
            return int(round(self.a))
        if self.case == "I" and self.kind is Kind.LAYER:
            return int(math.floor(self.a))
        return None

    def with_kind(self, kind) -> "RegimeTag":
        return RegimeTag(self.case, self.a, Kind.parse(kind))

    def validate(self, kind) -> None:
        kind = Kind.parse(kind)
        a, case = self.a, self.case
        if kind is Kind.WHOLE_SPACE:
            if case == "I" and not a > 0:
                raise RegimeError("whole-space case I needs a > 0")
            if case == "II" and a != 0:
                raise RegimeError("whole-space case II needs a = 0")
            if case == "III":
                raise RegimeError("whole-space regimes are I (a>0), II (a=0), IV (minus)")
        elif kind is Kind.INTERVAL:
            if case == "I" and (not a > 0 or a == round(a)):
                raise RegimeError(f"interval case I needs a > 0 not an integer, got {a}")
            if case == "III" and a != 0:
                raise RegimeError("case III needs a = 0")
            if case == "II" and (a != round(a) or a < 1):
                raise RegimeError(f"case II needs a = n_k in N, got {a}")
        else:
            if case == "II" and (a != round(a) or a < 1):
                raise RegimeError(f"case II needs a = n_k in N, got {a}")
            if case == "I":
                n = math.floor(a)
                if not (n < a < n + 1):
                    raise RegimeError(f"layer case I needs n_k < a < n_k + 1, got a = {a}")
            if case == "III" and a != 0:
                raise RegimeError("case III needs a = 0")

    def describe(self) -> dict:
        out = {"case": self.case, "a": self.a, "sign": self.sign}
        if self.n_k is not None:
            out["n_k"] = self.n_k
        return out


@dataclass(frozen=True)
class KernelSpec:
    """Kernel G_k: exactly one of ``expr`` / ``spectral`` / ``modes`` is set."""

    index: int
    regime: RegimeTag
    expr: Expression | None = None
    spectral: Expression | None = None
    modes: Mapping[tuple[int, ...], complex] | None = field(default=None, hash=False)
    scale: float = 1.0

    def __post_init__(self):
        given = sum(x is not None for x in (self.expr, self.spectral, self.modes))
        if given != 1:
            raise KernelError("kernel needs exactly one of expr, spectral, modes")

    @classmethod
    def from_expression(cls, text: str, regime: RegimeTag, index: int = 0) -> "KernelSpec":
        return cls(index, regime, expr=parse_expr(text, PHYSICAL_VARS))

    @classmethod
    def from_spectral(cls, text: str, regime: RegimeTag, index: int = 0) -> "KernelSpec":
        return cls(index, regime, spectral=parse_expr(text, SPECTRAL_VARS))

    @classmethod
    def from_modes(cls, table: Mapping, regime: RegimeTag, index: int = 0) -> "KernelSpec":
        parsed = {}
        for key, value in table.items():
            mode = _parse_mode_key(key)
            if isinstance(value, (list, tuple)):
                value = complex(value[0], value[1])
            parsed[mode] = complex(value)
        return cls(index, regime, modes=parsed)

    def scaled(self, factor: float) -> "KernelSpec":
        return KernelSpec(self.index, self.regime, self.expr, self.spectral, self.modes,
                          self.scale * factor)

    def describe(self) -> dict:
        if self.expr is not None:
            src = {"expr": self.expr.source}
        elif self.spectral is not None:
            src = {"spectral": self.spectral.source}
        else:
            src = {"modes": {",".join(map(str, k)): [v.real, v.imag] for k, v in sorted(self.modes.items())}}
        if self.scale != 1.0:
            src["scale"] = self.scale
        return src


def _parse_mode_key(key) -> tuple[int, ...]:
    if isinstance(key, (int, np.integer)):
        return (int(key),)
    if isinstance(key, tuple):
        return tuple(int(k) for k in key)
    return tuple(int(part) for part in str(key).split(","))


# ----------------------------------------------------------------------
# Evaluation
# ----------------------------------------------------------------------


def _spectral_env(geometry: Geometry, axes: tuple[np.ndarray, ...]) -> dict:
    if geometry.kind is Kind.INTERVAL:
        return {"n": axes[0]}
    if geometry.kind is Kind.WHOLE_SPACE:
        cont = axes
        env = {}
    else:
        cont = axes[1:]
        env = {"n": axes[0]}
    env.update({f"p{i + 1}": c for i, c in enumerate(cont)})
    env["p"] = cont[0] if len(cont) == 1 else np.sqrt(sum(c**2 for c in cont))
    return env


def _eval_spectral_expr(kernel: KernelSpec, geometry: Geometry, axes) -> np.ndarray:
    env = _spectral_env(geometry, axes)
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values()))
    out = kernel.spectral.evaluate(env)
    return kernel.scale * np.broadcast_to(np.asarray(out, dtype=float), shape).astype(complex)


def kernel_samples(kernel: KernelSpec, geometry: Geometry) -> np.ndarray:
    """Real samples of G_k on the physical grid."""
    if kernel.expr is not None:
        vals = np.broadcast_to(kernel.expr.evaluate(physical_env(geometry, geometry.grid)),
                               geometry.shape)
        vals = kernel.scale * np.asarray(vals, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise KernelError(f"kernel {kernel.expr.source!r} not finite on the grid")
        return vals
    spec = _lattice_spectrum(kernel, geometry)
    vals = fft_inverse(spec, geometry)
    if np.max(np.abs(vals.imag), initial=0) > 1e-10 * max(1.0, np.max(np.abs(vals.real), initial=0)):
        raise KernelError("kernel spectrum does not describe a real kernel")
    return vals.real


def _lattice_spectrum(kernel: KernelSpec, geometry: Geometry) -> np.ndarray:
    lat = geometry.lattice
    if kernel.expr is not None:
        return fft_forward(kernel_samples(kernel, geometry), geometry)
    if kernel.spectral is not None:
        return _eval_spectral_expr(kernel, geometry, lat.mesh)
    out = np.zeros(geometry.shape, dtype=complex)
    for mode, value in kernel.modes.items():
        if len(mode) != geometry.ndim:
            raise KernelError(f"mode key {mode} has wrong arity for {geometry.kind.value}")
        try:
            out[lat.index_of_mode(mode)] = kernel.scale * value
        except GeometryError:
            raise KernelError(f"mode {mode} outside the lattice") from None
    return out


def _check_periodic(kernel: KernelSpec, geometry: Geometry):
    if kernel.expr is None or geometry.kind is Kind.WHOLE_SPACE:
        return
    coords = list(geometry.coords)
    lo = coords.copy()
    hi = coords.copy()
    lo[0] = np.array([0.0])
    hi[0] = np.array([TWO_PI])
    g_lo = kernel.expr.evaluate(physical_env(geometry, tuple(np.meshgrid(*lo, indexing="ij"))))
    g_hi = kernel.expr.evaluate(physical_env(geometry, tuple(np.meshgrid(*hi, indexing="ij"))))
    defect = float(np.max(np.abs(np.asarray(g_lo) - np.asarray(g_hi)), initial=0.0))
    if defect > PERIODICITY_TOL:
        raise KernelError(f"kernel {kernel.expr.source!r} violates G(0) = G(2pi) (defect {defect:.3e})")


def l1_norm(samples: np.ndarray, geometry: Geometry) -> float:
    return float(np.sum(np.abs(samples)) * geometry.cell_volume)


def kernel_spectrum(kernel: KernelSpec, geometry: Geometry) -> SpectralField:
    """G^_k on the lattice, with symmetry, periodicity and L-infinity checks."""
    _check_periodic(kernel, geometry)
    spec = _lattice_spectrum(kernel, geometry)
    field_ = SpectralField(geometry, spec)
    scale = max(1.0, float(np.max(np.abs(spec), initial=0.0)))
    if field_.symmetry_defect() > SYMMETRY_TOL * scale:
        raise KernelError("kernel spectrum violates conjugate symmetry")
    # sup|G^| <= (2pi)^{-D/2} ||G||_1 holds exactly for the trapezoid transform
    bound = l1_norm(kernel_samples(kernel, geometry), geometry) / TWO_PI ** (geometry.transform_dim / 2)
    sup = float(np.max(np.abs(spec), initial=0.0))
    if sup > bound * (1 + 1e-9) + 1e-12:
        raise KernelError(f"sup|G^| = {sup:.6e} exceeds the L1 bound {bound:.6e}")
    return field_


def spectrum_at(kernel: KernelSpec, geometry: Geometry, points) -> np.ndarray:
    """Evaluate G^ at arbitrary frequency points, shape (M, ndim).

    Spectral expressions are evaluated exactly; physical and tabulated
    kernels use the direct trapezoid sum over the grid, which coincides with
    the lattice transform on lattice points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != geometry.ndim:
        raise GeometryError(f"points need {geometry.ndim} coordinates")
    if kernel.spectral is not None:
        return _eval_spectral_expr(kernel, geometry, tuple(pts.T))
    samples = kernel_samples(kernel, geometry).ravel()
    xs = np.stack([g.ravel() for g in geometry.grid], axis=-1)
    pref = geometry.cell_volume / TWO_PI ** (geometry.transform_dim / 2)
    out = np.empty(len(pts), dtype=complex)
    chunk = max(1, 2_000_000 // max(1, len(samples)))
    for s in range(0, len(pts), chunk):
        phase = pts[s:s + chunk] @ xs.T
        out[s:s + chunk] = pref * (np.exp(-1j * phase) @ samples)
    return out


def inner_product(samples: np.ndarray, other: np.ndarray, geometry: Geometry) -> complex:
    """(f1, f2) = int f1 conj(f2) by the trapezoid rule."""
    return complex(np.sum(samples * np.conj(other)) * geometry.cell_volume)


# ----------------------------------------------------------------------
# Resonant sets
# ----------------------------------------------------------------------


def sphere_directions(d: int, per_circle: int = SPHERE_SAMPLES) -> np.ndarray:
    """Unit vectors sampling S^{d-1}: +-1 (d=1), a circle, or a lat-long net."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    phi = TWO_PI * np.arange(per_circle) / per_circle
    if d == 2:
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    n_theta = per_circle // 2
    theta = np.pi * (np.arange(n_theta) + 0.5) / n_theta
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    dirs = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    return np.concatenate([dirs.reshape(-1, 3), [[0, 0, 1.0], [0, 0, -1.0]]])


@dataclass(frozen=True)
class ResonantSet:
    """Zero set of the multiplier denominator, with finite samples of it.

    ``points`` lists frequency points (lattice coordinates) on the set;
    ``radial`` the unit radial direction at each point (zero at an origin).
    """

    kind: Kind
    description: str
    points: np.ndarray
    radial: np.ndarray

    def __len__(self):
        return len(self.points)


def resonant_set(regime: RegimeTag, geometry: Geometry, per_circle: int = SPHERE_SAMPLES) -> ResonantSet:
    if regime.kind is not geometry.kind:
        regime = regime.with_kind(geometry.kind)
    kind = geometry.kind
    nd = geometry.ndim
    empty = np.zeros((0, nd))
    if not regime.is_plus:
        return ResonantSet(kind, "empty (|xi| + a > 0)", empty, empty)
    if kind is Kind.INTERVAL:
        if regime.case == "II":
            n = regime.n_k
            return ResonantSet(kind, f"modes +-{n}", np.array([[n], [-n]], float), np.array([[1.0], [-1.0]]))
        if regime.case == "III":
            return ResonantSet(kind, "mode 0", np.zeros((1, 1)), np.zeros((1, 1)))
        return ResonantSet(kind, "empty (a not an integer)", empty, empty)
    if kind is Kind.WHOLE_SPACE:
        d = geometry.d
        if regime.case == "II":
            return ResonantSet(kind, "origin", np.zeros((1, d)), np.zeros((1, d)))
        dirs = sphere_directions(d, per_circle)
        return ResonantSet(kind, f"sphere |p| = {regime.a}", regime.a * dirs, dirs)
    d = geometry.d
    dirs = sphere_directions(d, per_circle)
    pts, rad, parts = [], [], []
    if regime.case == "III":
        return ResonantSet(kind, "(n, p) = (0, 0)", np.zeros((1, nd)), np.zeros((1, nd)))
    a = regime.a
    top = regime.n_k if regime.case == "I" else regime.n_k - 1
    for n in range(-top, top + 1):
        r = math.sqrt(a * a - n * n)
        for u in dirs:
            pts.append(np.concatenate([[n], r * u]))
            rad.append(np.concatenate([[0.0], u]))
    if regime.case == "II":
        for n in (regime.n_k, -regime.n_k):
            pts.append(np.concatenate([[n], np.zeros(d)]))
            rad.append(np.zeros(nd))
        parts.append(f"(+-{regime.n_k}, 0)")
    desc = f"spheres |p| = sqrt({a:g}^2 - n^2), |n| <= {top}" + (" and " + parts[0] if parts else "")
    return ResonantSet(kind, desc, np.array(pts, float).reshape(-1, nd), np.array(rad, float).reshape(-1, nd))


# ----------------------------------------------------------------------
# Admissibility
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionResult:
    name: str
    defect: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class AdmissibilityReport:
    component: int
    regime: RegimeTag
    tolerance: float
    conditions: tuple[ConditionResult, ...]
    integrals: Mapping[str, float]
    finite: Mapping[str, bool]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions) and all(self.finite.values())

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def max_defect(self) -> float:
        return max((c.defect for c in self.conditions), default=0.0)

    def to_dict(self) -> dict:
        return {
            "component": self.component + 1,
            "regime": self.regime.describe(),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "conditions": {
                c.name: {"defect": c.defect, "passed": c.passed, **({"detail": c.detail} if c.detail else {})}
                for c in self.conditions
            },
            "integrals": {k: self.integrals[k] for k in sorted(self.integrals)},
            "finite": {k: self.finite[k] for k in sorted(self.finite)},
        }

    def to_text(self) -> str:
        """Flat ``key = value`` report, one line per entry."""
        pre = f"component.{self.component + 1}"
        lines = [f"{pre}.regime = {self.regime.case}", f"{pre}.a = {self.regime.a!r}",
                 f"{pre}.tolerance = {self.tolerance!r}"]
        for c in self.conditions:
            lines.append(f"{pre}.{c.name}.defect = {c.defect!r}")
            lines.append(f"{pre}.{c.name}.verdict = {'pass' if c.passed else 'fail'}")
        for k in sorted(self.integrals):
            lines.append(f"{pre}.integral.{k} = {self.integrals[k]!r}")
            lines.append(f"{pre}.integral.{k}.finite = {str(self.finite[k]).lower()}")
        lines.append(f"{pre}.verdict = {'pass' if self.passed else 'fail'}")
        return "\n".join(lines)


def _gradient_l1(samples: np.ndarray, geometry: Geometry, axes=None) -> float:
    """L1 norm of |grad G| (restricted to ``axes``) by spectral differentiation."""
    spec = fft_forward(samples, geometry)
    mesh = geometry.lattice.mesh
    axes = range(geometry.ndim) if axes is None else axes
    sq = np.zeros(geometry.shape)
    for ax in axes:
        # the Nyquist mode has no symmetric partner; drop it from derivatives
        xi = mesh[ax].copy()
        xi[(slice(None),) * ax + (0,)] = 0.0
        sq += np.real(fft_inverse(1j * xi * spec, geometry)) ** 2
    return l1_norm(np.sqrt(sq), geometry)


def _integrals(kernel: KernelSpec, geometry: Geometry, moments: tuple[str, ...]) -> dict[str, float]:
    g = kernel_samples(kernel, geometry)
    out = {"L1": l1_norm(g, geometry), "grad_L1": _gradient_l1(g, geometry)}
    grid = geometry.grid
    if geometry.kind is Kind.LAYER:
        xperp2 = sum(c**2 for c in grid[1:])
    else:
        xperp2 = sum(c**2 for c in grid)
    if "x" in moments:
        out["x_L1"] = l1_norm(np.sqrt(xperp2) * g, geometry)
    if "xperp" in moments:
        out["xperp_L1"] = l1_norm(np.sqrt(xperp2) * g, geometry)
    if "xperp2" in moments:
        out["xperp2_L1"] = l1_norm(xperp2 * g, geometry)
    return out


def _required_moments(regime: RegimeTag, kind: Kind) -> tuple[str, ...]:
    if kind is Kind.WHOLE_SPACE and regime.case in ("I", "II"):
        return ("x",)
    if kind is Kind.LAYER and regime.case in ("I", "III"):
        return ("xperp",)
    if kind is Kind.LAYER and regime.case == "II":
        return ("xperp2",)
    return ()


def _finiteness(kernel: KernelSpec, geometry: Geometry, values: dict, moments) -> dict[str, bool]:
    finite = {k: bool(np.isfinite(v)) for k, v in values.items()}
    if geometry.kind is Kind.INTERVAL or kernel.modes is not None:
        return finite
    refined = _integrals(kernel, geometry.refined(2), moments)
    for k, v in values.items():
        growth = abs(refined[k] - v)
        if growth > DIVERGENCE_GROWTH * max(abs(v), 1e-300) and growth > 1e-12:
            finite[k] = False
    return finite


def check_admissibility(kernel: KernelSpec, geometry: Geometry, tolerance: float = DEFAULT_TOL) -> AdmissibilityReport:
    """Evaluate exactly the conditions the kernel's regime requires."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    regime = kernel.regime
    regime.validate(geometry.kind)
    if regime.kind is None:
        regime = regime.with_kind(geometry.kind)
    kind = geometry.kind
    conds: list[ConditionResult] = []

    def add(name, defect, detail=""):
        conds.append(ConditionResult(name, float(defect), bool(defect <= tolerance), detail))

    samples = kernel_samples(kernel, geometry)
    if kind is Kind.INTERVAL:
        _check_periodic(kernel, geometry)
        if regime.case == "II":
            vals = spectrum_at(kernel, geometry, [[regime.n_k], [-regime.n_k]])
            add("or4", np.max(np.abs(vals)), f"|G_(+-{regime.n_k})|")
        elif regime.case == "III":
            add("or5", abs(np.sum(samples) * geometry.cell_volume), "|int G|")
    elif kind is Kind.WHOLE_SPACE:
        if regime.case == "I":
            rs = resonant_set(regime, geometry)
            vals = spectrum_at(kernel, geometry, rs.points)
            add("or1" if geometry.d == 1 else "or2", np.max(np.abs(vals)), rs.description)
        elif regime.case == "II":
            add("or3", abs(np.sum(samples) * geometry.cell_volume), "|int G|")
    else:
        _check_periodic(kernel, geometry)
        d = geometry.d
        if regime.case in ("I", "II"):
            rs = resonant_set(regime, geometry)
            sphere = rs.points
            if regime.case == "II":
                sphere = sphere[: len(sphere) - 2]
            name = {("I", 1): "or6", ("I", 2): "or7", ("II", 1): "or8", ("II", 2): "or9"}[(regime.case, d)]
            defect = np.max(np.abs(spectrum_at(kernel, geometry, sphere)), initial=0.0) if len(sphere) else 0.0
            add(name, defect, rs.description)
        if regime.case == "II":
            nk = regime.n_k
            x1 = geometry.grid[0]
            worst = 0.0
            for s in (nk, -nk):
                harmonic = np.exp(1j * s * x1) / math.sqrt(TWO_PI)
                worst = max(worst, abs(inner_product(samples, harmonic, geometry)))
                for xs in geometry.grid[1:]:
                    worst = max(worst, abs(inner_product(samples, harmonic * xs, geometry)))
            add("or10", worst, "zeroth and first transverse moments at n = +-n_k")
        elif regime.case == "III":
            add("or11", abs(np.sum(samples) * geometry.cell_volume), "|int G|")

    moments = _required_moments(regime, kind)
    integrals = _integrals(kernel, geometry, moments)
    if kind is Kind.INTERVAL:
        integrals["deriv_L1"] = integrals.pop("grad_L1")
    finite = _finiteness(kernel, geometry, integrals, moments) if kind is not Kind.INTERVAL else \
        {k: bool(np.isfinite(v)) for k, v in integrals.items()}
    return AdmissibilityReport(kernel.index, regime, tolerance, tuple(conds), integrals, finite)
