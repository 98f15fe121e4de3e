"""Linear solves, the fixed-point map, contraction certificates and iteration."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .geometry import (
    Geometry,
    GeometryError,
    Kind,
    StateVector,
    fft_forward,
    h2_norm,
    inverse_transform,
    project_constrained,
)
from .kernels import DEFAULT_TOL, KernelSpec, RegimeTag
from .multipliers import (
    BlowUpError,
    MultiplierReport,
    MultiplierTable,
    multiplier_norms,
    multiplier_table,
)
from .nonlinearity import (
    LipschitzCertificate,
    NonlinearitySpec,
    apply_catalog,
    check_periodicity,
    forcing_grid,
    lipschitz_certificate,
)

DIVERGENCE_FACTOR = 10.0
SUPPORT_THRESHOLD = 1e-12


class SolverError(RuntimeError):
    pass


class NotCertifiedError(SolverError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, message: str, trace: "IterationTrace"):
        self.trace = trace
        super().__init__(message)


class DivergenceError(ConvergenceError):
    pass


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """N2 components; the first ``n_plus`` (N1) carry the plus sign."""

    geometry: Geometry
    n_plus: int
    kernels: tuple[KernelSpec, ...]
    nonlinearities: tuple[NonlinearitySpec, ...]
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        kernels = tuple(self.kernels)
        nls = tuple(self.nonlinearities)
        n2 = len(kernels)
        if n2 < 1:
            raise ValueError("system needs at least one component")
        if len(nls) != n2:
            raise ValueError(f"{len(nls)} nonlinearities for {n2} kernels")
        if not 0 <= self.n_plus <= n2:
            raise ValueError(f"n_plus must lie in [0, {n2}], got {self.n_plus}")
        fixed = []
        for k, ker in enumerate(kernels):
            reg = ker.regime.with_kind(self.geometry.kind)
            if (k < self.n_plus) != reg.is_plus:
                block = "plus (1..N1)" if k < self.n_plus else "minus (N1+1..N2)"
                raise ValueError(f"component {k + 1} has case {reg.case} but sits in the {block} block")
            fixed.append(KernelSpec(k, reg, ker.expr, ker.spectral, ker.modes, ker.scale))
        object.__setattr__(self, "kernels", tuple(fixed))
        object.__setattr__(self, "nonlinearities", nls)
        check_periodicity(nls, self.geometry)

    @property
    def n_components(self) -> int:
        return len(self.kernels)

    @property
    def regimes(self) -> tuple[RegimeTag, ...]:
        return tuple(k.regime for k in self.kernels)

    @cached_property
    def tables(self) -> tuple[MultiplierTable, ...]:
        return tuple(multiplier_table(k, self.geometry, tolerance=self.tolerance, strict=False)
                     for k in self.kernels)

    @cached_property
    def forcing(self) -> np.ndarray:
        return forcing_grid(self.nonlinearities, self.geometry)

    @cached_property
    def ratios(self) -> np.ndarray:
        return np.stack([t.ratio for t in self.tables])

    def with_kernels(self, kernels) -> "SystemSpec":
        return SystemSpec(self.geometry, self.n_plus, tuple(kernels), self.nonlinearities, self.tolerance)

    def with_nonlinearities(self, nls) -> "SystemSpec":
        return SystemSpec(self.geometry, self.n_plus, self.kernels, tuple(nls), self.tolerance)

    def zero_state(self) -> StateVector:
        return StateVector.zeros(self.geometry, self.n_components)


def geometry_factor(geometry: Geometry) -> float:
    """sqrt(2) (2pi)^{D/2}: 2 sqrt(pi) on the interval, D = d or d + 1 otherwise."""
    return math.sqrt(2.0) * geometry.convolution_constant


def norm_bound_factor(geometry: Geometry) -> float:
    """2 (2pi)^d, 4 pi or 2 (2pi)^{d+1}."""
    return geometry_factor(geometry) ** 2


# ----------------------------------------------------------------------
# The map
# ----------------------------------------------------------------------


def linear_solve(rhs: StateVector, system: SystemSpec) -> StateVector:
    """u_k = C * G_k / D_k * f_k on the lattice; constrained modes are exact zeros."""
    if rhs.geometry != system.geometry:
        raise GeometryError("rhs lattice does not match the system")
    if rhs.n_components != system.n_components:
        raise GeometryError(f"rhs has {rhs.n_components} components, system {system.n_components}")
    for k, table in enumerate(system.tables):
        if table.blow_up:
            raise BlowUpError(f"component {k + 1}: {table.blow_up}")
    out = StateVector(system.geometry, system.geometry.convolution_constant * system.ratios * rhs.coeffs)
    if system.geometry.kind is Kind.INTERVAL:
        out = project_constrained(out, system.regimes)
    return out


def nonlinear_rhs(v: StateVector, system: SystemSpec) -> StateVector:
    """Spectrum of F_k(v(x), x)."""
    grid = inverse_transform(v)
    F = apply_catalog(system.nonlinearities, grid.values, system.forcing)
    return StateVector(system.geometry, fft_forward(F, system.geometry))


def apply_map(v: StateVector, system: SystemSpec) -> StateVector:
    """One application of the map v -> u defined by the auxiliary linear problems."""
    return linear_solve(nonlinear_rhs(v, system), system)


# ----------------------------------------------------------------------
# Certification
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ContractionCertificate:
    name: str
    system_constant: float
    lipschitz: float
    geometry_factor: float
    q: float
    certified: bool
    multipliers: MultiplierReport
    lipschitz_check: LipschitzCertificate
    reason: str = ""

    def to_dict(self) -> dict:
        formula = {"M": "sqrt(2)*(2pi)^(d/2)*M*L", "P": "2*sqrt(pi)*P*L",
                   "R": "sqrt(2)*(2pi)^((d+1)/2)*R*L"}[self.name]
        out = {
            "constant_name": self.name,
            "system_constant": self.system_constant,
            "L": self.lipschitz,
            "geometry_factor": self.geometry_factor,
            "formula": formula,
            "q": self.q,
            "certified": self.certified,
        }
        if self.reason:
            out["reason"] = self.reason
        return out


def certify_contraction(system: SystemSpec, *, lipschitz_samples: int = 1000, seed: int = 0) -> ContractionCertificate:
    """q = geometry factor * system constant * L; certified iff q < 1."""
    report = multiplier_norms(system.kernels, system.geometry, tolerance=system.tolerance,
                              tables=system.tables)
    lip = lipschitz_certificate(system.nonlinearities, lipschitz_samples, geometry=system.geometry, seed=seed)
    factor = geometry_factor(system.geometry)
    q = factor * report.system_constant * lip.analytic
    certified, reason = q < 1.0, ""
    if report.blow_up:
        certified, reason = False, "multiplier blow-up: kernel not admissible on its resonant set"
    elif not lip.passed:
        certified, reason = False, "sampled Lipschitz quotient exceeds the analytic constant"
    elif not q < 1.0:
        reason = "q >= 1"
    return ContractionCertificate(report.name, report.system_constant, lip.analytic, factor, q,
                                  certified, report, lip, reason)


# ----------------------------------------------------------------------
# Iteration
# ----------------------------------------------------------------------


@dataclass
class IterationTrace:
    increments: list[float] = field(default_factory=list)
    ratios: list[float | None] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.increments)

    def record(self, inc: float):
        prev = self.increments[-1] if self.increments else None
        self.ratios.append(inc / prev if prev else None)
        self.increments.append(inc)

    def to_csv(self) -> str:
        rows = ["iter,increment,ratio"]
        for j, (inc, r) in enumerate(zip(self.increments, self.ratios), start=1):
            rows.append(f"{j},{inc!r},{'' if r is None else repr(r)}")
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class NontrivialityVerdict:
    verdict: str
    component: int | None = None
    location: tuple[float, ...] | None = None
    threshold: float = SUPPORT_THRESHOLD

    @property
    def guaranteed(self) -> bool:
        return self.verdict == "guaranteed-nontrivial"

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict, "threshold": self.threshold}
        if self.component is not None:
            out["component"] = self.component + 1
            out["location"] = list(self.location)
        return out


@dataclass(frozen=True)
class Solution:
    state: StateVector
    residual: float
    certificate: ContractionCertificate | None
    trace: IterationTrace
    nontriviality: NontrivialityVerdict
    converged: bool
    tol: float

    @property
    def h2_norm(self) -> float:
        return h2_norm(self.state)


def check_nontriviality(system: SystemSpec, threshold: float = SUPPORT_THRESHOLD) -> NontrivialityVerdict:
    """Guaranteed nontrivial iff some G^_k and F_k(0, .)^ share a non-resonant support point."""
    F0 = apply_catalog(system.nonlinearities, np.zeros((system.n_components,) + system.geometry.shape),
                       system.forcing)
    f_hat = fft_forward(F0, system.geometry)
    lat = system.geometry.lattice
    for k, table in enumerate(system.tables):
        hit = (np.abs(table.spectrum) > threshold) & (np.abs(f_hat[k]) > threshold) & ~table.resonant
        if hit.any():
            idx = tuple(int(i[0]) for i in np.nonzero(hit))
            loc = tuple(float(m[idx]) for m in lat.mesh)
            return NontrivialityVerdict("guaranteed-nontrivial", k, loc, threshold)
    return NontrivialityVerdict("inconclusive", threshold=threshold)


def random_state(system: SystemSpec, rng: np.random.Generator, scale: float = 1.0, decay: float = 2.0) -> StateVector:
    """Smooth random real state in the constrained space (spectral decay ``(1+|xi|)^-(2+decay)``)."""
    geo = system.geometry
    shape = (system.n_components,) + geo.shape
    grid = rng.standard_normal(shape)
    coeffs = fft_forward(grid, geo)
    damp = (1.0 + geo.lattice.magnitude) ** -(2.0 + decay)
    coeffs = coeffs * damp
    # drop the Nyquist planes so that the field stays exactly real under any multiplier
    for ax in range(geo.ndim):
        sl = [slice(None)] * (geo.ndim + 1)
        sl[ax + 1] = 0
        coeffs[tuple(sl)] = 0.0
    norm = h2_norm(StateVector(geo, coeffs))
    state = StateVector(geo, coeffs * (scale / norm if norm > 0 else 1.0))
    if geo.kind is Kind.INTERVAL:
        state = project_constrained(state, system.regimes)
    return state


def solve_fixed_point(
    system: SystemSpec,
    init: StateVector | None = None,
    tol: float = 1e-10,
    max_iter: int = 1000,
    *,
    override: bool = False,
    certificate: ContractionCertificate | None = None,
    callback: Callable[[int, StateVector], None] | None = None,
) -> Solution:
    """Iterate v <- apply_map(v) until the H2 increment drops to ``tol``."""
    from .verify import residual as spectral_residual

    if not tol > 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    cert = certificate if certificate is not None else certify_contraction(system)
    if not cert.certified and not override:
        raise NotCertifiedError(f"map not certified as a contraction (q = {cert.q:.6g}; {cert.reason})")
    v = init if init is not None else system.zero_state()
    if system.geometry.kind is Kind.INTERVAL:
        v = project_constrained(v, system.regimes)
    trace = IterationTrace()
    t0 = time.perf_counter()
    converged = False
    for j in range(max_iter):
        u = apply_map(v, system)
        inc = h2_norm(u - v)
        trace.record(inc)
        if callback is not None:
            callback(j + 1, u)
        v = u
        if inc <= tol:
            converged = True
            break
        if trace.increments[0] > 0 and inc > DIVERGENCE_FACTOR * trace.increments[0]:
            trace.wall_time = time.perf_counter() - t0
            raise DivergenceError(f"increment grew to {inc:.3e} after {j + 1} iterations", trace)
    trace.wall_time = time.perf_counter() - t0
    if not converged:
        raise ConvergenceError(f"no convergence within {max_iter} iterations "
                               f"(last increment {trace.increments[-1]:.3e})", trace)
    res = spectral_residual(v, system)
    return Solution(v, res, cert, trace, check_nontriviality(system), converged, tol)
