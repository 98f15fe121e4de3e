"""Catalog nonlinearities ``F_k(u, x) = eps_k * sigma(<c_k, u>) + g_k(x)``.

``sigma`` is tanh or sin, both bounded by 1 and 1-Lipschitz, so the
constants of the growth and Lipschitz bounds are known in closed form:

* Lipschitz:  |F(u1, x) - F(u2, x)| <= L |u1 - u2| with
  ``L = sqrt(sum_k (|eps_k| |c_k|)^2)``;
* growth:     |F(u, x)| <= K |u| + h(x) with ``K = L`` and
  ``h(x) = |(|g_k(x)| + |eps_k|)_k|``.  Since |sigma| <= 1 the bound holds
  with room to spare; it does not depend on K at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import PHYSICAL_VARS, Expression, parse_expr
from .geometry import TWO_PI, Geometry, GridField, Kind, physical_env

SIGMAS = {"tanh": np.tanh, "sin": np.sin}
SAMPLE_RADIUS = 10.0
PERIODICITY_TOL = 1e-8


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class NonlinearitySpec:
    epsilon: float = 0.0
    sigma: str = "tanh"
    coupling: tuple[float, ...] = ()
    forcing: Expression | None = None
    periodic: bool = True

    def __post_init__(self):
        if self.sigma not in SIGMAS:
            raise NonlinearityError(f"sigma must be one of {sorted(SIGMAS)}, got {self.sigma!r}")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "coupling", tuple(float(c) for c in self.coupling))

    @classmethod
    def build(cls, epsilon=0.0, sigma="tanh", coupling=(), forcing=None, periodic=True):
        expr = None if forcing in (None, "", "0") else parse_expr(str(forcing), PHYSICAL_VARS)
        return cls(epsilon, sigma, tuple(coupling), expr, periodic)

    @property
    def lipschitz(self) -> float:
        """|eps| * |c|, this row's contribution to L."""
        return abs(self.epsilon) * float(np.linalg.norm(self.coupling)) if self.coupling else 0.0

    def describe(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "coupling": list(self.coupling),
            "forcing": self.forcing.source if self.forcing is not None else "0",
        }


def _coupling_matrix(specs: Sequence[NonlinearitySpec], n: int) -> np.ndarray:
    C = np.zeros((len(specs), n))
    for k, s in enumerate(specs):
        if s.coupling:
            if len(s.coupling) != n:
                raise NonlinearityError(f"component {k + 1}: coupling has {len(s.coupling)} entries, need {n}")
            C[k] = s.coupling
    return C


def lipschitz_constant(specs: Sequence[NonlinearitySpec]) -> float:
    return float(np.sqrt(sum(s.lipschitz**2 for s in specs)))


def growth_constant(specs: Sequence[NonlinearitySpec]) -> float:
    return lipschitz_constant(specs)


def forcing_samples(spec: NonlinearitySpec, geometry: Geometry) -> np.ndarray:
    if spec.forcing is None:
        return np.zeros(geometry.shape)
    vals = spec.forcing.evaluate(physical_env(geometry, geometry.grid))
    return np.broadcast_to(np.asarray(vals, dtype=float), geometry.shape).copy()


def forcing_grid(specs: Sequence[NonlinearitySpec], geometry: Geometry) -> np.ndarray:
    return np.stack([forcing_samples(s, geometry) for s in specs])


def check_periodicity(specs: Sequence[NonlinearitySpec], geometry: Geometry) -> float:
    """max |g_k(0, .) - g_k(2pi, .)|; raises if above tolerance on periodic axes."""
    if geometry.kind is Kind.WHOLE_SPACE:
        return 0.0
    worst = 0.0
    for k, s in enumerate(specs):
        if s.forcing is None or not s.periodic:
            continue
        coords = list(geometry.coords)
        vals = []
        for x1 in (0.0, TWO_PI):
            coords[0] = np.array([x1])
            env = physical_env(geometry, tuple(np.meshgrid(*coords, indexing="ij")))
            vals.append(np.asarray(s.forcing.evaluate(env), dtype=float))
        defect = float(np.max(np.abs(vals[0] - vals[1]), initial=0.0))
        if defect > PERIODICITY_TOL:
            raise NonlinearityError(f"component {k + 1}: forcing violates F(u,0) = F(u,2pi) (defect {defect:.3e})")
        worst = max(worst, defect)
    return worst


def apply_catalog(specs: Sequence[NonlinearitySpec], values: np.ndarray, forcing: np.ndarray) -> np.ndarray:
    """Pointwise F on stacked component values (N2, ...) with precomputed forcing."""
    n = values.shape[0]
    C = _coupling_matrix(specs, n)
    arg = np.tensordot(C, values, axes=(1, 0))
    out = np.array(forcing, dtype=float, copy=True)
    for k, s in enumerate(specs):
        if s.epsilon != 0.0:
            out[k] += s.epsilon * SIGMAS[s.sigma](arg[k])
    return out


def eval_nonlinearity(specs: Sequence[NonlinearitySpec], state: GridField) -> GridField:
    """F_k(v(x), x) for every component, sampled on the grid."""
    if len(specs) != state.n_components:
        raise NonlinearityError(f"{len(specs)} nonlinearities for {state.n_components} components")
    forcing = forcing_grid(specs, state.geometry)
    return GridField(state.geometry, apply_catalog(specs, state.values, forcing))


@dataclass(frozen=True)
class LipschitzCertificate:
    analytic: float
    empirical: float
    samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return self.empirical <= self.analytic + 1e-9

    def to_dict(self) -> dict:
        return {"analytic": self.analytic, "empirical": self.empirical,
                "samples": self.samples, "seed": self.seed, "passed": self.passed}


def lipschitz_certificate(specs: Sequence[NonlinearitySpec], samples: int = 1000, *,
                          geometry: Geometry | None = None, seed: int = 0,
                          radius: float = SAMPLE_RADIUS) -> LipschitzCertificate:
    """Analytic L and the largest sampled difference quotient over random pairs."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = len(specs)
    rng = np.random.default_rng(seed)
    u1 = rng.uniform(-radius, radius, size=(n, samples))
    u2 = rng.uniform(-radius, radius, size=(n, samples))
    if geometry is not None:
        forcing = forcing_grid(specs, geometry).reshape(n, -1)
        cols = rng.integers(0, forcing.shape[1], size=samples)
        g = forcing[:, cols]
    else:
        g = np.zeros((n, samples))
    diff = apply_catalog(specs, u1, g) - apply_catalog(specs, u2, g)
    quot = np.linalg.norm(diff, axis=0) / np.linalg.norm(u1 - u2, axis=0)
    return LipschitzCertificate(lipschitz_constant(specs), float(np.max(quot)), samples, seed)


def growth_defect(specs: Sequence[NonlinearitySpec], geometry: Geometry, samples: int = 100,
                  *, seed: int = 0, radius: float = SAMPLE_RADIUS) -> float:
    """max over random (u, x) of |F(u,x)| - (K|u| + h(x)); <= 0 when the bound holds."""
    n = len(specs)
    rng = np.random.default_rng(seed)
    forcing = forcing_grid(specs, geometry).reshape(n, -1)
    cols = rng.integers(0, forcing.shape[1], size=samples)
    g = forcing[:, cols]
    u = rng.uniform(-radius, radius, size=(n, samples))
    F = apply_catalog(specs, u, g)
    lhs = np.linalg.norm(F, axis=0)
    eps = np.array([abs(s.epsilon) for s in specs])[:, None]
    rhs = growth_constant(specs) * np.linalg.norm(u, axis=0) + np.linalg.norm(np.abs(g) + eps, axis=0)
    return float(np.max(lhs - rhs))
