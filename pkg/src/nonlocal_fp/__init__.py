"""Spectral fixed-point solver and certifier for stationary nonlocal
reaction-diffusion systems with superdiffusion."""

from .geometry import (
    Geometry,
    GridField,
    Kind,
    SpectralField,
    StateVector,
    build_geometry,
    forward_transform,
    h2_norm,
    inverse_transform,
    l2_norm,
    project_constrained,
)
from .expr import parse_expr
from .kernels import KernelSpec, RegimeTag, check_admissibility
from .multipliers import BlowUpError, multiplier_norms, resonance_ratio
from .nonlinearity import NonlinearitySpec, eval_nonlinearity, lipschitz_certificate
from .solver import (
    SystemSpec,
    apply_map,
    certify_contraction,
    check_nontriviality,
    linear_solve,
    solve_fixed_point,
)
from .verify import brute_force_oracle, residual

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "Geometry",
    "GridField",
    "KernelSpec",
    "Kind",
    "NonlinearitySpec",
    "RegimeTag",
    "SpectralField",
    "StateVector",
    "SystemSpec",
    "apply_map",
    "brute_force_oracle",
    "build_geometry",
    "certify_contraction",
    "check_admissibility",
    "check_nontriviality",
    "eval_nonlinearity",
    "forward_transform",
    "h2_norm",
    "inverse_transform",
    "l2_norm",
    "linear_solve",
    "lipschitz_certificate",
    "multiplier_norms",
    "parse_expr",
    "project_constrained",
    "residual",
    "resonance_ratio",
    "solve_fixed_point",
]
