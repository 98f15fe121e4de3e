"""Run configuration (JSON) and the certification report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .expr import ExprError
from .geometry import Geometry, GeometryError, build_geometry
from .kernels import DEFAULT_TOL, KernelError, KernelSpec, RegimeError, RegimeTag, check_admissibility
from .nonlinearity import NonlinearityError, NonlinearitySpec
from .solver import SUPPORT_THRESHOLD, SystemSpec, certify_contraction, check_nontriviality

TOP_KEYS = {"geometry", "system", "solver", "output"}
GEOMETRY_KEYS = {"kind", "d", "box_half_width", "grid_points", "mode_cutoff"}
SYSTEM_KEYS = {"n_plus", "components", "admissibility_tol"}
COMPONENT_KEYS = {"regime", "kernel", "nonlinearity"}
REGIME_KEYS = {"case", "a"}
KERNEL_KEYS = {"expr", "spectral", "modes", "scale"}
NONLINEARITY_KEYS = {"epsilon", "sigma", "coupling", "forcing", "periodic"}
SOLVER_KEYS = {"tol", "max_iter", "init", "override_uncertified", "seed", "lipschitz_samples"}
OUTPUT_KEYS = {"dir"}


class ConfigError(ValueError):
    pass


def _check_keys(block: Any, allowed: set[str], where: str, required: set[str] = frozenset()):
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(block))
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_iter: int = 1000
    init: str = "zero"
    override_uncertified: bool = False
    seed: int = 0
    lipschitz_samples: int = 1000


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec
    solver: SolverSettings = field(default_factory=SolverSettings)
    output_dir: str = "out"
    source: dict = field(default_factory=dict, compare=False)

    @property
    def geometry(self) -> Geometry:
        return self.system.geometry


def _kernel(block: dict, regime: RegimeTag, index: int, where: str) -> KernelSpec:
    _check_keys(block, KERNEL_KEYS, where)
    given = [k for k in ("expr", "spectral", "modes") if k in block]
    if len(given) != 1:
        raise ConfigError(f"{where}: give exactly one of expr, spectral, modes")
    if "expr" in block:
        spec = KernelSpec.from_expression(str(block["expr"]), regime, index)
    elif "spectral" in block:
        spec = KernelSpec.from_spectral(str(block["spectral"]), regime, index)
    else:
        spec = KernelSpec.from_modes(block["modes"], regime, index)
    scale = block.get("scale", 1.0)
    return spec.scaled(float(scale)) if scale != 1.0 else spec


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded JSON document and build the system it describes."""
    _check_keys(data, TOP_KEYS, "config", {"geometry", "system"})
    where = "config"
    try:
        where = "geometry"
        geo = data["geometry"]
        _check_keys(geo, GEOMETRY_KEYS, where, {"kind"})
        geometry = build_geometry(**geo)

        where = "system"
        sysb = data["system"]
        _check_keys(sysb, SYSTEM_KEYS, where, {"n_plus", "components"})
        comps = sysb["components"]
        if not isinstance(comps, list) or not comps:
            raise ConfigError("system.components: expected a nonempty list")
        kernels, nls = [], []
        for i, comp in enumerate(comps):
            where = f"system.components[{i}]"
            _check_keys(comp, COMPONENT_KEYS, where, {"regime", "kernel"})
            where = f"system.components[{i}].regime"
            _check_keys(comp["regime"], REGIME_KEYS, where, {"case"})
            regime = RegimeTag(comp["regime"]["case"], comp["regime"].get("a", 0.0), geometry.kind)
            where = f"system.components[{i}].kernel"
            kernels.append(_kernel(comp["kernel"], regime, i, where))
            where = f"system.components[{i}].nonlinearity"
            nl = comp.get("nonlinearity", {})
            _check_keys(nl, NONLINEARITY_KEYS, where)
            nls.append(NonlinearitySpec.build(**nl))
        where = "system"
        system = SystemSpec(geometry, int(sysb["n_plus"]), tuple(kernels), tuple(nls),
                            float(sysb.get("admissibility_tol", DEFAULT_TOL)))

        where = "solver"
        sol = data.get("solver", {})
        _check_keys(sol, SOLVER_KEYS, where)
        settings = SolverSettings(**sol)
        if settings.init not in ("zero", "random"):
            raise ConfigError("solver.init must be 'zero' or 'random'")

        where = "output"
        out = data.get("output", {})
        _check_keys(out, OUTPUT_KEYS, where)
    except ConfigError:
        raise
    except (ExprError, GeometryError, KernelError, RegimeError, NonlinearityError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return RunConfig(system, settings, str(out.get("dir", "out")), data)


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(data)


# ----------------------------------------------------------------------
# Certification report
# ----------------------------------------------------------------------


def tool_version() -> str:
    from . import __version__

    return __version__


def cert_report(config: RunConfig) -> dict:
    """Admissibility, multiplier constants, contraction factor and nontriviality."""
    system = config.system
    settings = config.solver
    adm = [check_admissibility(k, system.geometry, system.tolerance) for k in system.kernels]
    cert = certify_contraction(system, lipschitz_samples=settings.lipschitz_samples, seed=settings.seed)
    nontrivial = check_nontriviality(system)
    certificate = cert.to_dict()
    certificate["lipschitz_check"] = cert.lipschitz_check.to_dict()
    return {
        "version": tool_version(),
        "geometry": system.geometry.describe(),
        "system": {
            "n_components": system.n_components,
            "n_plus": system.n_plus,
            "components": [
                {"regime": k.regime.describe(), "kernel": k.describe(), "nonlinearity": nl.describe()}
                for k, nl in zip(system.kernels, system.nonlinearities)
            ],
        },
        "tolerances": {
            "admissibility": system.tolerance,
            "eps_res": cert.multipliers.eps_res,
            "lipschitz_samples": settings.lipschitz_samples,
            "seed": settings.seed,
            "support_threshold": SUPPORT_THRESHOLD,
        },
        "admissibility": [r.to_dict() for r in adm],
        "admissible": all(r.passed for r in adm),
        "multipliers": cert.multipliers.to_dict(),
        "certificate": certificate,
        "nontriviality": nontrivial.to_dict(),
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
