"""Independent checks of the spectral map: a dense real-space oracle and the
spectral residual of the stationary equations."""

from __future__ import annotations

import numpy as np

from .geometry import TWO_PI, GridField, Kind, StateVector, fft_forward, inverse_transform, physical_env
from .kernels import kernel_samples
from .multipliers import BlowUpError, denominator

ORACLE_MAX_MODES = 32
ORACLE_RESONANCE_TOL = 1e-8


class OracleError(ValueError):
    pass


def _catalog_dense(system, values: np.ndarray) -> np.ndarray:
    """F_k(v(x), x) evaluated row by row, without the vectorized catalog."""
    geo = system.geometry
    env = physical_env(geo, geo.grid)
    out = np.zeros_like(values)
    for k, spec in enumerate(system.nonlinearities):
        row = np.zeros(values.shape[1:])
        if spec.epsilon != 0.0 and spec.coupling:
            arg = sum(c * values[j] for j, c in enumerate(spec.coupling))
            row = row + spec.epsilon * (np.tanh(arg) if spec.sigma == "tanh" else np.sin(arg))
        if spec.forcing is not None:
            row = row + np.asarray(spec.forcing.evaluate(env), dtype=float)
        out[k] = row
    return out


def _kernel_dense(kernel, geometry) -> np.ndarray:
    """N x N matrix G((x_i - x_j) mod 2pi)."""
    x = geometry.coords[0]
    n = len(x)
    lag = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    if kernel.expr is not None:
        vals = np.asarray(kernel.expr.evaluate({"x": x, "x1": x}), dtype=float) * kernel.scale
        vals = np.broadcast_to(vals, x.shape)
    else:
        vals = kernel_samples(kernel, geometry)
    return vals[lag]


def brute_force_oracle(v: GridField, system) -> GridField:
    """Apply the map in real space on the interval.

    The convolution is a dense trapezoid sum over all grid pairs; the
    operator sqrt(-d^2/dx^2) -+ a is inverted by projecting onto each
    harmonic e^{inx}/sqrt(2pi) explicitly and dividing by |n| -+ a.
    """
    geo = system.geometry
    if geo.kind is not Kind.INTERVAL:
        raise OracleError("the dense oracle handles interval geometry only")
    n = geo.shape[0]
    if n > ORACLE_MAX_MODES:
        raise OracleError(f"dense oracle limited to {ORACLE_MAX_MODES} modes, got {n}")
    h = TWO_PI / n
    x = geo.coords[0]
    F = _catalog_dense(system, np.asarray(v.values, dtype=float))
    modes = np.arange(-n // 2, n // 2)
    basis = np.exp(1j * np.outer(modes, x)) / np.sqrt(TWO_PI)  # (mode, point)
    out = np.zeros((system.n_components, n))
    for k, kernel in enumerate(system.kernels):
        conv = _kernel_dense(kernel, geo) @ F[k] * h
        coeff = basis.conj() @ conv * h
        reg = kernel.regime
        sol = np.zeros(n, dtype=complex)
        for i, m in enumerate(modes):
            D = denominator(reg, abs(float(m)))
            constrained = (reg.case == "II" and abs(m) == reg.n_k) or (reg.case == "III" and m == 0)
            if constrained or D == 0.0:
                if D == 0.0 and abs(coeff[i]) > ORACLE_RESONANCE_TOL and not constrained:
                    raise BlowUpError(f"resonant division at mode {m}", [m])
                continue
            sol[i] = coeff[i] / D
        out[k] = (sol @ basis).real
    return GridField(geo, out)


def residual(solution, system) -> float:
    """L2 norm over components of D_k u_k - C G_k f_k, with f = F(u) and
    Parseval weights; zero exactly at a fixed point."""
    state = solution.state if hasattr(solution, "state") else solution
    if not isinstance(state, StateVector):
        raise TypeError("residual needs a Solution or StateVector")
    geo = system.geometry
    grid = inverse_transform(state)
    f_hat = fft_forward(_catalog_dense(system, grid.values), geo)
    mag = geo.lattice.magnitude
    total = 0.0
    for k, table in enumerate(system.tables):
        D = denominator(system.kernels[k].regime, mag)
        r = D * state.coeffs[k] - geo.convolution_constant * table.spectrum * f_hat[k]
        total += float(np.sum(np.abs(r) ** 2))
    return float(np.sqrt(total * geo.lattice.weight))
