import math

import numpy as np
import pytest
from conftest import interval_demo, random_interval_system
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_fp.geometry import GridField, StateVector, build_geometry, forward_transform, h2_norm, inverse_transform
from nonlocal_fp.kernels import KernelSpec, RegimeTag
from nonlocal_fp.multipliers import BlowUpError
from nonlocal_fp.nonlinearity import NonlinearitySpec, eval_nonlinearity
from nonlocal_fp.solver import (
    ConvergenceError,
    DivergenceError,
    NotCertifiedError,
    SystemSpec,
    apply_map,
    certify_contraction,
    check_nontriviality,
    linear_solve,
    norm_bound_factor,
    random_state,
    solve_fixed_point,
)

SQRT_2PI = math.sqrt(2 * math.pi)


def single(kernel_modes, regime, forcing="0", n_modes=16, eps=0.0, coupling=()):
    geo = build_geometry("interval", mode_cutoff=n_modes)
    k = KernelSpec.from_modes(kernel_modes, regime) if isinstance(kernel_modes, dict) \
        else KernelSpec.from_expression(kernel_modes, regime)
    return SystemSpec(geo, 1 if regime.is_plus else 0, (k,), (NonlinearitySpec.build(eps, "tanh", coupling, forcing),))


# ----------------------------------------------------------------------
# system validation
# ----------------------------------------------------------------------


def test_block_order_enforced():
    geo = build_geometry("interval", mode_cutoff=16)
    ks = (KernelSpec.from_expression("cos(2*x)", RegimeTag("IV", 1)),
          KernelSpec.from_expression("cos(2*x)", RegimeTag("III", 0)))
    nls = (NonlinearitySpec(), NonlinearitySpec())
    with pytest.raises(ValueError, match="block"):
        SystemSpec(geo, 1, ks, nls)


def test_component_count_mismatch():
    geo = build_geometry("interval", mode_cutoff=16)
    with pytest.raises(ValueError):
        SystemSpec(geo, 1, (KernelSpec.from_expression("cos(2*x)", RegimeTag("III", 0)),), ())


# ----------------------------------------------------------------------
# linear_solve
# ----------------------------------------------------------------------


def test_linear_solve_constant_kernel():
    system = single({"0": 1.0}, RegimeTag("IV", 1))
    rhs = np.zeros((1, 16), complex)
    rhs[0, 8] = 2.0  # mode 0
    out = linear_solve(StateVector(system.geometry, rhs), system)
    assert out.coeffs[0, 8] == pytest.approx(2 * SQRT_2PI, rel=1e-15)
    assert out.coeffs[0, 8].real == pytest.approx(5.01326, abs=1e-5)
    assert np.count_nonzero(out.coeffs) == 1


def test_linear_solve_zero_rhs():
    system = interval_demo(32)
    assert np.all(linear_solve(system.zero_state(), system).coeffs == 0)


def test_linear_solve_case_ii_modes_exactly_zero(rng):
    system = single("cos(x) + 0.5*cos(3*x)", RegimeTag("II", 2))
    rhs = forward_transform(GridField(system.geometry, rng.standard_normal(16)))
    out = linear_solve(rhs, system)
    lat = system.geometry.lattice
    assert out.coeffs[0][lat.index_of_mode((2,))] == 0
    assert out.coeffs[0][lat.index_of_mode((-2,))] == 0


def test_linear_solve_blow_up():
    system = single("cos(2*x)", RegimeTag("II", 2))
    with pytest.raises(BlowUpError):
        linear_solve(system.zero_state(), system)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_solve_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    system = random_interval_system(rng, 16)
    shape = (system.n_components, 16)
    f = forward_transform(GridField(system.geometry, rng.standard_normal(shape)))
    g = forward_transform(GridField(system.geometry, rng.standard_normal(shape)))
    lhs = linear_solve(f.scaled(alpha) + g.scaled(beta), system)
    rhs = linear_solve(f, system).scaled(alpha) + linear_solve(g, system).scaled(beta)
    scale = max(1.0, float(np.max(np.abs(lhs.coeffs))))
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-12 * scale


# ----------------------------------------------------------------------
# apply_map
# ----------------------------------------------------------------------


def test_pure_forcing_map_is_constant(rng):
    system = interval_demo(32, eps=(0.0, 0.0))
    base = apply_map(system.zero_state(), system)
    for _ in range(3):
        v = random_state(system, rng, scale=5.0)
        assert np.array_equal(apply_map(v, system).coeffs, base.coeffs)
    g_hat = StateVector(system.geometry, forward_transform(GridField(system.geometry, system.forcing)).coeffs)
    assert np.allclose(linear_solve(g_hat, system).coeffs, base.coeffs, atol=1e-14)


def test_zero_in_zero_out():
    system = interval_demo(32, forcing=("0", "0", "0"))
    assert np.all(apply_map(system.zero_state(), system).coeffs == 0)


def test_map_output_is_real_and_constrained(rng):
    system = interval_demo(64)
    out = apply_map(random_state(system, rng), system)
    inverse_transform(out)  # raises if not real
    lat = system.geometry.lattice
    assert out.coeffs[0][lat.index_of_mode((1,))] == 0 and out.coeffs[0][lat.index_of_mode((-1,))] == 0
    assert out.coeffs[1][lat.index_of_mode((0,))] == 0


# ----------------------------------------------------------------------
# certification
# ----------------------------------------------------------------------


def test_demo_certificate(demo):
    cert = certify_contraction(demo)
    assert cert.system_constant == pytest.approx(4 * math.sqrt(math.pi / 2), rel=1e-13)
    assert cert.lipschitz == pytest.approx(0.05, rel=1e-15)
    assert cert.q == pytest.approx(2 * math.sqrt(math.pi) * 4 * math.sqrt(math.pi / 2) * 0.05, rel=1e-13)
    assert cert.q == pytest.approx(0.88857, abs=1e-5)
    assert cert.certified


def test_pure_forcing_certificate():
    cert = certify_contraction(interval_demo(32, eps=(0.0, 0.0)))
    assert cert.q == 0.0 and cert.certified


def test_uncertified():
    cert = certify_contraction(interval_demo(64, eps=(0.06, 0.08)))
    assert cert.q == pytest.approx(1.77715, abs=1e-5)
    assert not cert.certified


def test_blow_up_not_certifiable():
    cert = certify_contraction(single("cos(2*x)", RegimeTag("II", 2), eps=0.01, coupling=(1,)))
    assert not cert.certified and "blow-up" in cert.reason


@pytest.mark.parametrize("geo, name, factor", [
    (build_geometry("interval", mode_cutoff=8), "P", 4 * math.pi),
    (build_geometry("whole_space", d=2, box_half_width=5.0, grid_points=8), "M", 2 * (2 * math.pi) ** 2),
    (build_geometry("layer", d=1, box_half_width=5.0, grid_points=8, mode_cutoff=8), "R", 2 * (2 * math.pi) ** 2),
])
def test_geometry_factors(geo, name, factor):
    assert norm_bound_factor(geo) == pytest.approx(factor, rel=1e-14)


# ----------------------------------------------------------------------
# iteration
# ----------------------------------------------------------------------


def test_pure_forcing_converges_in_one_step():
    system = interval_demo(32, eps=(0.0, 0.0))
    sol = solve_fixed_point(system)
    assert sol.trace.increments[0] > 0
    assert sol.trace.increments[1] == 0.0
    assert sol.trace.iterations == 2


def test_zero_forcing_gives_zero_solution():
    system = interval_demo(32, forcing=("0", "0", "0"))
    sol = solve_fixed_point(system)
    assert np.all(sol.state.coeffs == 0)
    assert sol.residual == 0.0


def test_random_initializations_agree():
    system = interval_demo(64)
    rng = np.random.default_rng(7)
    a = solve_fixed_point(system, random_state(system, rng, scale=10.0), tol=1e-12)
    b = solve_fixed_point(system, random_state(system, rng, scale=10.0), tol=1e-12)
    assert h2_norm(a.state - b.state) <= 1e-10
    assert a.residual <= 1e-10 * (1 + a.h2_norm)


def test_fixed_point_residual(demo):
    sol = solve_fixed_point(demo)
    assert h2_norm(sol.state - apply_map(sol.state, demo)) <= sol.tol
    assert sol.residual <= 10 * sol.tol
    csv = sol.trace.to_csv().splitlines()
    assert csv[0] == "iter,increment,ratio"
    assert len(csv) == sol.trace.iterations + 1


def test_refuses_uncertified():
    system = interval_demo(32, eps=(0.06, 0.08))
    with pytest.raises(NotCertifiedError):
        solve_fixed_point(system)
    sol = solve_fixed_point(system, override=True)
    assert sol.converged


def test_divergence_detected():
    # linearized gain at mode 1 is sqrt(2pi) * sqrt(pi/2) * 50 / 2 = 25 pi
    system = single("cos(x)", RegimeTag("IV", 1), eps=50.0, coupling=(1,))
    geo = system.geometry
    init = forward_transform(GridField(geo, 1e-8 * np.cos(geo.coords[0])))
    with pytest.raises(DivergenceError) as info:
        solve_fixed_point(system, init, override=True)
    assert info.value.trace.iterations >= 2


def test_max_iter(demo):
    with pytest.raises(ConvergenceError) as info:
        solve_fixed_point(demo, max_iter=1)
    assert info.value.trace.iterations == 1


def test_constrained_modes_exact_in_every_iterate(rng):
    system = interval_demo(64)
    lat = system.geometry.lattice
    seen = []

    def probe(j, u):
        seen.append((u.coeffs[0][lat.index_of_mode((1,))], u.coeffs[0][lat.index_of_mode((-1,))],
                     u.coeffs[1][lat.index_of_mode((0,))]))

    solve_fixed_point(system, random_state(system, rng), callback=probe)
    assert seen and all(v == 0 for triple in seen for v in triple)


def test_whole_space_solve():
    geo = build_geometry("whole_space", d=1, box_half_width=16.0, grid_points=256)
    k = KernelSpec.from_spectral("(p^2 - 1)*exp(-p^2)", RegimeTag("I", 1))
    nl = NonlinearitySpec.build(0.05, "tanh", (1,), "exp(-x^2)")
    system = SystemSpec(geo, 1, (k,), (nl,))
    cert = certify_contraction(system)
    assert cert.certified
    sol = solve_fixed_point(system, tol=1e-12)
    assert sol.residual <= 1e-10
    assert sol.nontriviality.guaranteed


def test_layer_solve():
    geo = build_geometry("layer", d=1, box_half_width=12.0, grid_points=64, mode_cutoff=8)
    k = KernelSpec.from_expression("cos(x1)*exp(-x2^2)", RegimeTag("III", 0))
    nl = NonlinearitySpec.build(0.01, "sin", (1,), "cos(x1)*exp(-x2^2)")
    system = SystemSpec(geo, 1, (k,), (nl,))
    sol = solve_fixed_point(system, tol=1e-12)
    assert sol.residual <= 1e-10


# ----------------------------------------------------------------------
# nontriviality
# ----------------------------------------------------------------------


def test_gaussian_pair_is_nontrivial():
    geo = build_geometry("whole_space", d=1, box_half_width=10.0, grid_points=64)
    system = SystemSpec(geo, 0, (KernelSpec.from_expression("exp(-x^2)", RegimeTag("IV", 1)),),
                        (NonlinearitySpec.build(forcing="exp(-x^2/2)"),))
    assert check_nontriviality(system).guaranteed


def test_disjoint_supports_inconclusive():
    system = single("cos(2*x)", RegimeTag("IV", 1), forcing="1")
    assert check_nontriviality(system).verdict == "inconclusive"


def test_zero_forcing_inconclusive():
    system = interval_demo(32, forcing=("0", "0", "0"))
    assert check_nontriviality(system).verdict == "inconclusive"


# ----------------------------------------------------------------------
# properties
# ----------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_empirical_contraction(seed):
    rng = np.random.default_rng(seed)
    system = random_interval_system(rng, 16)
    cert = certify_contraction(system)
    v1 = random_state(system, rng, scale=float(rng.uniform(0.1, 20)))
    v2 = random_state(system, rng, scale=float(rng.uniform(0.1, 20)))
    gap = h2_norm(apply_map(v1, system) - apply_map(v2, system))
    assert gap <= cert.q * h2_norm(v1 - v2) + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_norm_bound(seed):
    rng = np.random.default_rng(seed)
    system = random_interval_system(rng, 16)
    cert = certify_contraction(system)
    v = random_state(system, rng, scale=5.0)
    F = eval_nonlinearity(system.nonlinearities, inverse_transform(v))
    f_l2 = float(np.sum(F.values**2) * system.geometry.cell_volume)
    lhs = h2_norm(apply_map(v, system)) ** 2
    assert lhs <= norm_bound_factor(system.geometry) * cert.system_constant**2 * f_l2 * (1 + 1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solutions_independent_of_start(seed):
    rng = np.random.default_rng(seed)
    system = interval_demo(32, eps=(float(rng.uniform(-0.03, 0.03)), float(rng.uniform(-0.04, 0.04))))
    tol = 1e-11
    a = solve_fixed_point(system, random_state(system, rng, scale=3.0), tol=tol)
    b = solve_fixed_point(system, random_state(system, rng, scale=3.0), tol=tol)
    assert h2_norm(a.state - b.state) <= 10 * tol
