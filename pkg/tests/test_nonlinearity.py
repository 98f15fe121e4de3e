import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_fp.expr import ExprDomainError
from nonlocal_fp.geometry import GridField, build_geometry
from nonlocal_fp.nonlinearity import (
    NonlinearityError,
    NonlinearitySpec,
    apply_catalog,
    check_periodicity,
    eval_nonlinearity,
    growth_defect,
    lipschitz_certificate,
    lipschitz_constant,
)

GEO = build_geometry("interval", mode_cutoff=32)
X = GEO.coords[0]


def test_zero_state_gives_forcing():
    specs = [NonlinearitySpec.build(0.5, "tanh", (1, 0), "cos(x)"),
             NonlinearitySpec.build(0.2, "sin", (1, 1), "sin(2*x)")]
    out = eval_nonlinearity(specs, GridField(GEO, np.zeros((2, 32))))
    np.testing.assert_array_equal(out.values[0], np.cos(X))
    np.testing.assert_array_equal(out.values[1], np.sin(2 * X))


def test_zero_epsilon_ignores_state(rng):
    specs = [NonlinearitySpec.build(0.0, "tanh", (1,), "1 + cos(x)")]
    out = eval_nonlinearity(specs, GridField(GEO, rng.standard_normal(32)))
    np.testing.assert_array_equal(out.values[0], 1 + np.cos(X))


def test_deviation_from_forcing_bounded_by_epsilon(rng):
    specs = [NonlinearitySpec.build(0.3, "tanh", (2, -1), "cos(x)"),
             NonlinearitySpec.build(-0.7, "sin", (0.5, 4), "0")]
    for _ in range(100):
        v = GridField(GEO, 10 * rng.standard_normal((2, 32)))
        F = eval_nonlinearity(specs, v).values
        assert np.all(np.abs(F[0] - np.cos(X)) <= 0.3 + 1e-15)
        assert np.all(np.abs(F[1]) <= 0.7 + 1e-15)


def test_explicit_values():
    specs = [NonlinearitySpec.build(0.5, "tanh", (1, 2), "x")]
    v = GridField(GEO, np.ones(32))
    with pytest.raises(NonlinearityError):
        eval_nonlinearity(specs, v)  # one row, one component, but coupling has two entries
    specs = [NonlinearitySpec.build(0.5, "tanh", (2,), None)]
    out = eval_nonlinearity(specs, GridField(GEO, np.full(32, 0.25)))
    np.testing.assert_allclose(out.values[0], 0.5 * np.tanh(0.5), rtol=1e-15)


def test_domain_error_in_forcing():
    spec = NonlinearitySpec.build(0.0, "tanh", (), "1/x")
    with pytest.raises(ExprDomainError):
        eval_nonlinearity([spec], GridField(GEO, np.zeros(32)))


def test_periodicity_check():
    assert check_periodicity([NonlinearitySpec.build(forcing="cos(x)")], GEO) < 1e-12
    with pytest.raises(NonlinearityError):
        check_periodicity([NonlinearitySpec.build(forcing="x")], GEO)


def test_bad_sigma():
    with pytest.raises(NonlinearityError):
        NonlinearitySpec.build(1.0, "relu", (1,))


def test_pure_forcing_certificate():
    cert = lipschitz_certificate([NonlinearitySpec.build(forcing="cos(x)")], 200, geometry=GEO)
    assert cert.analytic == 0.0 and cert.empirical == 0.0 and cert.passed


def test_tanh_certificate():
    cert = lipschitz_certificate([NonlinearitySpec.build(1.0, "tanh", (1,))], 1000)
    assert cert.analytic == 1.0
    assert cert.empirical <= 1.0 and cert.passed


def test_small_epsilon_certificate():
    cert = lipschitz_certificate([NonlinearitySpec.build(0.05, "sin", (1,))], 1000)
    assert cert.analytic == pytest.approx(0.05, rel=1e-15)
    assert cert.passed


def test_parallel_rows_need_the_euclidean_sum():
    # two rows driven by the same component: F = 0.1 (tanh u1, tanh u1)
    specs = [NonlinearitySpec.build(0.1, "tanh", (1, 0)), NonlinearitySpec.build(0.1, "tanh", (1, 0))]
    assert lipschitz_constant(specs) == pytest.approx(0.1 * np.sqrt(2), rel=1e-15)
    u1 = np.array([[1e-4], [0.0]])
    u2 = np.zeros((2, 1))
    diff = apply_catalog(specs, u1, np.zeros((2, 1))) - apply_catalog(specs, u2, np.zeros((2, 1)))
    quotient = np.linalg.norm(diff) / 1e-4
    assert quotient > 0.1  # a per-row maximum would undercount
    assert quotient <= lipschitz_constant(specs)


@st.composite
def catalogs(draw):
    n = draw(st.integers(1, 3))
    specs = []
    for _ in range(n):
        eps = draw(st.floats(-2, 2))
        sigma = draw(st.sampled_from(["tanh", "sin"]))
        coupling = draw(st.lists(st.floats(-3, 3), min_size=n, max_size=n))
        forcing = draw(st.sampled_from(["0", "cos(x)", "0.5*sin(3*x) + 1"]))
        specs.append(NonlinearitySpec.build(eps, sigma, coupling, forcing))
    return specs


@settings(max_examples=25, deadline=None)
@given(catalogs(), st.integers(0, 1000))
def test_empirical_quotient_below_analytic(specs, seed):
    cert = lipschitz_certificate(specs, 10_000, geometry=GEO, seed=seed)
    assert cert.passed


@settings(max_examples=40, deadline=None)
@given(catalogs(), st.integers(0, 1000))
def test_growth_bound(specs, seed):
    assert growth_defect(specs, GEO, 200, seed=seed) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(catalogs(), st.integers(0, 1000))
def test_pointwise_evaluation_commutes_with_permutation(specs, seed):
    rng = np.random.default_rng(seed)
    n = len(specs)
    v = rng.standard_normal((n, 32))
    perm = rng.permutation(32)
    forcing = np.stack([np.zeros(32) if s.forcing is None else s.forcing(x=X) for s in specs])
    a = apply_catalog(specs, v, forcing)[:, perm]
    b = apply_catalog(specs, v[:, perm], forcing[:, perm])
    np.testing.assert_array_equal(a, b)
