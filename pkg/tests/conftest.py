import numpy as np
import pytest

from nonlocal_fp.geometry import build_geometry
from nonlocal_fp.kernels import KernelSpec, RegimeTag
from nonlocal_fp.nonlinearity import NonlinearitySpec
from nonlocal_fp.solver import SystemSpec


def interval_demo(n_modes=256, eps=(0.03, 0.04), forcing=("cos(2*x)", "0.5*cos(2*x) + 0.1", "sin(2*x)")):
    """Three components: case II (n_k=1), case III and case IV (a=3), all with kernel cos(2x).

    Row 1 couples to u_3 through tanh, row 2 to u_1 through sin, so L = |eps|.
    """
    geo = build_geometry("interval", mode_cutoff=n_modes)
    regimes = [RegimeTag("II", 1), RegimeTag("III", 0), RegimeTag("IV", 3)]
    kernels = [KernelSpec.from_expression("cos(2*x)", r, i) for i, r in enumerate(regimes)]
    nls = [
        NonlinearitySpec.build(eps[0], "tanh", (0, 0, 1), forcing[0]),
        NonlinearitySpec.build(eps[1], "sin", (1, 0, 0), forcing[1]),
        NonlinearitySpec.build(0.0, "tanh", (), forcing[2]),
    ]
    return SystemSpec(geo, 2, tuple(kernels), tuple(nls))


@pytest.fixture
def demo():
    return interval_demo()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_interval_system(rng, n_modes):
    """Random admissible interval system: trigonometric kernels that vanish on
    each component's constrained modes, random catalog rows and forcings."""
    geo = build_geometry("interval", mode_cutoff=n_modes)
    top = n_modes // 2 - 1  # stay below the Nyquist mode so nothing aliases
    n2 = int(rng.integers(1, 4))
    n_plus = int(rng.integers(0, n2 + 1))
    kernels, nls = [], []
    for k in range(n2):
        if k < n_plus:
            case = str(rng.choice(["I", "II", "III"]))
            if case == "I":
                a = int(rng.integers(0, top)) + float(rng.uniform(0.1, 0.9))
            elif case == "II":
                a = int(rng.integers(1, top + 1))
            else:
                a = 0
        else:
            case, a = "IV", float(rng.uniform(0.2, 4.0))
        regime = RegimeTag(case, a)
        skip = {"II": int(a), "III": 0}.get(case)
        terms = []
        for m in range(top + 1):
            if m == skip:
                continue
            al, be = (float(c) for c in rng.uniform(-1, 1, 2))
            terms.append(f"({al!r})*cos({m}*x)")
            if m:
                terms.append(f"({be!r})*sin({m}*x)")
        kernels.append(KernelSpec.from_expression(" + ".join(terms), regime, k))
        m1, m2 = rng.integers(0, top + 1, 2)
        c1, c2 = (float(c) for c in rng.uniform(-1, 1, 2))
        forcing = f"({c1!r})*cos({m1}*x) + ({c2!r})*sin({m2}*x)"
        nls.append(NonlinearitySpec.build(float(rng.uniform(-0.5, 0.5)), str(rng.choice(["tanh", "sin"])),
                                          tuple(rng.uniform(-1, 1, n2)), forcing))
    return SystemSpec(geo, n_plus, tuple(kernels), tuple(nls))
