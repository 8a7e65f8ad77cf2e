import math

import pytest

from expfunctional.specfun import AccuracyPolicy, quad_adaptive

# relative-only control so tiny tail values are still resolved
ORACLE = AccuracyPolicy(rel_tol=1e-13, abs_tol=1e-300)


def quad(fn, a, b):
    return quad_adaptive(fn, a, b, ORACLE)


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture
def c2():
    from expfunctional import ControlParams

    return ControlParams(2.0)


@pytest.fixture
def c_half():
    from expfunctional import ControlParams

    return ControlParams(0.5)
