import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import finiterank as fr
from finiterank.expressions import builtin_function
from finiterank.funcmodel import sf_from_expr_function


@pytest.fixture(scope="session")
def quad():
    return fr.QuadratureSpec(points_per_axis=64, refinement_levels=2, tol=1e-6)


@pytest.fixture(scope="session")
def domain_1d():
    return fr.Region.box([-6.0], [6.0], 1201)


@pytest.fixture(scope="session")
def schwartz_fam():
    return fr.schwartz_family(2, 3, 1)


@pytest.fixture(scope="session")
def sup_alpha():
    return fr.SeminormIndex("sup_all")


@pytest.fixture(scope="session")
def gauss_1d(domain_1d):
    fn = builtin_function({"builtin": "gaussian", "amplitude": 1.0, "sigma": 1.0,
                           "e": [1.0]}, 1)
    return sf_from_expr_function(fn, domain_1d, order=6, name="gauss")


@pytest.fixture(scope="session")
def plane_waves_1d(domain_1d):
    fn = builtin_function({"builtin": "plane_waves", "amplitude": 1.0, "sigma": 1.0,
                           "nodes": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]}, 1)
    return sf_from_expr_function(fn, domain_1d, order=6, name="plane_waves")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
