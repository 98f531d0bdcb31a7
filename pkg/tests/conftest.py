from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from unlabeled_detect.experiments import worked_example_model
from unlabeled_detect.probability import DistributionClass, HypothesisModel, Pmf, TypeVector
from unlabeled_detect.trellis import LogLikMatrix, build_loglik

# Columns of the five-sample, three-symbol worked instance, as exact fractions.
WORKED_COLUMNS = [
    ["1/10", "3/10", "3/5"],
    ["1/12", "1/3", "7/12"],
    ["1/6", "1/3", "1/2"],
    ["1/4", "1/3", "5/12"],
    ["1/3", "1/3", "1/3"],
]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def worked_model():
    return worked_example_model()


@pytest.fixture(scope="session")
def worked_trellis():
    cols = np.array([[float(Fraction(v)) for v in col] for col in WORKED_COLUMNS])
    return LogLikMatrix(np.log(cols).T)


@pytest.fixture(scope="session")
def worked_type():
    return TypeVector([2, 1, 2])


def random_trellis(rng, m, n, concentration=1.0):
    return LogLikMatrix(np.log(rng.dirichlet(np.full(m, concentration), size=n)).T)


def random_type(rng, m, n):
    return TypeVector(np.bincount(rng.integers(0, m, size=n), minlength=m))


def binary_class_model(a, b, c, d):
    """Two half-weight classes per hypothesis on a binary alphabet."""
    def two(x, y):
        return [DistributionClass(Pmf([x, 1 - x]), 0.5), DistributionClass(Pmf([y, 1 - y]), 0.5)]

    return HypothesisModel(two(a, b), two(c, d))


def iid_model(p, q):
    return HypothesisModel([DistributionClass(Pmf(p), 1.0)], [DistributionClass(Pmf(q), 1.0)])


seeds = st.integers(min_value=0, max_value=2**32 - 1)
probs = st.floats(min_value=0.05, max_value=0.95)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_report(request):
    results = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(k, ok, detail):
        results[k] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
