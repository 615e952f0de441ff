import numpy as np
import pytest

from layerscat import LayerConfig, ObjectiveSpec, ProbeSet, synthesize

from oracles import Q1_TRUTH, Q2_TRUTH, Q3_TRUTH


@pytest.fixture(scope="session")
def q1():
    return LayerConfig.from_flat(Q1_TRUTH)


@pytest.fixture(scope="session")
def q2():
    return LayerConfig.from_flat(Q2_TRUTH)


@pytest.fixture(scope="session")
def q3():
    return LayerConfig.from_flat(Q3_TRUTH)


@pytest.fixture(scope="session")
def q1_spec(q1):
    return ObjectiveSpec(synthesize(q1, ProbeSet.uniform()))


@pytest.fixture(scope="session")
def q2_spec(q2):
    return ObjectiveSpec(synthesize(q2, ProbeSet.uniform()))


def random_config(rng, m=4, n_low=0.04, n_high=30.25):
    radii = np.sort(rng.uniform(0.0, 1.0, m))
    s = rng.uniform(np.sqrt(n_low), np.sqrt(n_high), m)
    return LayerConfig(tuple(radii), tuple(s ** 2))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
