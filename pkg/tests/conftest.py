import numpy as np
import pytest

from potnormals.specfile import load_corpus

# corpus submanifolds and a parameter box on which each is nondegenerate
SUBMANIFOLDS = {
    "circle": (-3.0, 3.0),
    "hyperbola": (-1.5, 1.5),
    "plane": (-1.0, 1.0),
    "lagrangian_graph": (-1.0, 1.0),
    "coupled_curves": (-1.0, 1.0),
    "split_graph": (-1.5, 1.5),
    "lagrangian3": (-1.0, 1.0),
}
CURVED = ("lagrangian_graph", "coupled_curves", "split_graph", "lagrangian3")


def sample_points(name, count=5, seed=0):
    spec = load_corpus(name)
    lo, hi = SUBMANIFOLDS[name]
    rng = np.random.default_rng(seed)
    return spec, rng.uniform(lo, hi, (count, spec.N))


@pytest.fixture
def circle():
    return load_corpus("circle")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
