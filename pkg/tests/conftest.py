import numpy as np
import pytest

from bandloc.ensemble import (BandMatrixSpec, BoxWigner, Deterministic, GaussianTriangular, GaussianWigner,
                              HolderWigner, UniformTriangular)

# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_spec(rng: np.random.Generator, W=None, n=None, symmetry=None, seed=None) -> BandMatrixSpec:
    W = int(rng.choice([1, 2, 3, 4])) if W is None else W
    n = int(rng.integers(1, 7)) if n is None else n
    symmetry = rng.choice(["real", "complex"]) if symmetry is None else symmetry
    diag = [GaussianWigner(), HolderWigner(0.7), BoxWigner(1.5, 0.8)][int(rng.integers(3))]
    off = [GaussianTriangular(), UniformTriangular(0.9), Deterministic(0.5 * np.eye(W))][int(rng.integers(3))]
    return BandMatrixSpec(W=W, n=n, symmetry=symmetry, diag_law=diag, offdiag_law=off,
                          seed=int(rng.integers(2**32)) if seed is None else seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
