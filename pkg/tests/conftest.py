import numpy as np
import pytest

from quadfeas._rng import complex_normal, derive_rng, unit_sphere
from quadfeas.loss import LossProblem
from quadfeas.measurement import forward_map, sample_hermitian_gaussian


def make_problem(n, m, seed, kind="gaussian"):
    """Noiseless instance with a unit-norm ground truth."""
    ens = sample_hermitian_gaussian(n, m, seed=seed)
    z = unit_sphere(derive_rng(seed, 99), n)
    return LossProblem(ens, forward_map(ens, z)), z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cvec(rng):
    def draw(n, var=1.0):
        return complex_normal(rng, n, var)

    return draw


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
