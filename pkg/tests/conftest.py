from fractions import Fraction

import pytest

from thresholds import cdf_f1, cdf_f2, solve_constants

PURSE_SIZES = (7, 18, 80, 41, 1, 30, 12, 17)


@pytest.fixture(scope="session")
def consts():
    return solve_constants()


@pytest.fixture(scope="session")
def f1():
    return cdf_f1()


@pytest.fixture(scope="session")
def f2(consts):
    return cdf_f2(consts)


@pytest.fixture
def fractions():
    def make(*values):
        return tuple(Fraction(v) for v in values)

    return make


@pytest.fixture
def write_csv(tmp_path):
    """Write rows (header first) to tmp_path/name and return the path."""

    def write(name, rows):
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in rows))
        return str(path)

    return write
