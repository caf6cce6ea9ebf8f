import pytest

from hyperreg.core_model import new_params


@pytest.fixture
def worked_example():
    """A permutation in E_1 at (n, d, k) = (9, 2, 3) with one good loop in block 0."""
    p = new_params(9, 2, 3)
    y = (1, 1, 2, 3, 4, 5, 6, 7, 8, 2, 3, 6, 4, 7, 9, 5, 8, 9)
    return p, y
