import numpy as np
import pytest

from coop2 import models


def example_goodwin():
    return models.goodwin(models.GoodwinParams(0.5, 0.4, 0.6, 10))


def example_field_noyes():
    return models.field_noyes(models.FieldNoyesParams(0.3, 8.375e-6, 1.0, 0.2934))


@pytest.fixture(scope="session")
def goodwin_model():
    return example_goodwin()


@pytest.fixture(scope="session")
def field_noyes_model():
    return example_field_noyes()


def random_two_positive_matrix(rng):
    """Strictly conformant draw: positive tridiagonal couplings, negative
    corners, free diagonal.  Non-zero tridiagonal entries make the
    adjacency graph strongly connected."""
    A = np.zeros((3, 3))
    A[0, 0], A[1, 1], A[2, 2] = rng.uniform(-2.0, 1.0, 3)
    A[0, 1], A[1, 0], A[1, 2], A[2, 1] = rng.uniform(0.1, 2.0, 4)
    A[0, 2], A[2, 0] = rng.uniform(-2.0, -0.1, 2)
    return A


def random_saddle_candidates(seed, count):
    """Strictly conformant matrices that are unstable with negative
    determinant (rejection sampling, deterministic for a given seed)."""
    from coop2 import mat3

    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise RuntimeError("rejection sampling stalled")
        A = random_two_positive_matrix(rng)
        if mat3.det3(A) >= 0.0:
            continue
        if mat3.routh_classify(mat3.charpoly3(A)) is not mat3.RouthVerdict.UNSTABLE:
            continue
        out.append(A)
    return out
