import numpy as np
import pytest

from setrep import FeatureSet, MatrixFeatureSet, concat_gallery


def random_vector_instance(rng, d=None, n_a=None, n_b=None, num_classes=3):
    """A random (query, gallery) pair in vector form, plus the raw arrays."""
    d = d or int(rng.integers(4, 17))
    n_a = n_a or int(rng.integers(1, 5))
    n_b = n_b or int(rng.integers(num_classes, 13))
    Y = rng.standard_normal((d, n_a))
    X = rng.standard_normal((d, n_b))
    bounds = np.linspace(0, n_b, num_classes + 1).astype(int)
    classes = []
    for c in range(num_classes):
        lo, hi = bounds[c], bounds[c + 1]
        if hi == lo:
            continue
        classes.append((c, FeatureSet(X[:, lo:hi])))
    return FeatureSet(Y), concat_gallery(classes), Y, X


def random_matrix_instance(rng, p=None, q=None, n_a=None, n_b=None, num_classes=3):
    """A random (query, gallery) pair in matrix form, plus the raw map lists."""
    p = p or int(rng.integers(5, 9))
    q = q or int(rng.integers(5, 9))
    n_a = n_a or int(rng.integers(2, 5))
    n_b = n_b or int(rng.integers(6, 13))
    Ymaps = [rng.standard_normal((p, q)) for _ in range(n_a)]
    Xmaps = [rng.standard_normal((p, q)) for _ in range(n_b)]
    bounds = np.linspace(0, n_b, num_classes + 1).astype(int)
    classes = []
    for c in range(num_classes):
        lo, hi = bounds[c], bounds[c + 1]
        if hi == lo:
            continue
        classes.append((c, MatrixFeatureSet(Xmaps[lo:hi])))
    return MatrixFeatureSet(Ymaps), concat_gallery(classes), Ymaps, Xmaps


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
