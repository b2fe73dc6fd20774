import numpy as np
import pytest

from connrisk import gbdt
from connrisk.synthgen import SynthConfig, generate


@pytest.fixture(scope="session")
def small_records():
    """8k-row synthetic batch shared by tests that need realistic records."""
    return generate(SynthConfig(seed=11, n_rows=8_000))


@pytest.fixture(scope="session")
def tiny_ensemble():
    """A small trained ensemble on separable-ish 4-feature data."""
    rng = np.random.default_rng(5)
    X = rng.normal(0, 1, (300, 4))
    y = (X[:, 0] + 0.6 * X[:, 1] - 0.3 * X[:, 2] + 0.2 * rng.normal(size=300)) > 0
    config = gbdt.BoostConfig(n_rounds=8, learning_rate=0.4, max_depth=3, tree_method="exact")
    return gbdt.train(X, y, config), X, y


def make_leaf_tree(weight: float, cover: float = 10.0) -> gbdt.Tree:
    return gbdt.Tree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([0.0]),
        missing_left=np.array([True]),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        value=np.array([weight]),
        cover=np.array([cover]),
    )


def make_stump(feature: int, threshold: float, left_value: float, right_value: float,
               covers=(10.0, 5.0, 5.0), missing_left: bool = True) -> gbdt.Tree:
    return gbdt.Tree(
        feature=np.array([feature, -1, -1], dtype=np.int32),
        threshold=np.array([threshold, 0.0, 0.0]),
        missing_left=np.array([missing_left, True, True]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        value=np.array([0.0, left_value, right_value]),
        cover=np.array(covers, dtype=float),
    )
