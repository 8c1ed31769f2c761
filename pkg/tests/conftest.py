import numpy as np
import pytest

from tvmsm import SimConfig, generate, validate


@pytest.fixture(scope="session")
def small_sim():
    return generate(SimConfig(n=800, D=3, effect_mode="homogeneous", seed=101))


@pytest.fixture(scope="session")
def small_ds(small_sim):
    return small_sim.panel


def make_panel(T, y=None, W=None, X=None, offset=None, outcome_kind="continuous",
               seed=0):
    """Tiny hand-rolled panel around an exposure matrix."""
    T = np.asarray(T)
    n, D = T.shape
    rng = np.random.default_rng(seed)
    if W is None:
        W = rng.standard_normal((n, 2))
    if X is None:
        X = rng.standard_normal((n, D, 2))
    if y is None:
        y = rng.standard_normal(n)
        if outcome_kind == "count":
            y = np.abs(np.round(y * 3)) + 1
    return validate(W, X, T, y, offset=offset, outcome_kind=outcome_kind)
