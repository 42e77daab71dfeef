import numpy as np
import pytest

from sophlearn.env import N_ACTIONS, make_world
from sophlearn.planner import PlanningModel
from sophlearn.valuation import PreferenceSpec

# Two cells side by side: LEFT goes to cell 0, RIGHT to cell 1, everything else stays.
TOY_MOVES = np.array([[0, 0, 0, 1, 0], [1, 1, 0, 1, 1]], dtype=np.int64)


def toy_model(learning: bool = False, limits=(20, 22, 25), c: float = 0.1, seed: int = 0,
              visits=None, c_ucb: float = 0.0) -> PlanningModel:
    """2-cell, 2-context world; cell 0 is the hill and reveals the context."""
    rng = np.random.default_rng(seed)
    counts = rng.uniform(0.2, 3.0, size=(4, 2, 2))
    A_res = counts / counts.sum(axis=0, keepdims=True)
    A_ctx = np.zeros((3, 2, 2))
    A_ctx[:2, 0, :] = np.eye(2)
    A_ctx[2, 1, :] = 1.0
    B = np.array([[0.9, 0.2], [0.1, 0.8]])
    pref = PreferenceSpec(limits=tuple(limits), c=c)
    return PlanningModel(moves=TOY_MOVES, hill=0, A_res=A_res, A_ctx=A_ctx, B_ctx=B, preference=pref,
                         A_counts=counts if learning else None, c_ucb=c_ucb,
                         visits=None if visits is None else np.asarray(visits, dtype=float), t_global=3)


assert TOY_MOVES.shape[1] == N_ACTIONS


@pytest.fixture(scope="session")
def world():
    return make_world(123)


def random_simplex(rng, shape, axis=0):
    x = rng.gamma(1.0, size=shape)
    return x / x.sum(axis=axis, keepdims=True)
