import numpy as np
import pytest

from capolab import make_random_mdp
from capolab.rng import make_rng


def random_fixtures(n, max_states=5, max_actions=4, gamma=0.9, seed=0):
    """``n`` random MDPs with sizes drawn from a dedicated stream."""
    rng = make_rng(seed, "env")
    out = []
    for i in range(n):
        S = int(rng.integers(2, max_states + 1))
        A = int(rng.integers(2, max_actions + 1))
        out.append(make_random_mdp(S, A, gamma, seed=1000 + i))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
