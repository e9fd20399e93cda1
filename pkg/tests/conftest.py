import numpy as np
import pytest

from camdp import CmdpInstance
from camdp.bench import default_bench_instance, random_instance


@pytest.fixture(scope="session")
def bench_instance():
    return default_bench_instance()


@pytest.fixture
def two_cycle():
    """Deterministic 2-state cycle with rewards (1, 0)."""
    return CmdpInstance(
        n_states=2, n_actions=1,
        kernel=[[[0.0, 1.0]], [[1.0, 0.0]]],
        reward=[[1.0], [0.0]],
        constraint=[[1.0], [1.0]],
        threshold=0.0,
        start=[1.0, 0.0],
    )


@pytest.fixture
def single_state():
    return CmdpInstance(
        n_states=1, n_actions=1,
        kernel=[[[1.0]]], reward=[[0.7]], constraint=[[1.0]],
        threshold=0.0, start=[1.0],
    )


def make_random(seed, S=4, A=3, zeta=0.3):
    return random_instance(seed, S, A, zeta)


def random_stochastic_policy(rng, n_states, n_actions):
    pol = rng.dirichlet(np.ones(n_actions), size=n_states)
    return pol / pol.sum(axis=1, keepdims=True)
