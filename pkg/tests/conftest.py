import numpy as np
import pytest

from rewardspace import Mdp


def random_mdp(rng, num_states=4, num_actions=3, discount=0.9, reward_layout="state"):
    """Random dense MDP with Dirichlet rows and standard-normal rewards."""
    transitions = rng.dirichlet(np.ones(num_states), size=(num_actions, num_states))
    if reward_layout == "state":
        reward = rng.normal(size=num_states)
    else:
        reward = rng.normal(size=num_states * num_actions)
    return Mdp(
        num_states=num_states,
        num_actions=num_actions,
        transitions=transitions,
        discount=discount,
        reward=reward,
        reward_layout=reward_layout,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_state_chain(discount=0.5):
    """s0 -> s1 deterministically, s1 self-loops; single action; R = (0, 1)."""
    transitions = np.array([[[0.0, 1.0], [0.0, 1.0]]])
    return Mdp(
        num_states=2,
        num_actions=1,
        transitions=transitions,
        discount=discount,
        reward=np.array([0.0, 1.0]),
    )
