"""rewardspace: recognize sequential decision-making agents in reward space.

The library recovers MDP reward functions from observed state-action
trajectories with inverse reinforcement learning, then clusters or
classifies agents on those reward vectors.  It ships the two benchmark
environments (stochastic GridWorld navigation and the secretary stopping
problem), action-space baseline featurizers, the recognition layer and a
batch experiment harness.
"""

from .agents import (
    AgentRecord,
    HeuristicRule,
    candidates_of,
    cohort_from_jsonl,
    cohort_to_jsonl,
    run_secretary_rule,
    run_secretary_rule_with_outcome,
    simulate_gridworld_cohort,
    simulate_secretary_cohort,
)
from .environments import (
    GridWorldSpec,
    SecretarySpec,
    build_gridworld,
    build_secretary_mdp,
    gridworld_reward,
)
from .exceptions import (
    ConfigurationError,
    DivergenceError,
    NumericalError,
    ValidationError,
)
from .features import (
    BasisFunction,
    feature_expectation,
    feature_trajectory,
    indicator_basis,
    pca_fit,
    pca_project,
)
from .learn import (
    ClusterResult,
    CvResult,
    Dataset,
    clustering_accuracy,
    cross_validate,
    kmeans,
    nmi,
    train_classifier,
)
from .mdp import (
    Mdp,
    Policy,
    QFunction,
    ValueFunction,
    bellman_backup,
    boltzmann_probs,
    greedy_policy,
    q_from_values,
    sample_trajectory,
    value_iteration,
)
from .types import FeatureVector, ObservationSet, RewardVector, Trajectory

__version__ = "0.1.0"
