"""Feature-expectation projection IRL for linear rewards R(s) = w . phi(s).

Matches the empirical discounted feature expectation of the observations by
iteratively projecting onto the segment between the running mixture and the
feature expectation of the optimal policy for the current weights.  Policy
feature expectations are computed exactly from the discounted state-visitation
linear system, so the margin trace is deterministic and never increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError
from ..features import BasisFunction, feature_expectation
from ..mdp import Mdp, Policy, greedy_policy, q_from_values, value_iteration
from ..types import LAYOUT_STATE, RewardVector
from .common import IrlProblem


@dataclass(frozen=True)
class ProjOptions:
    epsilon: float = 1e-3
    max_iters: int = 30
    vi_tolerance: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")


@dataclass(frozen=True)
class ProjResult:
    weights: np.ndarray
    reward: RewardVector
    margins: tuple[float, ...]
    iterations: int
    converged: bool


def policy_feature_expectation(mdp: Mdp, policy: Policy, basis: BasisFunction) -> np.ndarray:
    """Exact discounted feature expectation of a policy from its visitation system.

    mu = Phi^T d with d = (I - gamma P_pi^T)^-1 p0, the discounted expected
    visit counts starting from the MDP's initial distribution.
    """
    probs = policy.action_probabilities(mdp.num_actions)
    p_pi = np.einsum("sa,ast->st", probs, mdp.transitions)
    visitation = np.linalg.solve(
        np.eye(mdp.num_states) - mdp.discount * p_pi.T, mdp.initial_distribution
    )
    return basis.matrix.T @ visitation


def _optimal_policy_for(mdp: Mdp, reward: np.ndarray, opts: ProjOptions) -> Policy:
    solved = mdp.with_reward(reward, LAYOUT_STATE)
    vf = value_iteration(solved, tolerance=opts.vi_tolerance)
    return greedy_policy(q_from_values(solved, vf))


def proj_fit(problem: IrlProblem, basis: BasisFunction,
             opts: ProjOptions | None = None) -> ProjResult:
    """Projection IRL.  Starts from the uniform random policy and stops when
    the margin ||mu_E - mu_bar|| drops to epsilon or the iteration budget runs out."""
    opts = opts or ProjOptions()
    problem.observations.require_nonempty("proj_fit")
    mdp = problem.mdp
    if basis.matrix.shape[0] != mdp.num_states:
        raise ValidationError("basis must cover every state")

    mu_expert = feature_expectation(problem.observations, basis, mdp.discount).values
    mu_bar = policy_feature_expectation(mdp, Policy.uniform(mdp.num_states, mdp.num_actions), basis)

    margins: list[float] = []
    weights = mu_expert - mu_bar
    margin = float(np.linalg.norm(weights))
    margins.append(margin)
    iteration = 0
    while margin > opts.epsilon and iteration < opts.max_iters:
        iteration += 1
        policy = _optimal_policy_for(mdp, basis.matrix @ weights, opts)
        mu = policy_feature_expectation(mdp, policy, basis)
        direction = mu - mu_bar
        denom = float(direction @ direction)
        if denom > 0:
            # project mu_E onto the segment [mu_bar, mu]
            coefficient = float(direction @ (mu_expert - mu_bar)) / denom
            mu_bar = mu_bar + np.clip(coefficient, 0.0, 1.0) * direction
        weights = mu_expert - mu_bar
        margin = float(np.linalg.norm(weights))
        margins.append(margin)

    return ProjResult(
        weights=weights,
        reward=RewardVector(basis.matrix @ weights, LAYOUT_STATE),
        margins=tuple(margins),
        iterations=iteration,
        converged=margin <= opts.epsilon,
    )
