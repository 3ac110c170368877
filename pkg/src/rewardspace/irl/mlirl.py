"""Maximum-likelihood IRL with a Boltzmann action likelihood.

The action likelihood is p(a | s, r) = softmax(Q_r(s, .) / T)[a] where Q_r
comes from a fixed number of softmax-weighted Bellman backups, a smooth
surrogate for optimal Q that keeps the objective differentiable.  Fitting is
plain gradient ascent on log-likelihood plus a Gaussian log-prior, with an
exact gradient propagated through the backups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DivergenceError, ValidationError
from ..mdp import softmax_rows
from ..types import LAYOUT_STATE, LAYOUT_STATE_ACTION, RewardVector
from .common import IrlProblem


@dataclass(frozen=True)
class MlirlOptions:
    temperature: float = 1.0
    step_size: float = 0.5
    iters: int = 200
    backup_steps: int = 50
    prior_mean: float = 0.0
    prior_std: float = 1.0
    layout: str = LAYOUT_STATE
    grad_tol: float = 1e-8

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        if self.prior_std <= 0:
            raise ValidationError("prior_std must be positive")
        if self.layout not in (LAYOUT_STATE, LAYOUT_STATE_ACTION):
            raise ValidationError(f"unknown reward layout {self.layout!r}")


@dataclass(frozen=True)
class MlirlResult:
    reward: RewardVector
    iterations: int
    objective: float
    grad_norm: float
    converged: bool


def _reward_matrix(r: np.ndarray, num_states: int, num_actions: int, layout: str) -> np.ndarray:
    if layout == LAYOUT_STATE:
        return np.repeat(r[:, None], num_actions, axis=1)
    return r.reshape(num_actions, num_states).T


def _soft_q(problem: IrlProblem, r: np.ndarray, opts: MlirlOptions) -> np.ndarray:
    """Q after ``backup_steps`` softmax-weighted Bellman backups."""
    mdp = problem.mdp
    reward = _reward_matrix(r, mdp.num_states, mdp.num_actions, opts.layout)
    values = np.zeros(mdp.num_states)
    q = reward.copy()
    for step in range(opts.backup_steps):
        q = reward + mdp.discount * np.einsum("ast,t->sa", mdp.transitions, values)
        if step == opts.backup_steps - 1:
            break
        probs = softmax_rows(q, opts.temperature)
        values = (probs * q).sum(axis=1)
    return q


def _soft_q_with_jacobian(problem: IrlProblem, r: np.ndarray, opts: MlirlOptions):
    """Final Q plus dQ/dr per action, propagated through the backups."""
    mdp = problem.mdp
    n_states, n_actions = mdp.num_states, mdp.num_actions
    dim = r.shape[0]
    reward = _reward_matrix(r, n_states, n_actions, opts.layout)

    # dR(s, a) / dr as per-action (S, dim) blocks
    reward_jac = []
    for a in range(n_actions):
        block = np.zeros((n_states, dim))
        if opts.layout == LAYOUT_STATE:
            block[np.arange(n_states), np.arange(n_states)] = 1.0
        else:
            block[np.arange(n_states), a * n_states + np.arange(n_states)] = 1.0
        reward_jac.append(block)

    values = np.zeros(n_states)
    values_jac = np.zeros((n_states, dim))
    q = reward.copy()
    q_jac = [block.copy() for block in reward_jac]
    for step in range(opts.backup_steps):
        q = reward + mdp.discount * np.einsum("ast,t->sa", mdp.transitions, values)
        q_jac = [
            reward_jac[a] + mdp.discount * mdp.transitions[a] @ values_jac
            for a in range(n_actions)
        ]
        if step == opts.backup_steps - 1:
            break
        probs = softmax_rows(q, opts.temperature)
        values = (probs * q).sum(axis=1)
        # dV/dQ_a = pi_a (1 + (Q_a - V) / T)
        coeff = probs * (1.0 + (q - values[:, None]) / opts.temperature)
        values_jac = np.zeros((n_states, dim))
        for a in range(n_actions):
            values_jac += coeff[:, a][:, None] * q_jac[a]
    return q, q_jac


def mlirl_objective_grad(problem: IrlProblem, r: np.ndarray,
                         opts: MlirlOptions | None = None) -> tuple[float, np.ndarray]:
    """Log-likelihood plus Gaussian log-prior, and its exact gradient."""
    opts = opts or MlirlOptions()
    r = np.asarray(r, dtype=np.float64)
    mdp = problem.mdp
    counts = problem.counts().astype(np.float64)
    q, q_jac = _soft_q_with_jacobian(problem, r, opts)

    scaled = q / opts.temperature
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loglik = float((counts * log_probs).sum())

    probs = np.exp(log_probs)
    state_counts = counts.sum(axis=1)
    # d loglik / dQ(s, a) = (N(s, a) - N(s) pi(a | s)) / T
    dq = (counts - state_counts[:, None] * probs) / opts.temperature
    grad = np.zeros_like(r)
    for a in range(mdp.num_actions):
        grad += dq[:, a] @ q_jac[a]

    centered = r - opts.prior_mean
    loglik += float(-0.5 * (centered @ centered) / opts.prior_std**2
                    - 0.5 * r.shape[0] * np.log(2.0 * np.pi * opts.prior_std**2))
    grad -= centered / opts.prior_std**2
    return loglik, grad


def _objective_only(problem: IrlProblem, r: np.ndarray, opts: MlirlOptions,
                    counts: np.ndarray) -> float:
    q = _soft_q(problem, r, opts)
    scaled = q / opts.temperature
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    centered = r - opts.prior_mean
    return float(
        (counts * log_probs).sum()
        - 0.5 * (centered @ centered) / opts.prior_std**2
        - 0.5 * r.shape[0] * np.log(2.0 * np.pi * opts.prior_std**2)
    )


def mlirl_fit(problem: IrlProblem, opts: MlirlOptions | None = None) -> MlirlResult:
    """Gradient ascent on the Boltzmann log-posterior; the step grows on
    success and halves when a step would lower the objective."""
    opts = opts or MlirlOptions()
    problem.observations.require_nonempty("mlirl_fit")
    mdp = problem.mdp
    dim = mdp.num_states if opts.layout == LAYOUT_STATE else mdp.num_states * mdp.num_actions
    counts = problem.counts().astype(np.float64)

    r = np.full(dim, opts.prior_mean)
    if opts.iters == 0:
        return MlirlResult(RewardVector(r, opts.layout), 0,
                           _objective_only(problem, r, opts, counts), np.inf, False)

    objective, grad = mlirl_objective_grad(problem, r, opts)
    step = opts.step_size
    iterations = 0
    for iterations in range(1, opts.iters + 1):
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= opts.grad_tol:
            break
        candidate = r + step * grad
        new_objective = _objective_only(problem, candidate, opts, counts)
        if not np.isfinite(new_objective):
            raise DivergenceError("MLIRL objective became non-finite",
                                  last_iterate=RewardVector(r, opts.layout))
        if new_objective >= objective:
            r = candidate
            objective, grad = mlirl_objective_grad(problem, r, opts)
            step *= 1.1
        else:
            step *= 0.5
            if step < 1e-14:
                break
    grad_norm = float(np.linalg.norm(grad))
    return MlirlResult(
        reward=RewardVector(r, opts.layout),
        iterations=iterations,
        objective=objective,
        grad_norm=grad_norm,
        converged=grad_norm <= max(opts.grad_tol, 1e-4),
    )
