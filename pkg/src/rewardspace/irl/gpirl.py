"""Gaussian-process preference IRL.

Learns a per-(action, state) reward vector r by MAP estimation under a
block-diagonal GP prior (one squared-exponential process per action, no
cross-action covariance) and a preference-relation likelihood: at each
observed state the observed actions strictly beat the unobserved ones
(probit of the scaled Q-gap) and co-observed actions are equivalent
(Gaussian density of the Q-gap).  An optional outer loop ascends the
Laplace-approximate evidence over the kernel hyperparameters.

Q inside the likelihood is computed from the candidate reward by an exact
Bellman solve.  Two choices are exposed: ``policy`` (default) evaluates the
empirical policy of the observations, which makes Q affine in r and the MAP
problem strictly convex; ``optimal`` re-solves for the greedy policy at each
step and differentiates through the locally fixed argmax.

The likelihood involves only a few hundred Q-gap rows, so Newton steps and
log-determinants use the Woodbury/capacitance form on the preference rows
instead of factoring the full |S||A| Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve
from scipy.special import log_ndtr

from ..exceptions import NumericalError, ValidationError
from ..mdp import greedy_policy, q_from_values, value_iteration
from ..types import LAYOUT_STATE_ACTION, RewardVector
from .common import IrlProblem, PreferenceSet, build_preferences, empirical_policy
from .kernels import GpHyper, se_kernel_matrix

Q_MODE_POLICY = "policy"
Q_MODE_OPTIMAL = "optimal"

_LOG_THETA_BOUND = 6.0
_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class GpirlOptions:
    beta: float = 1.0
    q_mode: str = Q_MODE_POLICY
    tol: float = 1e-6
    max_newton: int = 100
    hyper_iters: int = 0
    hyper_step: float = 0.25
    fd_step: float = 1e-3
    jitter: float = 1e-9
    vi_tolerance: float = 1e-8
    init_kappa: float = 0.5
    init_sigma: float = 0.1

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if self.q_mode not in (Q_MODE_POLICY, Q_MODE_OPTIMAL):
            raise ValidationError(f"unknown q_mode {self.q_mode!r}")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")


@dataclass(frozen=True)
class GpirlResult:
    reward: RewardVector
    hyper: GpHyper
    iterations: int
    objective: float
    grad_norm: float
    converged: bool
    evidence: float


def _difference_rows(problem: IrlProblem, policy_probs: np.ndarray, prefs: PreferenceSet):
    """(state, a, a') rows of the Q-gap operator D with Q = D-free form Q = L r.

    L = I + B M Pi with M = (I - gamma P_pi)^-1; only the L rows named by the
    preference relations are materialized.
    """
    mdp = problem.mdp
    n_states, n_actions = mdp.num_states, mdp.num_actions
    gamma = mdp.discount
    dim = n_states * n_actions

    tables = [prefs.strict, prefs.equivalent]
    flat_needed = sorted(
        {
            int(a) * n_states + int(s)
            for table in tables
            for s, a in zip(
                np.concatenate([table[:, 0], table[:, 0]]) if table.size else [],
                np.concatenate([table[:, 1], table[:, 2]]) if table.size else [],
            )
        }
    )
    if not flat_needed:
        return np.zeros((0, dim)), np.zeros((0, dim))

    p_pi = np.einsum("sa,ast->st", policy_probs, mdp.transitions)
    pi_map = np.zeros((n_states, dim))
    for a in range(n_actions):
        pi_map[np.arange(n_states), a * n_states + np.arange(n_states)] = policy_probs[:, a]
    # G = (I - gamma P_pi)^-1 Pi, so V = G r
    g_matrix = np.linalg.solve(np.eye(n_states) - gamma * p_pi, pi_map)

    # rows of L for just the flat (action, state) indices involved in relations
    rows_p = np.stack(
        [gamma * mdp.transitions[idx // n_states, idx % n_states] for idx in flat_needed]
    )
    l_rows = rows_p @ g_matrix
    for pos, idx in enumerate(flat_needed):
        l_rows[pos, idx] += 1.0
    lookup = {idx: pos for pos, idx in enumerate(flat_needed)}

    def rows(table: np.ndarray) -> np.ndarray:
        if table.shape[0] == 0:
            return np.zeros((0, dim))
        first = [lookup[int(a) * n_states + int(s)] for s, a in table[:, [0, 1]]]
        second = [lookup[int(a) * n_states + int(s)] for s, a in table[:, [0, 2]]]
        return l_rows[first] - l_rows[second]

    return rows(prefs.strict), rows(prefs.equivalent)


class _GpPrior:
    """Block-diagonal GP prior: per-action kernel factors, K^-1 v and K v products."""

    def __init__(self, coordinates: np.ndarray, hyper: GpHyper, jitter: float):
        self.num_states = coordinates.shape[0]
        self.num_actions = hyper.num_actions
        self.blocks = []
        self.factors = []
        self.logdet = 0.0
        for a in range(self.num_actions):
            kernel = se_kernel_matrix(coordinates, hyper, a)
            kernel[np.diag_indices_from(kernel)] += jitter
            try:
                factor = cho_factor(kernel, lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"GP kernel for action {a} is not positive definite "
                    f"(kappa={hyper.kappa[a]:.3g}, sigma={hyper.sigma[a]:.3g})"
                ) from exc
            self.blocks.append(kernel)
            self.factors.append(factor)
            self.logdet += 2.0 * float(np.sum(np.log(np.diag(factor[0]))))

    def _per_block(self, vector: np.ndarray):
        return vector.reshape(self.num_actions, self.num_states)

    def solve(self, vector: np.ndarray) -> np.ndarray:
        """K^-1 v."""
        parts = self._per_block(vector)
        return np.concatenate(
            [cho_solve(self.factors[a], parts[a], check_finite=False)
             for a in range(self.num_actions)]
        )

    def matvec(self, vector: np.ndarray) -> np.ndarray:
        """K v."""
        parts = self._per_block(vector)
        return np.concatenate([self.blocks[a] @ parts[a] for a in range(self.num_actions)])

    def right_multiply(self, matrix: np.ndarray) -> np.ndarray:
        """M K for a (rows, |S||A|) matrix, using the block structure."""
        out = np.empty_like(matrix)
        for a in range(self.num_actions):
            cols = slice(a * self.num_states, (a + 1) * self.num_states)
            out[:, cols] = matrix[:, cols] @ self.blocks[a]
        return out


class _GpirlModel:
    """MAP objective for a fixed policy linearization and fixed hyperparameters.

    Newton systems are solved in capacitance form: with likelihood Hessian
    D^T W D the inverse of (K^-1 + D^T W D) acts through the small matrix
    W^-1 + D K D^T over the preference rows.
    """

    def __init__(self, problem: IrlProblem, prefs: PreferenceSet, prior: _GpPrior,
                 policy_probs: np.ndarray, beta: float):
        self.prior = prior
        self.beta = beta
        self.d_strict, self.d_equiv = _difference_rows(problem, policy_probs, prefs)
        self.n_strict = self.d_strict.shape[0]
        self.n_equiv = self.d_equiv.shape[0]
        self.dim = prior.num_states * prior.num_actions
        self.d_all = np.vstack([self.d_strict, self.d_equiv])
        self.dk = prior.right_multiply(self.d_all) if self.d_all.shape[0] else self.d_all
        self.dkdt = self.dk @ self.d_all.T if self.d_all.shape[0] else np.zeros((0, 0))

    # -- likelihood pieces ---------------------------------------------------

    def _strict_z(self, r: np.ndarray) -> np.ndarray:
        return (self.d_strict @ r) / (np.sqrt(2.0) * self.beta)

    def neg_log_likelihood(self, r: np.ndarray) -> float:
        value = 0.0
        if self.n_strict:
            value -= float(log_ndtr(self._strict_z(r)).sum())
        if self.n_equiv:
            gaps = self.d_equiv @ r
            value += float((gaps**2).sum()) / (2.0 * self.beta**2)
            value += self.n_equiv * np.log(self.beta * _SQRT_2PI)
        return value

    def objective(self, r: np.ndarray) -> float:
        quad = 0.5 * float(r @ self.prior.solve(r))
        const = 0.5 * self.prior.logdet + 0.5 * self.dim * np.log(2.0 * np.pi)
        return self.neg_log_likelihood(r) + quad + const

    def _strict_lambda(self, z: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * z**2 - 0.5 * np.log(2.0 * np.pi) - log_ndtr(z))

    def gradient(self, r: np.ndarray) -> np.ndarray:
        grad = self.prior.solve(r)
        if self.n_strict:
            lam = self._strict_lambda(self._strict_z(r))
            grad -= self.d_strict.T @ lam / (np.sqrt(2.0) * self.beta)
        if self.n_equiv:
            grad += self.d_equiv.T @ (self.d_equiv @ r) / self.beta**2
        return grad

    def _likelihood_weights(self, r: np.ndarray) -> np.ndarray:
        """Diagonal of W: curvature of each preference term in its Q-gap row."""
        weights = np.empty(self.n_strict + self.n_equiv)
        if self.n_strict:
            z = self._strict_z(r)
            lam = self._strict_lambda(z)
            weights[: self.n_strict] = lam * (lam + z) / (2.0 * self.beta**2)
        if self.n_equiv:
            weights[self.n_strict :] = 1.0 / self.beta**2
        return np.maximum(weights, 1e-300)

    def newton_step(self, r: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Solve (K^-1 + D^T W D) step = -grad via the capacitance matrix."""
        kg = self.prior.matvec(grad)
        if self.d_all.shape[0] == 0:
            return -kg
        weights = self._likelihood_weights(r)
        capacitance = self.dkdt + np.diag(1.0 / weights)
        try:
            factor = cho_factor(capacitance, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("capacitance matrix is not positive definite") from exc
        correction = self.dk.T @ cho_solve(factor, self.d_all @ kg, check_finite=False)
        return -(kg - correction)

    def logdet_hessian(self, r: np.ndarray) -> float:
        """log det(K^-1 + D^T W D) = -log det K + log det(I + W^1/2 D K D^T W^1/2)."""
        value = -self.prior.logdet
        if self.d_all.shape[0]:
            root = np.sqrt(self._likelihood_weights(r))
            inner = np.eye(self.d_all.shape[0]) + root[:, None] * self.dkdt * root[None, :]
            try:
                factor = cho_factor(inner, lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise NumericalError("Laplace Hessian is not positive definite") from exc
            value += 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
        return value


def _policy_probs_for(problem: IrlProblem, opts: GpirlOptions, r: np.ndarray) -> np.ndarray:
    """Linearization policy: empirical (fixed) or greedy at the current reward."""
    if opts.q_mode == Q_MODE_POLICY:
        return empirical_policy(problem.observations, problem.mdp.num_states,
                                problem.mdp.num_actions)
    solved = problem.mdp.with_reward(r, LAYOUT_STATE_ACTION)
    vf = value_iteration(solved, tolerance=opts.vi_tolerance)
    policy = greedy_policy(q_from_values(solved, vf))
    return policy.action_probabilities(problem.mdp.num_actions)


def _build_model(problem: IrlProblem, prefs: PreferenceSet, opts: GpirlOptions,
                 hyper: GpHyper, r: np.ndarray, prior: _GpPrior | None = None) -> _GpirlModel:
    if prior is None:
        prior = _GpPrior(problem.mdp.coordinates_or_indices(), hyper, opts.jitter)
    return _GpirlModel(problem, prefs, prior, _policy_probs_for(problem, opts, r), opts.beta)


def _newton_solve(problem, prefs, opts: GpirlOptions, hyper: GpHyper, r0: np.ndarray):
    """Damped Newton on the MAP objective; returns (r, iterations, grad_norm, converged, model)."""
    r = r0.copy()
    model = _build_model(problem, prefs, opts, hyper, r)
    for iteration in range(1, opts.max_newton + 1):
        if opts.q_mode == Q_MODE_OPTIMAL and iteration > 1:
            model = _build_model(problem, prefs, opts, hyper, r, prior=model.prior)
        grad = model.gradient(r)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= opts.tol:
            return r, iteration - 1, grad_norm, True, model
        step = model.newton_step(r, grad)
        value = model.objective(r)
        descent = float(grad @ step)
        if descent >= 0:
            step = -grad  # fall back to steepest descent
            descent = -float(grad @ grad)
        t = 1.0
        for _ in range(40):
            candidate = r + t * step
            if model.objective(candidate) <= value + 1e-4 * t * descent:
                r = candidate
                break
            t *= 0.5
        else:
            grad_norm = float(np.linalg.norm(model.gradient(r)))
            return r, iteration, grad_norm, grad_norm <= opts.tol, model
    grad_norm = float(np.linalg.norm(model.gradient(r)))
    return r, opts.max_newton, grad_norm, grad_norm <= opts.tol, model


def _laplace_evidence(model: _GpirlModel, r: np.ndarray) -> float:
    """log p(O | theta) under the Laplace approximation at the MAP point."""
    quad = 0.5 * float(r @ model.prior.solve(r))
    return (
        -model.neg_log_likelihood(r)
        - quad
        - 0.5 * model.prior.logdet
        - 0.5 * model.logdet_hessian(r)
    )


def gpirl_fit(problem: IrlProblem, init_hyper: GpHyper | None = None,
              opts: GpirlOptions | None = None) -> GpirlResult:
    """Two-step GPIRL: MAP reward under the GP prior, then (optionally)
    gradient ascent on the Laplace evidence over the kernel hyperparameters.

    The hyperparameter ascent works in log-theta space (positivity for free)
    with a finite-difference evidence gradient, warm-starting each inner MAP
    solve from the current reward.
    """
    problem.observations.require_nonempty("gpirl_fit")
    opts = opts or GpirlOptions()
    mdp = problem.mdp
    hyper = init_hyper or GpHyper.constant(mdp.num_actions, opts.init_kappa, opts.init_sigma)
    if hyper.num_actions != mdp.num_actions:
        raise ValidationError("hyperparameters must have one entry per action")
    prefs = build_preferences(problem.observations, mdp.num_states, mdp.num_actions)

    r = np.zeros(mdp.num_states * mdp.num_actions)
    r, iters, grad_norm, converged, model = _newton_solve(problem, prefs, opts, hyper, r)
    evidence = _laplace_evidence(model, r)

    def evidence_at(log_theta: np.ndarray, warm: np.ndarray):
        theta = GpHyper.from_log_vector(log_theta)
        r_new, _, _, _, model_new = _newton_solve(problem, prefs, opts, theta, warm.copy())
        return _laplace_evidence(model_new, r_new), r_new, model_new, theta

    log_theta = hyper.log_vector()
    for _ in range(opts.hyper_iters):
        grad = np.zeros_like(log_theta)
        for i in range(log_theta.shape[0]):
            for sign in (1.0, -1.0):
                probe = log_theta.copy()
                probe[i] += sign * opts.fd_step
                np.clip(probe, -_LOG_THETA_BOUND, _LOG_THETA_BOUND, out=probe)
                value, _, _, _ = evidence_at(probe, r)
                grad[i] += sign * value
            grad[i] /= 2.0 * opts.fd_step
        norm = float(np.linalg.norm(grad))
        if norm < 1e-8:
            break
        step = opts.hyper_step
        improved = False
        for _ in range(6):
            probe = np.clip(log_theta + step * grad / norm, -_LOG_THETA_BOUND, _LOG_THETA_BOUND)
            value, r_new, model_new, theta_new = evidence_at(probe, r)
            if value > evidence:
                log_theta, evidence, r, model, hyper = probe, value, r_new, model_new, theta_new
                improved = True
                break
            step *= 0.5
        if not improved:
            break

    if opts.hyper_iters > 0:
        r, iters, grad_norm, converged, model = _newton_solve(problem, prefs, opts, hyper, r)
        evidence = _laplace_evidence(model, r)

    return GpirlResult(
        reward=RewardVector(r, LAYOUT_STATE_ACTION),
        hyper=hyper,
        iterations=iters,
        objective=model.objective(r),
        grad_norm=grad_norm,
        converged=converged,
        evidence=evidence,
    )


def gpirl_objective(problem: IrlProblem, r: np.ndarray, hyper: GpHyper | None = None,
                    opts: GpirlOptions | None = None) -> float:
    """MAP objective (negative log posterior) at an arbitrary reward point."""
    opts = opts or GpirlOptions()
    hyper = hyper or GpHyper.constant(problem.mdp.num_actions, opts.init_kappa, opts.init_sigma)
    prefs = build_preferences(problem.observations, problem.mdp.num_states,
                              problem.mdp.num_actions)
    r = np.asarray(r, dtype=np.float64)
    model = _build_model(problem, prefs, opts, hyper, r)
    return model.objective(r)


def gpirl_objective_grad(problem: IrlProblem, r: np.ndarray, hyper: GpHyper | None = None,
                         opts: GpirlOptions | None = None) -> tuple[float, np.ndarray]:
    opts = opts or GpirlOptions()
    hyper = hyper or GpHyper.constant(problem.mdp.num_actions, opts.init_kappa, opts.init_sigma)
    prefs = build_preferences(problem.observations, problem.mdp.num_states,
                              problem.mdp.num_actions)
    r = np.asarray(r, dtype=np.float64)
    model = _build_model(problem, prefs, opts, hyper, r)
    return model.objective(r), model.gradient(r)
