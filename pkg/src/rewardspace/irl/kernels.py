"""Squared-exponential covariance over state coordinates, one latent process per action."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError


@dataclass(frozen=True)
class GpHyper:
    """Per-action kernel hyperparameters: inverse squared length-scales and noise."""

    kappa: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=np.float64))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
        if kappa.shape != sigma.shape:
            raise ValidationError("kappa and sigma must have one entry per action")
        if (kappa <= 0).any():
            raise ValidationError("kernel scales kappa must be positive")
        if (sigma < 0).any():
            raise ValidationError("noise sigma must be nonnegative")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def constant(cls, num_actions: int, kappa: float = 0.5, sigma: float = 0.1) -> "GpHyper":
        return cls(np.full(num_actions, kappa), np.full(num_actions, sigma))

    @property
    def num_actions(self) -> int:
        return self.kappa.shape[0]

    def log_vector(self) -> np.ndarray:
        return np.concatenate([np.log(self.kappa), np.log(np.maximum(self.sigma, 1e-12))])

    @classmethod
    def from_log_vector(cls, log_theta: np.ndarray) -> "GpHyper":
        half = log_theta.shape[0] // 2
        return cls(np.exp(log_theta[:half]), np.exp(log_theta[half:]))


def se_kernel_matrix(coordinates: np.ndarray, hyper: GpHyper, action: int) -> np.ndarray:
    """K[c, d] = exp(-0.5 * kappa * ||x_c - x_d||^2) + sigma^2 * delta(c, d).

    The exponent is negative so covariance decays with distance.
    """
    coords = np.asarray(coordinates, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords[:, None]
    kappa = float(hyper.kappa[action])
    sigma = float(hyper.sigma[action])
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    sq_norms = (coords**2).sum(axis=1)
    sq_dist = sq_norms[:, None] + sq_norms[None, :] - 2.0 * coords @ coords.T
    np.clip(sq_dist, 0.0, None, out=sq_dist)
    kernel = np.exp(-0.5 * kappa * sq_dist)
    kernel[np.diag_indices_from(kernel)] += sigma**2
    return kernel
