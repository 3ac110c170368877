"""Reward-recovery engines: GPIRL, MLIRL and projection IRL."""

from .batch import (
    ENGINE_GPIRL,
    ENGINE_MLIRL,
    ENGINE_PROJ,
    ENGINES,
    InferenceResult,
    diagnostics_to_jsonl,
    infer_rewards,
    rewards_to_csv,
)
from .common import (
    IrlProblem,
    PreferenceSet,
    RewardPrior,
    build_preferences,
    empirical_policy,
)
from .gpirl import (
    GpirlOptions,
    GpirlResult,
    Q_MODE_OPTIMAL,
    Q_MODE_POLICY,
    gpirl_fit,
    gpirl_objective,
    gpirl_objective_grad,
)
from .kernels import GpHyper, se_kernel_matrix
from .mlirl import MlirlOptions, MlirlResult, mlirl_fit, mlirl_objective_grad
from .proj import ProjOptions, ProjResult, policy_feature_expectation, proj_fit

__all__ = [
    "ENGINE_GPIRL",
    "ENGINE_MLIRL",
    "ENGINE_PROJ",
    "ENGINES",
    "GpHyper",
    "GpirlOptions",
    "GpirlResult",
    "InferenceResult",
    "IrlProblem",
    "MlirlOptions",
    "MlirlResult",
    "PreferenceSet",
    "ProjOptions",
    "ProjResult",
    "Q_MODE_OPTIMAL",
    "Q_MODE_POLICY",
    "RewardPrior",
    "build_preferences",
    "diagnostics_to_jsonl",
    "empirical_policy",
    "gpirl_fit",
    "gpirl_objective",
    "gpirl_objective_grad",
    "infer_rewards",
    "mlirl_fit",
    "mlirl_objective_grad",
    "policy_feature_expectation",
    "proj_fit",
    "rewards_to_csv",
    "se_kernel_matrix",
]
