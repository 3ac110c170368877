"""Cohort-level reward inference: one reward vector per agent under a shared MDP."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..agents import AgentRecord
from ..exceptions import ValidationError
from ..features import BasisFunction, indicator_basis
from ..mdp import Mdp
from ..types import FeatureVector, RewardVector
from .common import IrlProblem
from .gpirl import GpirlOptions, gpirl_fit
from .mlirl import MlirlOptions, mlirl_fit
from .proj import ProjOptions, proj_fit

ENGINE_MLIRL = "MLIRL"
ENGINE_GPIRL = "GPIRL"
ENGINE_PROJ = "PROJ"
ENGINES = (ENGINE_MLIRL, ENGINE_GPIRL, ENGINE_PROJ)


@dataclass(frozen=True)
class InferenceResult:
    """Per-agent rewards (None where the engine failed), diagnostics and errors."""

    rewards: list[FeatureVector | None]
    diagnostics: list[dict]
    failures: dict[int, str]

    @property
    def all_succeeded(self) -> bool:
        return not self.failures

    def feature_matrix(self) -> np.ndarray:
        present = [vec for vec in self.rewards if vec is not None]
        if not present:
            raise ValidationError("no successful inferences to stack")
        return np.stack([vec.values for vec in present])


def _fit_one(args) -> tuple[int, np.ndarray | None, dict, str | None]:
    engine, mdp, record, opts = args
    try:
        problem = IrlProblem(mdp, record.observations)
        if engine == ENGINE_GPIRL:
            result = gpirl_fit(problem, opts=opts or GpirlOptions())
            reward: RewardVector = result.reward
            diag = {
                "agent_id": record.agent_id,
                "engine": engine,
                "iterations": result.iterations,
                "objective": result.objective,
                "grad_norm": result.grad_norm,
                "converged": result.converged,
            }
        elif engine == ENGINE_MLIRL:
            result = mlirl_fit(problem, opts=opts or MlirlOptions())
            reward = result.reward
            diag = {
                "agent_id": record.agent_id,
                "engine": engine,
                "iterations": result.iterations,
                "objective": result.objective,
                "grad_norm": result.grad_norm,
                "converged": result.converged,
            }
        elif engine == ENGINE_PROJ:
            proj_opts = opts or ProjOptions()
            result = proj_fit(problem, indicator_basis(mdp.num_states), proj_opts)
            reward = result.reward
            diag = {
                "agent_id": record.agent_id,
                "engine": engine,
                "iterations": result.iterations,
                "objective": result.margins[-1],
                "grad_norm": result.margins[-1],
                "converged": result.converged,
            }
        else:
            raise ValidationError(f"unknown engine {engine!r}")
        return record.agent_id, reward.values, diag, None
    except Exception as exc:  # noqa: BLE001 - failures are reported per agent
        return record.agent_id, None, {"agent_id": record.agent_id, "engine": engine}, str(exc)


def infer_rewards(
    cohort: list[AgentRecord],
    engine: str,
    mdp: Mdp,
    opts=None,
    jobs: int = 1,
) -> InferenceResult:
    """Run one IRL engine over every agent of a cohort.

    Agents are independent, so inference fans out over ``jobs`` processes;
    results keep cohort order regardless of scheduling.  Failures land in
    ``failures`` keyed by agent id instead of aborting the batch.
    """
    if engine not in ENGINES:
        raise ValidationError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if not cohort:
        return InferenceResult([], [], {})
    tasks = [(engine, mdp, record, opts) for record in cohort]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_fit_one, tasks, chunksize=8))
    else:
        outcomes = [_fit_one(task) for task in tasks]

    rewards: list[FeatureVector | None] = []
    diagnostics: list[dict] = []
    failures: dict[int, str] = {}
    for agent_id, values, diag, error in outcomes:
        diagnostics.append(diag)
        if error is None:
            rewards.append(FeatureVector(values, "REWARD"))
        else:
            rewards.append(None)
            failures[agent_id] = error
    return InferenceResult(rewards, diagnostics, failures)


def rewards_to_csv(path, result: InferenceResult, cohort: list[AgentRecord], layout: str) -> None:
    """One agent per row; the header names columns by reward layout."""
    width = 0
    for vec in result.rewards:
        if vec is not None:
            width = len(vec)
            break
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["agent_id"] + [f"r{i}" for i in range(width)] + ["layout", "label"]
        writer.writerow(header)
        for record, vec in zip(cohort, result.rewards):
            row = [record.agent_id]
            if vec is None:
                row += [""] * width
            else:
                row += [f"{x:.12g}" for x in vec.values]
            row += [layout, "" if record.label is None else record.label]
            writer.writerow(row)


def rewards_from_csv(path) -> tuple[np.ndarray, list, str]:
    """Read a rewards CSV back as (matrix, labels, layout); failed rows are skipped."""
    rows, labels = [], []
    layout = "state"
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        width = len(header) - 3  # agent_id, r*, layout, label
        for row in reader:
            values = row[1 : 1 + width]
            if any(v == "" for v in values):
                continue
            rows.append([float(v) for v in values])
            layout = row[-2]
            labels.append(None if row[-1] == "" else int(row[-1]))
    return np.asarray(rows, dtype=np.float64), labels, layout


def diagnostics_to_jsonl(path, result: InferenceResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for diag in result.diagnostics:
            fh.write(json.dumps(diag, sort_keys=True) + "\n")
