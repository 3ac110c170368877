"""Stage-wise experiment pipeline: simulate -> featurize -> irl -> recognize -> report.

Stages communicate through files in the output directory so any stage can be
rerun in isolation:

    out/
      cells/rep000_sw40/cohort.jsonl
      cells/rep000_sw40/features_FE.csv          (one per action method)
      cells/rep000_sw40/rewards_GPIRL.csv        (one per engine method)
      cells/rep000_sw40/diagnostics_GPIRL.jsonl
      metrics.csv
      fig*.csv
      provenance.json

All randomness derives from (master seed, replication, sweep value, purpose),
so cohorts are identical no matter which methods run alongside.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..agents import (
    AgentRecord,
    HeuristicRule,
    cohort_from_jsonl,
    cohort_to_jsonl,
    simulate_gridworld_cohort,
    simulate_secretary_cohort,
)
from ..environments import GridWorldSpec, SecretarySpec, build_gridworld, build_secretary_mdp
from ..exceptions import ValidationError
from ..features import (
    feature_expectation,
    feature_trajectory,
    features_from_csv,
    features_to_csv,
    indicator_basis,
    pca_fit,
)
from ..irl import GpirlOptions, MlirlOptions, ProjOptions
from ..irl.batch import (
    diagnostics_to_jsonl,
    infer_rewards,
    rewards_from_csv,
    rewards_to_csv,
)
from ..learn import Dataset, clustering_accuracy, cross_validate, kmeans, nmi
from ..seeding import cell_seed_sequence
from .config import ENGINE_METHODS, ExperimentConfig

# purpose indices for seed derivation
_PURPOSE_COHORT = 0
_PURPOSE_KMEANS = 1
_PURPOSE_CV = 2


@dataclass
class ExperimentReport:
    """Aggregated metric rows plus per-cell failures and provenance."""

    experiment: str
    rows: list[dict] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return not self.failures


# -- environment / cohort construction --------------------------------------


def build_environment(cfg: ExperimentConfig):
    """(spec, mdp-without-reward) for the configured benchmark.

    The GridWorld initial distribution is pinned to the cohort's start cell so
    exact policy feature expectations line up with the sampled trajectories.
    """
    env = cfg.environment
    if cfg.is_gridworld:
        spec = GridWorldSpec(
            width=env["width"],
            height=env["height"],
            p_intended=env["p_intended"],
            p_stay=env["p_stay"],
            p_random=env["p_random"],
            discount=env["gamma"],
        )
        mdp = build_gridworld(spec)
        start_row, start_col = cfg.cohort.get("start_cell", [0, 0])
        initial = np.zeros(mdp.num_states)
        initial[spec.state_index((int(start_row), int(start_col)))] = 1.0
        return spec, dataclasses.replace(mdp, initial_distribution=initial)
    spec = SecretarySpec(num_applicants=env["num_applicants"], discount=env["gamma"])
    return spec, build_secretary_mdp(spec)


def simulate_cell(cfg: ExperimentConfig, rep: int, sweep_value: int) -> list[AgentRecord]:
    seed = cell_seed_sequence(cfg.seed, rep, sweep_value, _PURPOSE_COHORT)
    spec, _ = build_environment(cfg)
    if cfg.is_gridworld:
        cohort = cfg.cohort
        destinations = [
            [((int(cell[0]), int(cell[1])), float(mag)) for cell, mag in group]
            for group in cohort["destinations"]
        ]
        start_row, start_col = cohort.get("start_cell", [0, 0])
        return simulate_gridworld_cohort(
            spec,
            destinations,
            agents_per_group=cohort["agents_per_group"],
            trajs_per_agent=sweep_value,
            traj_len=cohort["traj_len"],
            reward_noise_std=cohort["reward_noise_std"],
            start_state=spec.state_index((int(start_row), int(start_col))),
            seed=seed,
        )
    rules = [
        (HeuristicRule(r["kind"], r["parameter"]), r["count"], r.get("param_noise_std", 0.0))
        for r in cfg.cohort["rules"]
    ]
    return simulate_secretary_cohort(rules, sweep_value, spec, seed)


# -- stage plumbing ----------------------------------------------------------


def cell_dir(cfg: ExperimentConfig, rep: int, sweep_value: int) -> str:
    return os.path.join(cfg.output_dir, "cells", f"rep{rep:03d}_sw{sweep_value}")


def _cells(cfg: ExperimentConfig):
    for rep in range(cfg.replications):
        for sweep_value in cfg.sweep:
            yield rep, sweep_value


def simulate_stage(cfg: ExperimentConfig) -> None:
    for rep, sweep_value in _cells(cfg):
        directory = cell_dir(cfg, rep, sweep_value)
        os.makedirs(directory, exist_ok=True)
        records = simulate_cell(cfg, rep, sweep_value)
        cohort_to_jsonl(records, os.path.join(directory, "cohort.jsonl"))


def _action_feature_vectors(cfg: ExperimentConfig, method: str, records, mdp):
    gamma = cfg.environment["gamma"]
    if method in ("FE", "PCA+FE"):
        basis = indicator_basis(mdp.num_states)
        vectors = [feature_expectation(r.observations, basis, gamma) for r in records]
    elif method in ("FT", "PCA+FT"):
        horizon = cfg.features["ft_horizon"]
        vectors = [feature_trajectory(r.observations, horizon) for r in records]
    else:
        raise ValidationError(f"not an action-space method: {method!r}")
    if method.startswith("PCA+"):
        c = int(cfg.features["pca_components"][method.split("+")[1]])
        matrix = np.stack([v.values for v in vectors])
        c = min(c, matrix.shape[1], matrix.shape[0] - 1)
        projected = pca_fit(matrix, c).projected
        from ..types import FeatureVector

        vectors = [FeatureVector(row, "PCA") for row in projected]
    return vectors


def featurize_stage(cfg: ExperimentConfig) -> None:
    action_methods = [m for m in cfg.methods if m not in ENGINE_METHODS]
    if not action_methods:
        return
    _, mdp = build_environment(cfg)
    for rep, sweep_value in _cells(cfg):
        directory = cell_dir(cfg, rep, sweep_value)
        records = cohort_from_jsonl(os.path.join(directory, "cohort.jsonl"))
        labels = [r.label for r in records]
        for method in action_methods:
            vectors = _action_feature_vectors(cfg, method, records, mdp)
            features_to_csv(
                os.path.join(directory, f"features_{method}.csv"), vectors, labels
            )


def engine_options(cfg: ExperimentConfig, engine: str):
    params = cfg.engines[engine]
    if engine == "GPIRL":
        return GpirlOptions(
            beta=params["beta"],
            q_mode=params["q_mode"],
            tol=params["tol"],
            max_newton=params["max_newton"],
            hyper_iters=params["hyper_iters"],
            init_kappa=params["kappa"],
            init_sigma=params["sigma"],
        )
    if engine == "MLIRL":
        return MlirlOptions(
            temperature=params["temperature"],
            step_size=params["step_size"],
            iters=params["iters"],
            backup_steps=params["backup_steps"],
            prior_std=params["prior_std"],
            layout=params["layout"],
        )
    if engine == "PROJ":
        return ProjOptions(
            epsilon=params["epsilon"],
            max_iters=params["max_iters"],
            vi_tolerance=params["vi_tolerance"],
        )
    raise ValidationError(f"unknown engine {engine!r}")


def irl_stage(cfg: ExperimentConfig) -> dict[str, str]:
    """Run every configured engine per cell.  Returns per-cell failure notes."""
    engines = [m for m in cfg.methods if m in ENGINE_METHODS]
    failures: dict[str, str] = {}
    if not engines:
        return failures
    _, mdp = build_environment(cfg)
    for rep, sweep_value in _cells(cfg):
        directory = cell_dir(cfg, rep, sweep_value)
        records = cohort_from_jsonl(os.path.join(directory, "cohort.jsonl"))
        for engine in engines:
            result = infer_rewards(
                records, engine, mdp, opts=engine_options(cfg, engine), jobs=cfg.jobs
            )
            layout = "state_action" if engine == "GPIRL" else "state"
            rewards_to_csv(
                os.path.join(directory, f"rewards_{engine}.csv"), result, records, layout
            )
            diagnostics_to_jsonl(
                os.path.join(directory, f"diagnostics_{engine}.jsonl"), result
            )
            for agent_id, message in result.failures.items():
                failures[f"rep{rep:03d}_sw{sweep_value}/{engine}/agent{agent_id}"] = message
    return failures


def _load_method_dataset(directory: str, method: str) -> Dataset:
    if method in ENGINE_METHODS:
        matrix, labels, _ = rewards_from_csv(os.path.join(directory, f"rewards_{method}.csv"))
    else:
        vectors, labels = features_from_csv(os.path.join(directory, f"features_{method}.csv"))
        matrix = np.stack([v.values for v in vectors])
    if any(lab is None for lab in labels):
        return Dataset(matrix)
    return Dataset(matrix, np.asarray(labels, dtype=np.int64))


def recognize_stage(cfg: ExperimentConfig, prior_failures: dict | None = None) -> ExperimentReport:
    report = ExperimentReport(cfg.experiment, failures=dict(prior_failures or {}))
    values: dict[tuple[str, int, str], list[float]] = {}
    for rep, sweep_value in _cells(cfg):
        directory = cell_dir(cfg, rep, sweep_value)
        for method in cfg.methods:
            key_prefix = (method, sweep_value)
            try:
                data = _load_method_dataset(directory, method)
                if data.labels is None:
                    raise ValidationError("cohort has no labels for recognition")
                if cfg.is_cluster_task:
                    k = int(np.unique(data.labels).shape[0])
                    seed = cell_seed_sequence(cfg.seed, rep, sweep_value, _PURPOSE_KMEANS)
                    clusters = kmeans(
                        data, k, restarts=cfg.raw["kmeans_restarts"], seed=seed
                    )
                    cell_metrics = {
                        "nmi": nmi(clusters.assignments, data.labels),
                        "cluster_accuracy": clustering_accuracy(
                            clusters.assignments, data.labels
                        ),
                    }
                else:
                    seed = cell_seed_sequence(cfg.seed, rep, sweep_value, _PURPOSE_CV)
                    cell_metrics = {}
                    for classifier in cfg.classifiers:
                        result = cross_validate(
                            data, classifier, folds=10, replications=1, seed=seed
                        )
                        cell_metrics[f"cv_accuracy_{classifier}"] = result.mean
                for metric, value in cell_metrics.items():
                    values.setdefault((*key_prefix, metric), []).append(value)
            except Exception as exc:  # noqa: BLE001 - cell failures are isolated
                report.failures[f"rep{rep:03d}_sw{sweep_value}/{method}"] = str(exc)

    for (method, sweep_value, metric), samples in sorted(values.items()):
        arr = np.asarray(samples)
        report.rows.append(
            {
                "experiment": cfg.experiment,
                "method": method,
                "sweep": sweep_value,
                "metric": metric,
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "replications": int(arr.shape[0]),
            }
        )
    _write_metrics_csv(cfg, report)
    _write_provenance(cfg, report)
    return report


def _write_metrics_csv(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "metrics.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["experiment", "method", "sweep", "metric", "mean", "std", "replications"]
        )
        for row in sorted(
            report.rows, key=lambda r: (r["method"], r["sweep"], r["metric"])
        ):
            writer.writerow(
                [
                    row["experiment"],
                    row["method"],
                    row["sweep"],
                    row["metric"],
                    f"{row['mean']:.10g}",
                    f"{row['std']:.10g}",
                    row["replications"],
                ]
            )


def _write_provenance(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    report.provenance = {
        "config_hash": cfg.config_hash(),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "profile": cfg.profile,
        "package_version": __version__,
        "resolved_config": cfg.raw,
        "failures": report.failures,
    }
    path = os.path.join(cfg.output_dir, "provenance.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.provenance, fh, sort_keys=True, indent=2)


def emit_plot_data(cfg: ExperimentConfig, report: ExperimentReport) -> list[str]:
    """Per-figure CSV series plus 2-D/3-D PCA projections of agent vectors."""
    written: list[str] = []
    if not report.rows:
        print("warning: empty report, no plot data emitted")
        return written
    metrics = sorted({row["metric"] for row in report.rows})
    methods = [m for m in cfg.methods]
    figure_index = 1 if cfg.is_cluster_task else 2
    for metric in metrics:
        path = os.path.join(cfg.output_dir, f"fig{figure_index}_{metric}.csv")
        by_sweep: dict[int, dict[str, tuple[float, float]]] = {}
        for row in report.rows:
            if row["metric"] == metric:
                by_sweep.setdefault(row["sweep"], {})[row["method"]] = (
                    row["mean"],
                    row["std"],
                )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["sweep"]
            for method in methods:
                header += [f"{method}_mean", f"{method}_std"]
            writer.writerow(header)
            for sweep_value in sorted(by_sweep):
                row_out = [sweep_value]
                for method in methods:
                    mean_std = by_sweep[sweep_value].get(method)
                    row_out += (
                        ["", ""]
                        if mean_std is None
                        else [f"{mean_std[0]:.10g}", f"{mean_std[1]:.10g}"]
                    )
                writer.writerow(row_out)
        written.append(path)

    # Projection scatters from the first replication at the largest sweep value.
    rep, sweep_value = 0, max(cfg.sweep)
    directory = cell_dir(cfg, rep, sweep_value)
    for method in methods:
        try:
            data = _load_method_dataset(directory, method)
        except (OSError, ValidationError):
            continue
        if data.labels is None or data.matrix.shape[0] < 3:
            continue
        for c, fig in ((2, 3), (3, 4)):
            if data.matrix.shape[1] < c:
                continue
            projected = pca_fit(data.matrix, c).projected
            path = os.path.join(
                cfg.output_dir, f"fig{fig}_projection{c}d_{method}.csv"
            )
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"c{i}" for i in range(c)] + ["label"])
                for row, label in zip(projected, data.labels):
                    writer.writerow([f"{v:.10g}" for v in row] + [int(label)])
            written.append(path)
    return written


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute the full pipeline: simulate, featurize, infer, recognize, report."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    simulate_stage(cfg)
    featurize_stage(cfg)
    irl_failures = irl_stage(cfg)
    report = recognize_stage(cfg, prior_failures=irl_failures)
    emit_plot_data(cfg, report)
    return report
