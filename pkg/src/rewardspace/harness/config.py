"""Experiment configuration: a JSON key/value document with profile defaults.

Schema (version 1), all keys optional unless marked required:

    {
      "schema_version": 1,
      "experiment": "<kind>",            # required; one of EXPERIMENTS
      "seed": 7,
      "profile": "desk" | "paper",
      "output_dir": "out",
      "replications": <int>,
      "sweep": [<int>, ...],             # trajectories per agent (|O_n| / H)
      "methods": ["FE","FT","PCA+FE","PCA+FT","PROJ","MLIRL","GPIRL"],
      "classifiers": ["SVM","KNN","LR","FDA"],
      "jobs": 1,
      "environment": {...},              # per-kind overrides, see below
      "cohort": {...},
      "engines": {"GPIRL": {...}, "MLIRL": {...}, "PROJ": {...}},
      "features": {"ft_horizon": <int>, "pca_components": {"FE": 10, "FT": 2}},
      "kmeans_restarts": 10
    }

GridWorld environment keys: width, height, p_intended, p_stay, p_random,
gamma.  Secretary keys: num_applicants, gamma.  GridWorld cohort keys:
agents_per_group, traj_len, reward_noise_std, destinations (one list of
[[row, col], magnitude] per group).  Secretary cohort keys: rules (list of
{kind, parameter, count, param_noise_std}).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from ..exceptions import ValidationError
from .oracle import secretary_dp_oracle

SCHEMA_VERSION = 1

EXP_GRIDWORLD_CLUSTER = "gridworld-cluster"
EXP_GRIDWORLD_CLASSIFY = "gridworld-classify"
EXP_SECRETARY_ACROSS = "secretary-across-rules"
EXP_SECRETARY_WITHIN = "secretary-within-rule"
EXP_SECRETARY_CR_RANDOM = "secretary-cr-vs-random"
EXPERIMENTS = (
    EXP_GRIDWORLD_CLUSTER,
    EXP_GRIDWORLD_CLASSIFY,
    EXP_SECRETARY_ACROSS,
    EXP_SECRETARY_WITHIN,
    EXP_SECRETARY_CR_RANDOM,
)

CLUSTER_EXPERIMENTS = (EXP_GRIDWORLD_CLUSTER, EXP_SECRETARY_WITHIN)
CLASSIFY_EXPERIMENTS = (
    EXP_GRIDWORLD_CLASSIFY,
    EXP_SECRETARY_ACROSS,
    EXP_SECRETARY_CR_RANDOM,
)

METHODS = ("FE", "FT", "PCA+FE", "PCA+FT", "PROJ", "MLIRL", "GPIRL")
ENGINE_METHODS = ("PROJ", "MLIRL", "GPIRL")
CLASSIFIERS = ("SVM", "KNN", "LR", "FDA")

PROFILE_DESK = "desk"
PROFILE_PAPER = "paper"

# Mirror-symmetric goals around a mid-wall start: both groups share the
# dominant southbound flow, so action statistics overlap, while the horizontal
# correction direction encodes the goal and separates groups in reward space.
_GRIDWORLD_DESTINATIONS = [[[[9, 1], 1.0]], [[[9, 7], 1.0]]]
_GRIDWORLD_START = [0, 4]
# Parameter triples spaced so that unit-variance parameter noise rarely makes
# neighboring groups collide (overlap caps the reachable NMI well below 1).
_WITHIN_RULE_PARAMETERS = {"CR": [3, 8, 13], "SNCCR": [2, 4, 7], "CCR": [1, 2, 3]}


def _gridworld_environment() -> dict:
    return {
        "width": 10,
        "height": 10,
        "p_intended": 0.65,
        "p_stay": 0.15,
        "p_random": 0.2,
        "gamma": 0.95,
    }


def _secretary_environment() -> dict:
    return {"num_applicants": 20, "gamma": 0.95}


def _profile_defaults(experiment: str, profile: str) -> dict:
    desk = profile == PROFILE_DESK
    if experiment == EXP_GRIDWORLD_CLUSTER:
        return {
            "replications": 10 if desk else 100,
            "sweep": [4, 16, 40, 100] if desk else [4, 8, 16, 20, 30, 40, 60, 80, 100, 200],
            "methods": ["FE", "FT", "PROJ", "GPIRL"],
            "classifiers": [],
            "environment": _gridworld_environment(),
            "cohort": {
                "agents_per_group": 50 if desk else 200,
                "traj_len": 6,
                "reward_noise_std": 0.1,
                "start_cell": _GRIDWORLD_START,
                "destinations": _GRIDWORLD_DESTINATIONS,
            },
        }
    if experiment == EXP_GRIDWORLD_CLASSIFY:
        return {
            "replications": 10 if desk else 100,
            "sweep": [40] if desk else [4, 8, 16, 20, 30, 40, 60, 80, 100, 200],
            "methods": ["FE", "GPIRL"],
            "classifiers": list(CLASSIFIERS),
            "environment": _gridworld_environment(),
            "cohort": {
                "agents_per_group": 50 if desk else 200,
                "traj_len": 6,
                "reward_noise_std": 0.1,
                "start_cell": _GRIDWORLD_START,
                "destinations": _GRIDWORLD_DESTINATIONS,
            },
        }
    if experiment == EXP_SECRETARY_ACROSS:
        count = 20 if desk else 100
        return {
            "replications": 3 if desk else 10,
            "sweep": [50],
            "methods": ["FE", "GPIRL"],
            "classifiers": list(CLASSIFIERS),
            "environment": _secretary_environment(),
            "cohort": {
                "rules": [
                    {"kind": "CR", "parameter": 5, "count": count, "param_noise_std": 0.0},
                    {"kind": "SNCCR", "parameter": 3, "count": count, "param_noise_std": 0.0},
                    {"kind": "CCR", "parameter": 2, "count": count, "param_noise_std": 0.0},
                ]
            },
        }
    if experiment == EXP_SECRETARY_WITHIN:
        count = 30 if desk else 100
        rule = "CR"
        return {
            "replications": 10 if desk else 100,
            "sweep": [1, 11, 21, 31, 41, 51] if desk else [1, 11, 21, 31, 41, 51, 61, 71, 81, 91],
            "methods": ["FE", "GPIRL"],
            "classifiers": [],
            "environment": _secretary_environment(),
            "cohort": {
                "rules": [
                    {"kind": rule, "parameter": p, "count": count, "param_noise_std": 1.0}
                    for p in _WITHIN_RULE_PARAMETERS[rule]
                ]
            },
        }
    if experiment == EXP_SECRETARY_CR_RANDOM:
        count = 30 if desk else 100
        h_star, _ = secretary_dp_oracle(20)
        return {
            "replications": 3 if desk else 10,
            "sweep": [50],
            "methods": ["FE", "PROJ"],
            "classifiers": list(CLASSIFIERS),
            "environment": _secretary_environment(),
            "cohort": {
                "rules": [
                    {"kind": "CR", "parameter": h_star, "count": count, "param_noise_std": 1.0},
                    {"kind": "RANDOM", "parameter": 0, "count": count, "param_noise_std": 0.0},
                ]
            },
        }
    raise ValidationError(f"unknown experiment kind {experiment!r}")


def _engine_defaults() -> dict:
    return {
        "GPIRL": {
            "beta": 1.0,
            "kappa": 0.5,
            "sigma": 0.1,
            "q_mode": "policy",
            "tol": 1e-5,
            "max_newton": 50,
            "hyper_iters": 0,
        },
        "MLIRL": {
            "temperature": 1.0,
            "step_size": 0.5,
            "iters": 100,
            "backup_steps": 50,
            "prior_std": 1.0,
            "layout": "state",
        },
        "PROJ": {"epsilon": 1e-3, "max_iters": 15, "vi_tolerance": 1e-5},
    }


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration; ``raw`` is the canonical dict that gets hashed."""

    raw: dict

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def profile(self) -> str:
        return self.raw["profile"]

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    @property
    def replications(self) -> int:
        return self.raw["replications"]

    @property
    def sweep(self) -> list[int]:
        return self.raw["sweep"]

    @property
    def methods(self) -> list[str]:
        return self.raw["methods"]

    @property
    def classifiers(self) -> list[str]:
        return self.raw["classifiers"]

    @property
    def jobs(self) -> int:
        return self.raw["jobs"]

    @property
    def environment(self) -> dict:
        return self.raw["environment"]

    @property
    def cohort(self) -> dict:
        return self.raw["cohort"]

    @property
    def engines(self) -> dict:
        return self.raw["engines"]

    @property
    def features(self) -> dict:
        return self.raw["features"]

    @property
    def is_gridworld(self) -> bool:
        return self.experiment.startswith("gridworld")

    @property
    def is_cluster_task(self) -> bool:
        return self.experiment in CLUSTER_EXPERIMENTS

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_config(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a raw config document and fill profile defaults."""
    doc = dict(doc)
    if overrides:
        doc = _merge(doc, {k: v for k, v in overrides.items() if v is not None})
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version}")
    experiment = doc.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ValidationError(
            f"experiment must be one of {EXPERIMENTS}, got {experiment!r}"
        )
    profile = doc.get("profile", PROFILE_DESK)
    if profile not in (PROFILE_DESK, PROFILE_PAPER):
        raise ValidationError(f"profile must be desk or paper, got {profile!r}")

    defaults = _profile_defaults(experiment, profile)
    resolved = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "profile": profile,
        "seed": int(doc.get("seed", 0)),
        "output_dir": str(doc.get("output_dir", "out")),
        "jobs": int(doc.get("jobs", 1)),
        "replications": int(doc.get("replications", defaults["replications"])),
        "sweep": [int(v) for v in doc.get("sweep", defaults["sweep"])],
        "methods": list(doc.get("methods", defaults["methods"])),
        "classifiers": list(doc.get("classifiers", defaults["classifiers"])),
        "environment": _merge(defaults["environment"], doc.get("environment", {})),
        "cohort": _merge(defaults["cohort"], doc.get("cohort", {})),
        "engines": _merge(_engine_defaults(), doc.get("engines", {})),
        "features": _merge(
            {"ft_horizon": 6 if experiment.startswith("gridworld") else 4,
             "pca_components": {"FE": 10, "FT": 2}},
            doc.get("features", {}),
        ),
        "kmeans_restarts": int(doc.get("kmeans_restarts", 10)),
    }

    if not resolved["sweep"]:
        raise ValidationError("sweep must be a nonempty list of trajectory counts")
    if any(v < 1 for v in resolved["sweep"]):
        raise ValidationError("sweep values must be >= 1")
    if resolved["replications"] < 1:
        raise ValidationError("replications must be >= 1")
    if not resolved["methods"]:
        raise ValidationError("methods must be nonempty")
    for method in resolved["methods"]:
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    for classifier in resolved["classifiers"]:
        if classifier not in CLASSIFIERS:
            raise ValidationError(f"unknown classifier {classifier!r}")
    if experiment in CLASSIFY_EXPERIMENTS and not resolved["classifiers"]:
        raise ValidationError(f"{experiment} requires a nonempty classifiers list")
    if not experiment.startswith("gridworld"):
        rules = resolved["cohort"].get("rules", [])
        if not rules:
            raise ValidationError("secretary experiments need cohort.rules")
        for rule in rules:
            if rule.get("count", 0) < 1:
                raise ValidationError("rule counts must be >= 1")
    return ExperimentConfig(resolved)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") from exc
    return resolve_config(doc, overrides)
