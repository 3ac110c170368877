"""Labeled agent cohorts: MDP-optimal GridWorld agents and heuristic secretary agents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .environments import (
    ACCEPT,
    REJECT,
    GridWorldSpec,
    SecretarySpec,
    build_gridworld,
    gridworld_reward,
)
from .exceptions import ValidationError
from .mdp import greedy_policy, q_from_values, sample_trajectory, value_iteration
from .seeding import spawn_generators
from .types import ObservationSet, Trajectory

RULE_CR = "CR"
RULE_SNCCR = "SNCCR"
RULE_CCR = "CCR"
RULE_RANDOM = "RANDOM"
RULE_KINDS = (RULE_CR, RULE_SNCCR, RULE_CCR, RULE_RANDOM)


@dataclass(frozen=True)
class HeuristicRule:
    """A secretary decision rule: CR(h), SNCCR(k), CCR(l) or RANDOM."""

    kind: str
    parameter: float = 0.0

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValidationError(f"unknown rule kind {self.kind!r}")
        if self.kind == RULE_CR and self.parameter < 1:
            raise ValidationError("CR cutoff must be >= 1")
        if self.kind in (RULE_SNCCR, RULE_CCR) and self.parameter < 0:
            raise ValidationError(f"{self.kind} parameter must be >= 0")


@dataclass(frozen=True)
class AgentRecord:
    """One simulated agent: its observations, ground-truth label and provenance."""

    agent_id: int
    observations: ObservationSet
    label: int | None = None
    provenance: dict = field(default_factory=dict)


def candidates_of(relative_ranks) -> np.ndarray:
    """Flags per position: True iff that applicant outranks everyone before it.

    ``relative_ranks[t]`` is the overall rank of applicant t (1 = best).  The
    input must be a permutation of 1..X.
    """
    ranks = np.asarray(relative_ranks, dtype=np.int64)
    x = ranks.shape[0]
    if x == 0 or sorted(ranks.tolist()) != list(range(1, x + 1)):
        raise ValidationError("relative_ranks must be a permutation of 1..X")
    best_so_far = np.minimum.accumulate(ranks)
    flags = np.empty(x, dtype=bool)
    flags[0] = True
    flags[1:] = ranks[1:] < best_so_far[:-1]
    return flags


def _decide(rule: HeuristicRule, candidate_index: int, run_before: int, rng) -> bool:
    """Accept/reject decision at a candidate position.

    ``candidate_index`` counts candidates seen so far including the current
    one; ``run_before`` is the number of consecutive non-candidates
    immediately preceding this candidate.
    """
    if rule.kind == RULE_SNCCR:
        return run_before >= rule.parameter
    if rule.kind == RULE_CCR:
        return candidate_index >= max(rule.parameter, 1)
    return bool(rng.random() < 0.5)  # RANDOM


def run_secretary_rule_with_outcome(
    rule: HeuristicRule,
    relative_ranks,
    rng=None,
) -> tuple[Trajectory, int]:
    """Apply a heuristic rule to one applicant ordering.

    Returns the decision trajectory in the secretary MDP's state encoding
    (state = candidate position - 1, actions reject/accept) plus the 1-based
    position finally hired.  Only candidate positions generate pairs; if no
    candidate is accepted the final applicant is hired by force, which adds
    an accept pair only when that applicant happens to be a candidate.
    """
    if rule.kind == RULE_RANDOM and rng is None:
        raise ValidationError("the RANDOM rule needs a random source")
    flags = candidates_of(relative_ranks)
    x = flags.shape[0]
    pairs: list[tuple[int, int]] = []
    candidate_count = 0
    run_before = 0
    for pos in range(1, x + 1):
        if not flags[pos - 1]:
            run_before += 1
            continue
        candidate_count += 1
        if rule.kind == RULE_CR:
            accept = pos >= rule.parameter
        else:
            accept = _decide(rule, candidate_count, run_before, rng)
        if pos == x:
            accept = True  # the last applicant must be hired
        pairs.append((pos - 1, ACCEPT if accept else REJECT))
        if accept:
            return Trajectory.from_pairs(pairs), pos
        run_before = 0
    return Trajectory.from_pairs(pairs), x


def run_secretary_rule(rule: HeuristicRule, relative_ranks, rng=None) -> Trajectory:
    trajectory, _ = run_secretary_rule_with_outcome(rule, relative_ranks, rng)
    return trajectory


def perturbed_parameter(rule: HeuristicRule, noise_std: float, rng) -> float:
    """Individualize a rule parameter: add Gaussian noise, round, floor at 1."""
    if rule.kind == RULE_RANDOM:
        return rule.parameter
    if noise_std == 0:
        return float(rule.parameter)
    return float(max(1.0, round(rule.parameter + rng.normal(0.0, noise_std))))


def simulate_secretary_cohort(
    rules: list[tuple[HeuristicRule, int, float]],
    num_trajectories_per_agent: int,
    spec: SecretarySpec,
    seed,
) -> list[AgentRecord]:
    """Simulate groups of heuristic agents on fresh random secretary problems.

    ``rules`` lists (rule, agent count, parameter noise std) per group.  Each
    agent keeps one perturbed parameter and solves
    ``num_trajectories_per_agent`` independent random orderings with it.  The
    group index becomes the ground-truth label.
    """
    if num_trajectories_per_agent < 1:
        raise ValidationError("need at least one trajectory per agent")
    total_agents = sum(count for _, count, _ in rules)
    if total_agents < 1:
        raise ValidationError("cohort must contain at least one agent")
    rngs = spawn_generators(seed, total_agents)

    records: list[AgentRecord] = []
    agent_id = 0
    for label, (rule, count, noise_std) in enumerate(rules):
        if count < 1:
            raise ValidationError("group agent counts must be >= 1")
        for _ in range(count):
            rng = rngs[agent_id]
            param = perturbed_parameter(rule, noise_std, rng)
            agent_rule = HeuristicRule(rule.kind, param)
            trajectories = []
            for _ in range(num_trajectories_per_agent):
                ranks = rng.permutation(spec.num_applicants) + 1
                trajectories.append(run_secretary_rule(agent_rule, ranks, rng))
            records.append(
                AgentRecord(
                    agent_id=agent_id,
                    observations=ObservationSet(tuple(trajectories)),
                    label=label,
                    provenance={
                        "rule": rule.kind,
                        "base_parameter": rule.parameter,
                        "parameter": param,
                    },
                )
            )
            agent_id += 1
    return records


def simulate_gridworld_cohort(
    spec: GridWorldSpec,
    group_destinations: list[list[tuple[tuple[int, int], float]]],
    agents_per_group: int,
    trajs_per_agent: int,
    traj_len: int = 6,
    reward_noise_std: float = 0.1,
    start_state: int = 0,
    vi_tolerance: float = 1e-6,
    seed=0,
) -> list[AgentRecord]:
    """Simulate MDP-optimal GridWorld agents with per-agent noisy rewards.

    Each group shares a ground-truth destination reward; each agent perturbs
    it with i.i.d. Gaussian noise, solves the MDP and rolls out
    ``trajs_per_agent`` trajectories of ``traj_len`` steps from
    ``start_state``.
    """
    if agents_per_group < 1 or trajs_per_agent < 1 or traj_len < 1:
        raise ValidationError("cohort sizes must be positive")
    mdp = build_gridworld(spec)
    total = agents_per_group * len(group_destinations)
    rngs = spawn_generators(seed, total)

    records: list[AgentRecord] = []
    agent_id = 0
    for label, destinations in enumerate(group_destinations):
        for _ in range(agents_per_group):
            rng = rngs[agent_id]
            reward = gridworld_reward(spec, destinations, reward_noise_std, rng)
            solved = mdp.with_reward(reward)
            vf = value_iteration(solved, tolerance=vi_tolerance)
            policy = greedy_policy(q_from_values(solved, vf))
            trajectories = tuple(
                sample_trajectory(mdp, policy, start_state, traj_len, rng)
                for _ in range(trajs_per_agent)
            )
            records.append(
                AgentRecord(
                    agent_id=agent_id,
                    observations=ObservationSet(trajectories),
                    label=label,
                    provenance={"reward_id": label, "noise_std": reward_noise_std},
                )
            )
            agent_id += 1
    return records


# -- JSON-lines interchange ----------------------------------------------


def cohort_to_jsonl(records: list[AgentRecord], path) -> None:
    """One agent per line: {agent_id, label, provenance, trajectories}."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            doc = {
                "agent_id": record.agent_id,
                "label": record.label,
                "provenance": record.provenance,
                "trajectories": [traj.to_list() for traj in record.observations],
            }
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def cohort_from_jsonl(path) -> list[AgentRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            trajectories = tuple(Trajectory.from_pairs(t) for t in doc["trajectories"])
            records.append(
                AgentRecord(
                    agent_id=int(doc["agent_id"]),
                    observations=ObservationSet(trajectories),
                    label=None if doc.get("label") is None else int(doc["label"]),
                    provenance=doc.get("provenance", {}),
                )
            )
    return records
