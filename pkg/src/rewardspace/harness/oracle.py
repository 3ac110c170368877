"""Exact optimal-stopping benchmark for the secretary problem."""

from __future__ import annotations

import numpy as np

from ..agents import RULE_CR, HeuristicRule, run_secretary_rule_with_outcome
from ..exceptions import ValidationError
from ..seeding import as_generator


def cutoff_success_probability(num_applicants: int, k: int) -> float:
    """Probability that "reject the first k, then take the next candidate"
    hires the overall best of ``num_applicants``."""
    x = num_applicants
    if not 0 <= k < x:
        raise ValidationError("cutoff k must lie in 0..X-1")
    if k == 0:
        return 1.0 / x  # the first applicant is hired immediately
    return (k / x) * sum(1.0 / (j - 1) for j in range(k + 1, x + 1))


def secretary_dp_oracle(num_applicants: int) -> tuple[int, float]:
    """Optimal cutoff rule by exhaustive evaluation of the exact success formula.

    Returns (h_star, success probability) where the rule rejects the first
    h_star - 1 applicants; ties resolve to the smaller cutoff.
    """
    if num_applicants < 2:
        raise ValidationError("need at least 2 applicants")
    best_k, best_value = 0, -1.0
    for k in range(num_applicants):
        value = cutoff_success_probability(num_applicants, k)
        if value > best_value + 1e-15:
            best_k, best_value = k, value
    return best_k + 1, best_value


def simulate_cutoff_success(num_applicants: int, cutoff_h: int, trials: int, seed=0) -> float:
    """Monte Carlo success rate of CR(h) over random applicant orderings."""
    rng = as_generator(seed)
    rule = HeuristicRule(RULE_CR, cutoff_h)
    wins = 0
    for _ in range(trials):
        ranks = rng.permutation(num_applicants) + 1
        _, hired = run_secretary_rule_with_outcome(rule, ranks)
        wins += int(ranks[hired - 1] == 1)
    return wins / trials
