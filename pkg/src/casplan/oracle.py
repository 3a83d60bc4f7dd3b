"""Simulated human authority.

Ground truth for feedback, gate permissions, and takeover transitions.
The true feedback profile may condition on features the agent cannot see;
projecting it onto agent-visible buckets (mixture over member pairs)
yields the reference profile used for competence scoring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable

from .cas import FeedbackProfile, HumanTransition, LevelSet, Signal
from .feedback import FeatureProjection


@dataclass
class OracleSpec:
    """Immutable ground-truth human model for one trial."""

    levels: LevelSet
    true_lambda: FeedbackProfile         # keyed by hidden buckets
    hidden_project: Callable[[int, int], Hashable]
    kappa_h: Callable[[int, int], frozenset]
    tau: HumanTransition
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")


def sample_feedback(oracle: OracleSpec, s: int, a: int, rank: int, rng) -> Signal:
    """Draw a signal from the true profile at the hidden bucket.

    With probability epsilon the draw flips to the other signal valid at
    that level. Raises at levels without feedback.
    """
    valid = oracle.levels.valid_signals(rank)
    if not valid:
        raise ValueError(f"no feedback signals exist at level {rank}")
    dist = oracle.true_lambda.dist(oracle.hidden_project(s, a), a, rank)
    probs = [dist.get(sig, 0.0) for sig in valid]
    draw = valid[int(rng.choice(len(valid), p=probs))]
    if oracle.epsilon > 0 and rng.random() < oracle.epsilon:
        others = [sig for sig in valid if sig is not draw]
        draw = others[int(rng.choice(len(others)))] if others else draw
    return draw


def human_takeover(oracle: OracleSpec, s: int, a: int, rng) -> int:
    """Successor state when the human takes control (manual step or override)."""
    row = oracle.tau.row(s, a)
    succs = list(row)
    probs = [row[s2] for s2 in succs]
    return int(succs[int(rng.choice(len(succs), p=probs))])


def answer_gate_query(oracle: OracleSpec, s: int, a: int, rank: int, rng) -> bool:
    """Permission to operate at `rank`; epsilon-consistent around kappa_h.

    Levels outside the human's allowance set are never approved; levels
    inside it are denied with probability epsilon (inconsistency noise).
    """
    if rank not in oracle.kappa_h(s, a):
        return False
    if oracle.epsilon > 0 and rng.random() < oracle.epsilon:
        return False
    return True


def projected_lambda(oracle: OracleSpec, projection: FeatureProjection,
                     pairs) -> FeedbackProfile:
    """True profile projected onto agent-visible buckets.

    Each agent bucket's distribution is the uniform mixture of the hidden
    distributions of its member (state, action) pairs.
    """
    groups: dict = {}
    for s, a in pairs:
        groups.setdefault((projection(s, a), a), []).append((s, a))
    table = {}
    for (bucket, a), members in groups.items():
        for rank in oracle.levels.feedback_ranks():
            valid = oracle.levels.valid_signals(rank)
            mix = {sig: 0.0 for sig in valid}
            for s, _ in members:
                dist = oracle.true_lambda.dist(oracle.hidden_project(s, a), a, rank)
                for sig in valid:
                    mix[sig] += dist.get(sig, 0.0) / len(members)
            table[(bucket, a, rank)] = mix
    return FeedbackProfile(oracle.levels, table)
