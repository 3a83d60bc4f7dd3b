"""Gated exploration of new levels of autonomy.

Candidate levels adjacent to the current one are sampled by a softmax
over negative q-values; a disallowed candidate triggers a permission
query to the human authority before the autonomy profile may grow.
Denied (bucket, level) pairs are embargoed for a cooldown.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cas import AutonomyProfile
from .oracle import OracleSpec, answer_gate_query


@dataclass
class ExplorationConfig:
    temperature: float = 1.0
    p_explore: float = 0.1
    embargo_episodes: int = 10
    gate_cost: float = 1.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.p_explore <= 1.0:
            raise ValueError("p_explore must lie in [0, 1]")


@dataclass
class ExplorationState:
    """Per-trial exploration bookkeeping (embargoes and denial counts)."""

    embargo_until: dict = field(default_factory=dict)   # (bucket, rank) -> episode
    denials: dict = field(default_factory=dict)         # (bucket, rank) -> count

    def embargoed(self, bucket, rank, episode: int) -> bool:
        return episode < self.embargo_until.get((bucket, rank), -1)

    def deny(self, bucket, rank, episode: int, cooldown: int):
        key = (bucket, rank)
        self.denials[key] = self.denials.get(key, 0) + 1
        self.embargo_until[key] = episode + cooldown


def propose_level(current_rank: int, candidate_ranks, q_values,
                  temperature: float, rng) -> int:
    """Sample a candidate level with probability softmax(-q / temperature)."""
    ranks = list(candidate_ranks)
    if not ranks:
        raise ValueError("no candidate levels")
    q = np.asarray([q_values[r] for r in ranks], dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("q-values must be finite")
    logits = -q / temperature
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    return int(ranks[int(rng.choice(len(ranks), p=probs))])


def gate_query(oracle: OracleSpec, s: int, a: int, rank: int, rng) -> bool:
    """Ask the human authority for permission to operate at a new level."""
    return answer_gate_query(oracle, s, a, rank, rng)


def update_autonomy_profile(kappa: AutonomyProfile, bucket_pairs, rank: int,
                            approved: bool, state: ExplorationState,
                            bucket, episode: int, cooldown: int) -> bool:
    """Apply a gate outcome: broadcast approval across the bucket, or embargo.

    Returns True if kappa grew for at least one pair.
    """
    if not approved:
        state.deny(bucket, rank, episode, cooldown)
        return False
    grew = False
    for s, a in bucket_pairs:
        grew = kappa.add(s, a, rank) or grew
    return grew
