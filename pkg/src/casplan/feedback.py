"""Online estimation of the human feedback profile.

Feedback signals are tallied per (feature bucket, action, level) with
Dirichlet pseudo-counts; the estimated profile is the posterior mean. The
expected value of sample information (EVSI) over the posterior serves as
the stationarity diagnostic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable

import numpy as np

from .cas import FeedbackProfile, LevelSet, Signal


@dataclass(frozen=True)
class FeatureProjection:
    """Agent-visible bucket key per (state, action); the generalization unit."""

    project: Callable[[int, int], Hashable]

    def __call__(self, s: int, a: int) -> Hashable:
        return self.project(s, a)


class FeedbackCounts:
    """Dirichlet-style signal counts per (bucket, action, level)."""

    def __init__(self, levels: LevelSet, alpha: float = 1.0, seed_counts=None):
        if alpha <= 0:
            raise ValueError("prior pseudo-count must be positive")
        self.levels = levels
        self.alpha = alpha
        self.counts: dict = {}
        self.total = 0
        for key, sig_counts in (seed_counts or {}).items():
            for sig, n in sig_counts.items():
                self._bump(key, sig, n)

    def _bump(self, key, signal, n):
        bucket, action, rank = key
        if signal not in self.levels.valid_signals(rank):
            raise ValueError(f"signal {signal} not valid at level {rank}")
        cell = self.counts.setdefault(key, {})
        cell[signal] = cell.get(signal, 0) + n

    def record(self, bucket, action, rank, signal: Signal):
        self._bump((bucket, action, rank), signal, 1)
        self.total += 1

    def updates(self, bucket, action, rank) -> int:
        cell = self.counts.get((bucket, action, rank), {})
        return sum(cell.values())

    def posterior_mean(self, bucket, action, rank) -> dict:
        """Posterior-mean probability per valid signal."""
        valid = self.levels.valid_signals(rank)
        cell = self.counts.get((bucket, action, rank), {})
        denom = len(valid) * self.alpha + sum(cell.values())
        return {sig: (self.alpha + cell.get(sig, 0)) / denom for sig in valid}

    def posterior_alphas(self, bucket, action, rank) -> np.ndarray:
        valid = self.levels.valid_signals(rank)
        cell = self.counts.get((bucket, action, rank), {})
        return np.array([self.alpha + cell.get(sig, 0) for sig in valid])

    def copy(self) -> "FeedbackCounts":
        out = FeedbackCounts(self.levels, self.alpha)
        out.counts = {k: dict(v) for k, v in self.counts.items()}
        out.total = self.total
        return out

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "counts": [
                {"bucket": list(bucket) if isinstance(bucket, tuple) else bucket,
                 "action": action, "level": rank,
                 "signals": {sig.value: n for sig, n in cell.items()}}
                for (bucket, action, rank), cell in self.counts.items()
            ],
        }

    @classmethod
    def from_dict(cls, levels: LevelSet, payload: dict) -> "FeedbackCounts":
        out = cls(levels, alpha=payload["alpha"])
        for row in payload["counts"]:
            bucket = row["bucket"]
            if isinstance(bucket, list):
                bucket = tuple(bucket)
            for sig, n in row["signals"].items():
                out._bump((bucket, row["action"], row["level"]), Signal(sig), n)
                out.total += n
        return out


def record_feedback(counts: FeedbackCounts, bucket, action, rank,
                    signal: Signal) -> FeedbackCounts:
    """Increment one signal count; rejects signals invalid at the level."""
    counts.record(bucket, action, rank, signal)
    return counts


class _PosteriorMeanProfile(FeedbackProfile):
    """Feedback profile backed by a counts snapshot; uniform where unseen."""

    def __init__(self, counts: FeedbackCounts):
        super().__init__(counts.levels)
        self._counts = counts
        self._cache: dict = {}

    def dist(self, bucket, action, rank) -> dict:
        key = (bucket, action, rank)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._counts.posterior_mean(*key)
            self._cache[key] = hit
        return hit


def estimate_lambda(counts: FeedbackCounts) -> FeedbackProfile:
    """Posterior-mean feedback profile from the current counts."""
    return _PosteriorMeanProfile(counts.copy())


class _SampledProfile(FeedbackProfile):
    def __init__(self, levels, table, fallback: FeedbackProfile):
        super().__init__(levels, table)
        self._fallback = fallback

    def dist(self, bucket, action, rank):
        key = (bucket, action, rank)
        if key in self.table:
            return self.table[key]
        return self._fallback.dist(bucket, action, rank)


def sample_profile(counts: FeedbackCounts, cells, rng) -> FeedbackProfile:
    """Draw one profile from the Dirichlet posterior over the given cells.

    Cells not listed stay at their posterior mean.
    """
    table = {}
    for bucket, action, rank in cells:
        valid = counts.levels.valid_signals(rank)
        if not valid:
            continue
        draw = rng.dirichlet(counts.posterior_alphas(bucket, action, rank))
        table[(bucket, action, rank)] = dict(zip(valid, draw))
    return _SampledProfile(counts.levels, table, estimate_lambda(counts))


def evsi(counts: FeedbackCounts, bucket, action, utility_by_level,
         samples: int, rng, obs_rank: int | None = None, cells=None):
    """Monte-Carlo EVSI of further feedback samples for (bucket, action).

    `utility_by_level(profile)` must return the utility (negative q-value)
    of executing the action at each level rank, under the optimal values
    for that profile. Per posterior draw the signal-weighted utilities are
    maximized over levels inside the sum over signals; subtracting the
    best level of the unconditioned average leaves the value of resolving
    the remaining posterior uncertainty, which vanishes as counts grow.
    The signal weights come from `obs_rank`; when omitted, the maximum
    over all feedback-bearing levels is returned.
    Returns (estimate, standard_error).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    levels = counts.levels
    obs_ranks = ([obs_rank] if obs_rank is not None else levels.feedback_ranks())
    if cells is None:
        cells = sorted(set(counts.counts)
                       | {(bucket, action, r) for r in levels.feedback_ranks()},
                       key=repr)

    n_levels = len(levels)
    utils = np.zeros((samples, n_levels))
    sig_probs = {r: np.zeros((samples, len(levels.valid_signals(r))))
                 for r in obs_ranks}
    for i in range(samples):
        profile = sample_profile(counts, cells, rng)
        utils[i] = utility_by_level(profile)
        for r in obs_ranks:
            d = profile.dist(bucket, action, r)
            sig_probs[r][i] = [d[sig] for sig in levels.valid_signals(r)]

    prior_value = float(utils.mean(axis=0).max())
    best = (-np.inf, 0.0)
    for r in obs_ranks:
        # sum_sig max_l (p(sig) * U(l)) per draw; the weights are
        # nonnegative, so each term picks that draw's best level
        term1_contrib = np.zeros(samples)
        for j in range(sig_probs[r].shape[1]):
            term1_contrib += (utils * sig_probs[r][:, j:j + 1]).max(axis=1)
        per_sample = term1_contrib - prior_value
        estimate = float(per_sample.mean())
        se = float(per_sample.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
        if estimate > best[0]:
            best = (estimate, se)
    return best


def is_lambda_stationary(evsi_values, epsilon: float) -> bool:
    """True iff every EVSI estimate is below epsilon (vacuously true if empty)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return all(v < epsilon for v in evsi_values)


class ConvergenceGate:
    """Practical convergence test on posterior-mean drift.

    A (bucket, action, level) cell counts as converged once its posterior
    mean has moved less than `threshold` in max-norm over the last
    `window` updates. Cells with fewer than `window` updates are open.
    """

    def __init__(self, window: int = 20, threshold: float = 0.01):
        self.window = window
        self.threshold = threshold
        self._history: dict = {}

    def update(self, counts: FeedbackCounts, bucket, action, rank):
        key = (bucket, action, rank)
        hist = self._history.setdefault(key, deque(maxlen=self.window + 1))
        hist.append(counts.posterior_mean(bucket, action, rank))

    def converged(self, bucket, action, rank) -> bool:
        hist = self._history.get((bucket, action, rank))
        if hist is None or len(hist) <= self.window:
            return False
        old, new = hist[0], hist[-1]
        drift = max(abs(new[sig] - old[sig]) for sig in new)
        return drift < self.threshold
