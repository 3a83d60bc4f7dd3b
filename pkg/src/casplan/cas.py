"""Competence-aware planning problems over levels of autonomy.

A CAS couples a domain SSP with an autonomy model (levels, autonomy
profile, autonomy cost) and a human feedback model (feedback profile,
human cost, human takeover transition). Planning happens on the flattened
product problem over (state, level) pairs, restricted to the autonomy
profile's allowed levels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .ssp import SSP, Policy, ValueFunction, q_table, solve_value_iteration

DIST_TOL = 1e-9


class Signal(enum.Enum):
    NONE = "none"
    APPROVE = "approve"
    DISAPPROVE = "disapprove"
    OVERRIDE = "override"


class LevelMode(enum.Enum):
    """How an action is carried out at a level of autonomy."""

    HUMAN = "human"            # human operates manually
    VERIFIED = "verified"      # agent asks, acts only on approval
    SUPERVISED = "supervised"  # agent acts, human may override
    AUTONOMOUS = "autonomous"  # agent acts alone


# Signals observable at each operating mode.
MODE_SIGNALS = {
    LevelMode.HUMAN: (),
    LevelMode.VERIFIED: (Signal.APPROVE, Signal.DISAPPROVE),
    LevelMode.SUPERVISED: (Signal.NONE, Signal.OVERRIDE),
    LevelMode.AUTONOMOUS: (),
}


@dataclass(frozen=True)
class Level:
    rank: int
    mode: LevelMode
    name: str


class LevelSet:
    """Fully ordered chain of autonomy levels."""

    def __init__(self, levels):
        levels = list(levels)
        if not levels:
            raise ValueError("at least one level required")
        for i, lv in enumerate(levels):
            if lv.rank != i:
                raise ValueError("level ranks must be 0..n in order")
        self.levels = levels

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def mode(self, rank: int) -> LevelMode:
        return self.levels[rank].mode

    def valid_signals(self, rank: int):
        return MODE_SIGNALS[self.levels[rank].mode]

    def adjacent(self, rank: int):
        """Ranks reachable in one step along the chain (excluding rank)."""
        out = []
        if rank > 0:
            out.append(rank - 1)
        if rank < len(self.levels) - 1:
            out.append(rank + 1)
        return out

    def feedback_ranks(self):
        return [lv.rank for lv in self.levels if MODE_SIGNALS[lv.mode]]

    @classmethod
    def standard(cls) -> "LevelSet":
        return cls([
            Level(0, LevelMode.HUMAN, "no-autonomy"),
            Level(1, LevelMode.VERIFIED, "verified"),
            Level(2, LevelMode.SUPERVISED, "supervised"),
            Level(3, LevelMode.AUTONOMOUS, "unsupervised"),
        ])


class AutonomyProfile:
    """Allowed levels per (state, action); grows monotonically.

    Rank 0 stays allowed everywhere so a proper (human-fallback) policy
    always exists.
    """

    def __init__(self, n_levels, default, overrides=None):
        self.n_levels = n_levels
        self.default = frozenset(default)
        self._overrides: dict = dict(overrides or {})
        for levels in [self.default, *self._overrides.values()]:
            self._check(levels)
        self._overrides = {k: frozenset(v) for k, v in self._overrides.items()}

    def _check(self, levels):
        if not levels:
            raise ValueError("allowed level sets must be non-empty")
        if 0 not in levels:
            raise ValueError("rank 0 must stay allowed as the human fallback")
        if any(l < 0 or l >= self.n_levels for l in levels):
            raise ValueError("level rank out of range")

    def allowed(self, s: int, a: int) -> frozenset:
        return self._overrides.get((s, a), self.default)

    def add(self, s: int, a: int, rank: int) -> bool:
        """Allow `rank` at (s, a); returns True if the set actually grew."""
        cur = self.allowed(s, a)
        if rank in cur:
            return False
        self._check(cur | {rank})
        self._overrides[(s, a)] = cur | {rank}
        return True

    def copy(self) -> "AutonomyProfile":
        return AutonomyProfile(self.n_levels, self.default, self._overrides)

    def items(self):
        return self._overrides.items()


@dataclass(frozen=True)
class AutonomyCost:
    """Per-level operation cost plus a penalty per rank switched."""

    op_cost: dict
    switch_coeff: float = 0.0

    def cost(self, l_prev: int, l_next: int) -> float:
        return (self.op_cost.get(l_next, 0.0)
                + self.switch_coeff * abs(l_next - l_prev))


class HumanCost:
    """Cost to the human of a step at a level, with per-pair overrides."""

    def __init__(self, per_level, overrides=None, top_rank=None):
        self.per_level = dict(per_level)
        self.overrides = dict(overrides or {})
        if top_rank is not None and self.per_level.get(top_rank, 0.0) != 0.0:
            raise ValueError("human cost must be zero at the top level")
        if any(v < 0 for v in self.per_level.values()):
            raise ValueError("human costs must be nonnegative")

    def cost(self, s: int, a: int, l_prev: int, l_next: int) -> float:
        key = (s, a, l_next)
        if key in self.overrides:
            return self.overrides[key]
        return self.per_level.get(l_next, 0.0)


class HumanTransition:
    """Successor distribution when the human takes control of an action."""

    def __init__(self, rows: dict):
        self.rows = {}
        for key, row in rows.items():
            total = sum(row.values())
            if abs(total - 1.0) > DIST_TOL:
                raise ValueError(f"takeover row {key} sums to {total!r}")
            self.rows[key] = dict(row)

    def row(self, s: int, a: int) -> dict:
        return self.rows[(s, a)]

    def prob(self, s: int, a: int, s2: int) -> float:
        return self.rows[(s, a)].get(s2, 0.0)


class FeedbackProfile:
    """Signal distributions per (feature bucket, action, level)."""

    def __init__(self, levels: LevelSet, table=None, allow_default=True):
        self.levels = levels
        self.table = dict(table or {})
        self.allow_default = allow_default
        for key, dist in self.table.items():
            self._check(key[2], dist)

    def _check(self, rank, dist):
        valid = set(self.levels.valid_signals(rank))
        if set(dist) - valid:
            raise ValueError(f"invalid signals for rank {rank}: {dist}")
        if abs(sum(dist.values()) - 1.0) > DIST_TOL:
            raise ValueError(f"distribution does not sum to 1: {dist}")

    def dist(self, bucket, action, rank) -> dict:
        key = (bucket, action, rank)
        if key in self.table:
            return self.table[key]
        if not self.allow_default:
            raise KeyError(key)
        valid = self.levels.valid_signals(rank)
        if not valid:
            return {}
        return {sig: 1.0 / len(valid) for sig in valid}


@dataclass
class CAS:
    """A domain SSP extended with autonomy and human-feedback models."""

    domain: SSP
    levels: LevelSet
    kappa: AutonomyProfile
    mu: AutonomyCost
    lam: FeedbackProfile
    rho: HumanCost
    tau: HumanTransition
    project: Callable[[int, int], object]
    weights: tuple = (1.0, 1.0, 1.0)
    start_level: int = 0


def is_allowed(kappa: AutonomyProfile, sbar, abar) -> bool:
    """True iff the action's level is allowed at the underlying pair."""
    s, _l_prev = sbar
    a, l = abar
    return l in kappa.allowed(s, a)


def cas_cost(cas: CAS, sbar, abar) -> float:
    """Weighted sum of domain, autonomy, and human cost; zero at the goal."""
    s, l_prev = sbar
    a, l = abar
    if s == cas.domain.goal:
        return 0.0
    w_c, w_mu, w_rho = cas.weights
    return (w_c * cas.domain.cost(s, a)
            + w_mu * cas.mu.cost(l_prev, l)
            + w_rho * cas.rho.cost(s, a, l_prev, l))


def cas_transition_row(cas: CAS, s: int, a: int, level: int) -> dict:
    """Composed successor distribution over domain states for one level."""
    mode = cas.levels.mode(level)
    t_row = dict(zip(*cas.domain.transition_row(s, a)))
    t_row = {int(k): float(v) for k, v in t_row.items()}
    if mode is LevelMode.AUTONOMOUS:
        return t_row
    if mode is LevelMode.HUMAN:
        return dict(cas.tau.row(s, a))
    lam = cas.lam.dist(cas.project(s, a), a, level)
    out: dict = {}
    if mode is LevelMode.VERIFIED:
        for s2, p in t_row.items():
            out[s2] = out.get(s2, 0.0) + lam.get(Signal.APPROVE, 0.0) * p
        out[s] = out.get(s, 0.0) + lam.get(Signal.DISAPPROVE, 0.0)
    else:  # SUPERVISED
        for s2, p in t_row.items():
            out[s2] = out.get(s2, 0.0) + lam.get(Signal.NONE, 0.0) * p
        for s2, p in cas.tau.row(s, a).items():
            out[s2] = out.get(s2, 0.0) + lam.get(Signal.OVERRIDE, 0.0) * p
    return out


def cas_transition(cas: CAS, sbar, abar, s2: int) -> float:
    """Probability of landing on domain state s2; landed level = action level."""
    s, _l_prev = sbar
    a, level = abar
    if level < 0 or level >= len(cas.levels):
        raise IndexError(f"invalid level {level}")
    return cas_transition_row(cas, s, a, level).get(s2, 0.0)


class FactoredIndex:
    """Index maps between the product space and flat arrays.

    Non-goal factored states are (state, level) pairs; every (goal, level)
    copy collapses into a single absorbing goal index placed last.
    """

    def __init__(self, n_states, n_actions, n_levels, goal):
        self.nd = n_states
        self.na = n_actions
        self.nl = n_levels
        self.goal_domain = goal
        self.domain_states = [s for s in range(n_states) if s != goal]
        self._pos = {s: i for i, s in enumerate(self.domain_states)}
        self.n_sbar = len(self.domain_states) * n_levels + 1
        self.n_abar = n_actions * n_levels
        self.goal = self.n_sbar - 1

    def sbar(self, s: int, level: int) -> int:
        if s == self.goal_domain:
            return self.goal
        return self._pos[s] * self.nl + level

    def abar(self, a: int, level: int) -> int:
        return a * self.nl + level

    def split_sbar(self, idx: int):
        if idx == self.goal:
            return self.goal_domain, None
        return self.domain_states[idx // self.nl], idx % self.nl

    def split_abar(self, idx: int):
        return idx // self.nl, idx % self.nl


class FlattenedCas:
    """Flattened product SSP with a reusable sparsity pattern.

    The pattern and cost vector depend only on the domain, levels, tau,
    mu, and rho; the feedback profile enters purely through per-entry
    weights, so re-solving after a learning update only rescales data.
    """

    def __init__(self, cas: CAS):
        self.cas = cas
        dom = cas.domain
        self.index = FactoredIndex(dom.n_states, dom.n_actions,
                                   len(cas.levels), dom.goal)
        idx = self.index
        nl, na = idx.nl, idx.na

        # Raw entries for l_prev = 0, replicated for other l_prev below.
        rows, cols, base, slot = [], [], [], []
        self.pairs = [(s, a) for s in idx.domain_states for a in range(na)]
        self._pair_pos = {p: i for i, p in enumerate(self.pairs)}

        def succ_col(s2, level):
            return idx.goal if s2 == dom.goal else idx.sbar(s2, level)

        for pi, (s, a) in enumerate(self.pairs):
            t_succ, t_prob = dom.transition_row(s, a)
            row0 = idx.sbar(s, 0) * idx.n_abar
            for level in range(nl):
                r = row0 + idx.abar(a, level)
                mode = cas.levels.mode(level)
                wbase = (pi * nl + level) * 2
                if mode is LevelMode.AUTONOMOUS:
                    for s2, p in zip(t_succ, t_prob):
                        rows.append(r); cols.append(succ_col(int(s2), level))
                        base.append(float(p)); slot.append(-1)
                elif mode is LevelMode.HUMAN:
                    for s2, p in cas.tau.row(s, a).items():
                        rows.append(r); cols.append(succ_col(s2, level))
                        base.append(float(p)); slot.append(-1)
                elif mode is LevelMode.VERIFIED:
                    for s2, p in zip(t_succ, t_prob):
                        rows.append(r); cols.append(succ_col(int(s2), level))
                        base.append(float(p)); slot.append(wbase)
                    rows.append(r); cols.append(succ_col(s, level))
                    base.append(1.0); slot.append(wbase + 1)
                else:  # SUPERVISED
                    for s2, p in zip(t_succ, t_prob):
                        rows.append(r); cols.append(succ_col(int(s2), level))
                        base.append(float(p)); slot.append(wbase)
                    for s2, p in cas.tau.row(s, a).items():
                        rows.append(r); cols.append(succ_col(s2, level))
                        base.append(float(p)); slot.append(wbase + 1)

        rows = np.array(rows, dtype=np.int64)
        cols = np.array(cols, dtype=np.int64)
        base = np.array(base, dtype=float)
        slot = np.array(slot, dtype=np.int64)

        # Replicate across previous levels (the row block shifts, nothing else).
        reps = []
        for lp in range(nl):
            reps.append(rows + lp * idx.n_abar)
        rows = np.concatenate(reps)
        cols = np.tile(cols, nl)
        base = np.tile(base, nl)
        slot = np.tile(slot, nl)

        # Absorbing goal rows.
        goal_rows = idx.goal * idx.n_abar + np.arange(idx.n_abar)
        rows = np.concatenate([rows, goal_rows])
        cols = np.concatenate([cols, np.full(idx.n_abar, idx.goal)])
        base = np.concatenate([base, np.ones(idx.n_abar)])
        slot = np.concatenate([slot, np.full(idx.n_abar, -1, dtype=np.int64)])

        # Canonical CSR structure with duplicate (row, col) entries merged.
        n_rows = idx.n_sbar * idx.n_abar
        key = rows * idx.n_sbar + cols
        order = np.argsort(key, kind="stable")
        self._base = base[order]
        self._slot = slot[order]
        ukey, inverse = np.unique(key[order], return_inverse=True)
        self._inverse = inverse
        self._nnz = len(ukey)
        urows = ukey // idx.n_sbar
        self._indices = (ukey % idx.n_sbar).astype(np.int32)
        counts = np.bincount(urows, minlength=n_rows)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

        self._costs = self._build_costs()
        self._const_weight_mask = self._slot < 0

    def _build_costs(self) -> np.ndarray:
        cas, idx = self.cas, self.index
        w_c, w_mu, w_rho = cas.weights
        costs = np.zeros(idx.n_sbar * idx.n_abar)
        mu_grid = np.array([[cas.mu.cost(lp, ln) for ln in range(idx.nl)]
                            for lp in range(idx.nl)])
        for s, a in self.pairs:
            c_dom = cas.domain.cost(s, a)
            for lp in range(idx.nl):
                row0 = idx.sbar(s, lp) * idx.n_abar + idx.abar(a, 0)
                for ln in range(idx.nl):
                    costs[row0 + ln] = (w_c * c_dom + w_mu * mu_grid[lp, ln]
                                        + w_rho * cas.rho.cost(s, a, lp, ln))
        return costs

    def _weights(self, lam: FeedbackProfile) -> np.ndarray:
        cas, idx = self.cas, self.index
        w = np.zeros(len(self.pairs) * idx.nl * 2)
        for pi, (s, a) in enumerate(self.pairs):
            bucket = cas.project(s, a)
            for level in range(idx.nl):
                mode = cas.levels.mode(level)
                if mode is LevelMode.VERIFIED:
                    d = lam.dist(bucket, a, level)
                    w[(pi * idx.nl + level) * 2] = d.get(Signal.APPROVE, 0.0)
                    w[(pi * idx.nl + level) * 2 + 1] = d.get(Signal.DISAPPROVE, 0.0)
                elif mode is LevelMode.SUPERVISED:
                    d = lam.dist(bucket, a, level)
                    w[(pi * idx.nl + level) * 2] = d.get(Signal.NONE, 0.0)
                    w[(pi * idx.nl + level) * 2 + 1] = d.get(Signal.OVERRIDE, 0.0)
        return w

    def ssp(self, lam: FeedbackProfile | None = None, validate: bool = False) -> SSP:
        """Materialize the flattened SSP under a feedback-profile snapshot."""
        lam = lam if lam is not None else self.cas.lam
        w = self._weights(lam)
        entry_w = np.where(self._const_weight_mask, 1.0,
                           w[np.maximum(self._slot, 0)])
        data = np.bincount(self._inverse, weights=self._base * entry_w,
                           minlength=self._nnz)
        idx = self.index
        matrix = sp.csr_matrix((data, self._indices, self._indptr),
                               shape=(idx.n_sbar * idx.n_abar, idx.n_sbar))
        start = idx.sbar(self.cas.domain.start, self.cas.start_level)
        return SSP(idx.n_sbar, idx.n_abar, matrix, self._costs,
                   start=start, goal=idx.goal, validate=validate)

    def allowed_mask(self, kappa: AutonomyProfile) -> np.ndarray:
        """Row mask over (sbar, abar) for membership in the allowed set."""
        idx = self.index
        mask = np.zeros((idx.n_sbar, idx.na, idx.nl), dtype=bool)
        default = sorted(kappa.default)
        mask[:, :, default] = True
        for (s, a), levels in kappa.items():
            if s == self.cas.domain.goal:
                continue
            row0 = idx.sbar(s, 0)
            mask[row0:row0 + idx.nl, a, :] = False
            mask[row0:row0 + idx.nl, a, sorted(levels)] = True
        mask[idx.goal] = True
        return mask.reshape(-1)


def flatten_to_ssp(cas: CAS, validate: bool = True):
    """Flatten a CAS to (SSP over the product space, allowed predicate).

    The predicate takes flattened (state, action) indices, matching the
    solver's `allowed` argument.
    """
    flat = FlattenedCas(cas)
    ssp = flat.ssp(validate=validate)
    mask = flat.allowed_mask(cas.kappa)

    def allowed(sbar_idx: int, abar_idx: int) -> bool:
        return bool(mask[sbar_idx * flat.index.n_abar + abar_idx])

    return ssp, allowed, flat


def solve_cas(cas: CAS, tolerance: float = 1e-6):
    """Solve a CAS over its allowed policy set.

    Returns (ValueFunction, Policy, FlattenedCas); values and policy are
    over flattened factored states.
    """
    flat = FlattenedCas(cas)
    ssp = flat.ssp()
    mask = flat.allowed_mask(cas.kappa)
    vf, policy = solve_value_iteration(ssp, tolerance, allowed=mask)
    return vf, policy, flat


@dataclass(frozen=True)
class Competence:
    """Least-cost level per (factored state, domain action) under a profile."""

    chi: np.ndarray  # shape (n_sbar, n_actions), level ranks
    index: FactoredIndex

    def level(self, s: int, l_prev: int, a: int) -> int:
        return int(self.chi[self.index.sbar(s, l_prev), a])


def competence(cas: CAS, true_lambda: FeedbackProfile,
               tolerance: float = 1e-6) -> Competence:
    """Optimal level per (sbar, action) under the true feedback profile.

    Evaluated with the autonomy profile unrestricted; ties break to the
    lowest level rank.
    """
    flat = FlattenedCas(cas)
    ssp = flat.ssp(lam=true_lambda)
    vf, _ = solve_value_iteration(ssp, tolerance)
    q = q_table(ssp, vf)
    idx = flat.index
    q = q.reshape(idx.n_sbar, idx.na, idx.nl)
    return Competence(chi=np.argmin(q, axis=2), index=idx)
