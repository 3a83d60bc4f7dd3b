"""Stochastic shortest path problems and a value-iteration solver.

States and actions are integer indices. Transition rows are stored in a
single CSR matrix of shape (n_states * n_actions, n_states), row-major in
(state, action), which keeps Bellman backups fully vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

VALUE_CAP = 1e9
ROW_SUM_TOL = 1e-9
_STALL_SWEEPS = 10
_MAX_SWEEPS = 1_000_000


class NoProperPolicyError(RuntimeError):
    """No policy within the allowed action set reaches the goal almost surely."""


@dataclass(frozen=True)
class ValueFunction:
    values: np.ndarray

    def __getitem__(self, state: int) -> float:
        return float(self.values[state])


@dataclass(frozen=True)
class Policy:
    actions: np.ndarray

    def __getitem__(self, state: int) -> int:
        return int(self.actions[state])


class SSP:
    """Goal-directed MDP minimizing expected cumulative cost.

    `transitions` may be a dict mapping (state, action) -> {successor: prob}
    or a prebuilt CSR matrix of shape (n_states * n_actions, n_states).
    Missing dict rows default to a self-loop (useful for absorbing states).
    """

    def __init__(self, n_states, n_actions, transitions, costs, start, goal,
                 validate=True):
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.start = int(start)
        self.goal = int(goal)
        if isinstance(transitions, sp.spmatrix):
            self.matrix = transitions.tocsr()
        else:
            self.matrix = self._build_matrix(transitions)
        self.costs = np.asarray(costs, dtype=float).reshape(
            self.n_states * self.n_actions)
        if validate:
            self._validate()

    def _build_matrix(self, rows: dict) -> sp.csr_matrix:
        data, ri, ci = [], [], []
        for s in range(self.n_states):
            for a in range(self.n_actions):
                row = rows.get((s, a))
                if row is None:
                    row = {s: 1.0}
                for s2, p in row.items():
                    ri.append(s * self.n_actions + a)
                    ci.append(s2)
                    data.append(p)
        shape = (self.n_states * self.n_actions, self.n_states)
        return sp.csr_matrix((data, (ri, ci)), shape=shape)

    def _validate(self):
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(
                f"transition row (s={bad // self.n_actions}, "
                f"a={bad % self.n_actions}) sums to {sums[bad]!r}")
        goal_rows = self.matrix[self.goal * self.n_actions:
                                (self.goal + 1) * self.n_actions]
        if np.any(np.asarray(goal_rows[:, self.goal].todense()).ravel() != 1.0):
            raise ValueError("goal state must be absorbing under every action")
        if np.any(self.costs[self.goal * self.n_actions:
                             (self.goal + 1) * self.n_actions] != 0.0):
            raise ValueError("goal state must have zero cost")
        cost_mat = self.costs.reshape(self.n_states, self.n_actions)
        nongoal = np.ones(self.n_states, dtype=bool)
        nongoal[self.goal] = False
        if np.any(cost_mat[nongoal] <= 0.0):
            raise ValueError("costs must be positive outside the goal")
        reach = self.reachable_from(self.start)
        can_reach_goal = self._coreachable(None)
        if not np.all(can_reach_goal[reach]):
            bad = int(np.flatnonzero(reach & ~can_reach_goal)[0])
            raise ValueError(f"goal unreachable from reachable state {bad}")

    def transition(self, s: int, a: int, s2: int) -> float:
        return float(self.matrix[s * self.n_actions + a, s2])

    def transition_row(self, s: int, a: int):
        """Successor indices and probabilities for one (state, action) row."""
        r = s * self.n_actions + a
        lo, hi = self.matrix.indptr[r], self.matrix.indptr[r + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def cost(self, s: int, a: int) -> float:
        return float(self.costs[s * self.n_actions + a])

    def reachable_from(self, state: int, allowed_mask=None) -> np.ndarray:
        """Forward closure over positive-probability edges (any allowed action)."""
        adj = self._support(allowed_mask)
        seen = np.zeros(self.n_states, dtype=bool)
        frontier = [state]
        seen[state] = True
        while frontier:
            nxt = adj[frontier].sum(axis=0)
            nxt = np.asarray(nxt).ravel() > 0
            nxt &= ~seen
            seen |= nxt
            frontier = list(np.flatnonzero(nxt))
        return seen

    def _support(self, allowed_mask):
        mat = self.matrix
        if allowed_mask is not None:
            keep = np.repeat(allowed_mask.reshape(-1), 1)
            mat = sp.diags(keep.astype(float)) @ mat
        # collapse actions: state s row = OR over its action rows
        collapse = sp.csr_matrix(
            (np.ones(self.n_states * self.n_actions),
             (np.repeat(np.arange(self.n_states), self.n_actions),
              np.arange(self.n_states * self.n_actions))),
            shape=(self.n_states, self.n_states * self.n_actions))
        return (collapse @ mat) > 0

    def _coreachable(self, allowed_mask) -> np.ndarray:
        """States from which the goal is reachable via allowed actions."""
        adj = self._support(allowed_mask).T.tocsr()
        seen = np.zeros(self.n_states, dtype=bool)
        frontier = [self.goal]
        seen[self.goal] = True
        while frontier:
            nxt = np.asarray(adj[frontier].sum(axis=0)).ravel() > 0
            nxt &= ~seen
            seen |= nxt
            frontier = list(np.flatnonzero(nxt))
        return seen


def _normalize_mask(ssp: SSP, allowed) -> np.ndarray:
    if allowed is None:
        return np.ones(ssp.n_states * ssp.n_actions, dtype=bool)
    if callable(allowed):
        mask = np.zeros(ssp.n_states * ssp.n_actions, dtype=bool)
        for s in range(ssp.n_states):
            for a in range(ssp.n_actions):
                mask[s * ssp.n_actions + a] = bool(allowed(s, a))
        return mask
    mask = np.asarray(allowed, dtype=bool).reshape(-1)
    if mask.size != ssp.n_states * ssp.n_actions:
        raise ValueError("allowed mask has wrong size")
    return mask


def solve_value_iteration(ssp: SSP, tolerance: float = 1e-6, allowed=None,
                          initial_values=None):
    """Solve an SSP by value iteration restricted to allowed (s, a) pairs.

    Returns (ValueFunction, Policy). The policy is greedy with respect to
    the returned values, ties broken by lowest action index. Raises
    NoProperPolicyError when no allowed policy reaches the goal from the
    start-reachable region.
    """
    mask = _normalize_mask(ssp, allowed)
    mask[ssp.goal * ssp.n_actions:(ssp.goal + 1) * ssp.n_actions] = True
    per_state = mask.reshape(ssp.n_states, ssp.n_actions).any(axis=1)
    if not per_state.all():
        bad = int(np.flatnonzero(~per_state)[0])
        raise ValueError(f"state {bad} has no allowed action")

    proper = ssp._coreachable(mask)
    reach = ssp.reachable_from(ssp.start, mask)
    if not np.all(proper[reach]):
        raise NoProperPolicyError(
            "goal unreachable from the start region under the allowed set")

    if initial_values is None:
        v = np.zeros(ssp.n_states)
    else:
        v = np.asarray(initial_values, dtype=float).copy()
    v[~proper] = VALUE_CAP
    v[ssp.goal] = 0.0

    inf_cost = np.where(mask, 0.0, np.inf)
    best_residual = np.inf
    stall = 0
    for _ in range(_MAX_SWEEPS):
        q = ssp.costs + ssp.matrix @ v + inf_cost
        v_new = q.reshape(ssp.n_states, ssp.n_actions).min(axis=1)
        v_new = np.minimum(v_new, VALUE_CAP)
        v_new[ssp.goal] = 0.0
        v_new[~proper] = VALUE_CAP
        residual = float(np.max(np.abs(np.where(proper, v_new - v, 0.0))))
        v = v_new
        if residual < tolerance:
            break
        if residual >= best_residual:
            stall += 1
            if stall >= _STALL_SWEEPS and v[proper].max(initial=0.0) >= VALUE_CAP:
                raise NoProperPolicyError("value iteration stalled at the cap")
        else:
            stall = 0
            best_residual = residual
    else:
        raise NoProperPolicyError("value iteration failed to converge")

    q = ssp.costs + ssp.matrix @ v + inf_cost
    policy = np.argmin(q.reshape(ssp.n_states, ssp.n_actions), axis=1)
    return ValueFunction(values=v), Policy(actions=policy)


def q_value(ssp: SSP, values: ValueFunction, s: int, a: int) -> float:
    """Bellman q-value: cost plus expected successor value."""
    succs, probs = ssp.transition_row(s, a)
    return ssp.cost(s, a) + float(probs @ values.values[succs])


def q_table(ssp: SSP, values: ValueFunction) -> np.ndarray:
    """All q-values at once, shape (n_states, n_actions)."""
    q = ssp.costs + ssp.matrix @ values.values
    return q.reshape(ssp.n_states, ssp.n_actions)


def brute_force_values(ssp: SSP, horizon: int, truncation_cap: float = 0.0) -> ValueFunction:
    """Exact finite-horizon expected cost by exhaustive backward recursion.

    Deliberately written with plain per-state loops so it stays independent
    of the vectorized solver it is used to check. Horizon-0 values at
    non-goal states equal `truncation_cap`.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    v = {s: (0.0 if s == ssp.goal else truncation_cap)
         for s in range(ssp.n_states)}
    for _ in range(horizon):
        nv = {}
        for s in range(ssp.n_states):
            if s == ssp.goal:
                nv[s] = 0.0
                continue
            best = None
            for a in range(ssp.n_actions):
                succs, probs = ssp.transition_row(s, a)
                total = ssp.cost(s, a)
                for s2, p in zip(succs, probs):
                    total += p * v[int(s2)]
                if best is None or total < best:
                    best = total
            nv[s] = best
        v = nv
    return ValueFunction(values=np.array([v[s] for s in range(ssp.n_states)]))


def evaluate_policy(ssp: SSP, policy: Policy) -> ValueFunction:
    """Exact policy evaluation via a sparse linear solve."""
    rows = np.arange(ssp.n_states) * ssp.n_actions + policy.actions
    p_pi = ssp.matrix[rows]
    c_pi = ssp.costs[rows].copy()
    p_pi = p_pi.tolil()
    p_pi[ssp.goal] = 0.0
    c_pi[ssp.goal] = 0.0
    a_mat = sp.identity(ssp.n_states, format="csc") - p_pi.tocsc()
    a_mat[ssp.goal, ssp.goal] = 1.0
    v = spla.spsolve(a_mat, c_pi)
    if not np.all(np.isfinite(v)):
        raise NoProperPolicyError("policy evaluation produced non-finite values")
    return ValueFunction(values=np.asarray(v))
