"""Episodic experiment loop: plan, execute, learn, explore, re-plan.

Each trial owns its learning state (feedback counts, autonomy profile,
exploration bookkeeping) and runs episodes sequentially. Metrics per
episode go to CSV; a JSON summary aggregates mean and standard error
across trials per episode.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.csgraph as csgraph

from .cas import FlattenedCas, LevelMode, Signal
from .exploration import (ExplorationConfig, ExplorationState, gate_query,
                          propose_level, update_autonomy_profile)
from .feedback import ConvergenceGate, FeedbackCounts, estimate_lambda
from .oracle import human_takeover, sample_feedback
from .ssp import q_value, solve_value_iteration

CSV_COLUMNS = ["trial", "episode", "expected_cost", "realized_cost",
               "lo_all", "lo_visited", "lo_reachable", "cum_feedback",
               "pct_l0", "pct_l1", "pct_l2", "pct_l3", "human_cost",
               "wall_ms"]

LO_UNDEFINED = float("nan")


@dataclass
class ExperimentConfig:
    episodes: int
    trials: int
    seed: int
    task: str = "single"          # or "random"
    tolerance: float = 1e-6
    max_steps: int = 500
    resolve_drift: float | None = None  # optional lambda-hat drift re-solve
    convergence_window: int = 20
    convergence_threshold: float = 0.01
    alpha: float = 1.0
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)

    def __post_init__(self):
        if self.episodes < 1 or self.trials < 1:
            raise ValueError("episodes and trials must be >= 1")
        if self.task not in ("single", "random"):
            raise ValueError(f"unknown task mode {self.task!r}")


def experiment_config(cfg: dict, **overrides) -> ExperimentConfig:
    """Build an ExperimentConfig from a domain config's `exploration` and
    `learning` blocks; keyword overrides win."""
    explo = cfg.get("exploration", {})
    learn = cfg.get("learning", {})
    kwargs = dict(
        convergence_window=int(learn.get("convergence_window", 20)),
        convergence_threshold=float(learn.get("convergence_threshold", 0.01)),
        exploration=ExplorationConfig(
            temperature=float(explo.get("temperature", 1.0)),
            p_explore=float(explo.get("p_explore", 0.1)),
            embargo_episodes=int(explo.get("embargo_episodes", 10)),
            gate_cost=float(explo.get("gate_cost", 1.0))))
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


@dataclass
class EpisodeRecord:
    trial: int
    episode: int
    expected_cost: float
    realized_cost: float
    lo_all: float
    lo_visited: float
    lo_reachable: float
    cum_feedback: int
    pct_l0: float
    pct_l1: float
    pct_l2: float
    pct_l3: float
    human_cost: float
    wall_ms: float

    def row(self):
        return [self.trial, self.episode,
                f"{self.expected_cost:.6f}", f"{self.realized_cost:.6f}",
                f"{self.lo_all:.6f}", f"{self.lo_visited:.6f}",
                f"{self.lo_reachable:.6f}", self.cum_feedback,
                f"{self.pct_l0:.3f}", f"{self.pct_l1:.3f}",
                f"{self.pct_l2:.3f}", f"{self.pct_l3:.3f}",
                f"{self.human_cost:.6f}", f"{self.wall_ms:.3f}"]


@dataclass
class ExperimentResult:
    records: list
    events: list                 # (trial, episode, step, kind, state, action, level)
    audit_checks: int = 0
    audit_violations: int = 0


class TrialState:
    """Mutable learning state owned by one trial."""

    def __init__(self, bundle, cfg: ExperimentConfig):
        self.kappa = bundle.fresh_kappa()
        self.counts = FeedbackCounts(bundle.levels, alpha=cfg.alpha)
        self.gate = ConvergenceGate(window=cfg.convergence_window,
                                    threshold=cfg.convergence_threshold)
        self.explo = ExplorationState()
        self.visited = set()      # (domain state, level) pairs, accumulated
        self.cum_feedback = 0
        self.vf_by_goal = {}      # warm-start values per goal


def level_optimality(policy, chi, subset, index) -> float:
    """Fraction of subset s-bar whose policy level matches competence."""
    subset = np.asarray(sorted(subset), dtype=int)
    subset = subset[subset != index.goal]
    if subset.size == 0:
        return LO_UNDEFINED
    abar = policy.actions[subset]
    acts, lvls = abar // index.nl, abar % index.nl
    return float(np.mean(chi[subset, acts] == lvls))


def reachable_states(flat_ssp, policy, start_sbar) -> np.ndarray:
    """Forward closure of the policy's positive-probability transitions."""
    n, na = flat_ssp.n_states, flat_ssp.n_actions
    row_ids = np.arange(n) * na + policy.actions
    adj = flat_ssp.matrix[row_ids]
    order = csgraph.breadth_first_order(adj, start_sbar, directed=True,
                                        return_predecessors=False)
    return np.asarray(order, dtype=int)


class _EpisodeRunner:
    """One trial's planning/execution machinery, shared across episodes."""

    def __init__(self, base_bundle, cfg, flat_cache, chi_cache):
        self.base = base_bundle
        self.cfg = cfg
        self.flat_cache = flat_cache
        self.chi_cache = chi_cache

    def _flat_for(self, bundle) -> FlattenedCas:
        goal = bundle.ssp.goal
        flat = self.flat_cache.get(goal)
        if flat is None:
            lam = estimate_lambda(FeedbackCounts(bundle.levels))
            flat = FlattenedCas(bundle.make_cas(lam))
            self.flat_cache[goal] = flat
        return flat

    def _chi_for(self, bundle, flat) -> np.ndarray:
        goal = bundle.ssp.goal
        chi = self.chi_cache.get(goal)
        if chi is None:
            ssp = flat.ssp(lam=self.base.reference_lambda())
            vf, _ = solve_value_iteration(ssp, self.cfg.tolerance)
            q = (ssp.costs.reshape(-1, 1)
                 + ssp.matrix @ vf.values.reshape(-1, 1)).reshape(
                     flat.index.n_sbar, flat.index.na, flat.index.nl)
            chi = np.argmin(q, axis=2)
            self.chi_cache[goal] = chi
        return chi

    def run(self, bundle, state: TrialState, trial: int, episode: int,
            rng, events) -> EpisodeRecord:
        t0 = time.perf_counter()
        cfg, oracle, levels = self.cfg, self.base.oracle, self.base.levels
        flat = self._flat_for(bundle)
        idx = flat.index
        goal = bundle.ssp.goal
        members = self.base.bucket_members()

        lam_hat = estimate_lambda(state.counts)
        ssp_hat = flat.ssp(lam=lam_hat)
        mask = flat.allowed_mask(state.kappa)
        warm = state.vf_by_goal.get(goal)
        vf, policy = solve_value_iteration(ssp_hat, cfg.tolerance,
                                           allowed=mask, initial_values=warm)
        solved_lam = {}

        def snapshot(bucket, a, rank):
            key = (bucket, a, rank)
            if key not in solved_lam:
                solved_lam[key] = lam_hat.dist(bucket, a, rank)

        audit_checks = audit_violations = 0

        def audit_planned():
            nonlocal audit_checks, audit_violations
            rows = np.arange(idx.n_sbar) * idx.n_abar + policy.actions
            audit_checks += idx.n_sbar
            audit_violations += int(np.sum(~mask[rows]))

        audit_planned()

        start_sbar = idx.sbar(bundle.ssp.start, self.base.start_level)
        expected_cost = vf[start_sbar]

        s, l_prev = bundle.ssp.start, self.base.start_level
        state.visited.add((s, l_prev))
        realized = human_cost = 0.0
        level_steps = np.zeros(idx.nl)
        resolve = False
        steps = 0
        while s != goal and steps < cfg.max_steps:
            sbar = idx.sbar(s, l_prev)
            a_plan, l_plan = idx.split_abar(policy[sbar])
            bucket = self.base.projection(s, a_plan)
            l_exec = l_plan

            if rng.random() < cfg.exploration.p_explore:
                cand = []
                for r in {l_prev, l_plan, *levels.adjacent(l_prev),
                          *levels.adjacent(l_plan)}:
                    if r not in state.kappa.allowed(s, a_plan):
                        if not state.explo.embargoed(bucket, r, episode):
                            cand.append(r)
                    elif levels.valid_signals(r) and \
                            not state.gate.converged(bucket, a_plan, r):
                        cand.append(r)
                if cand and cand != [l_plan]:
                    # the incumbent level always competes, so exploration
                    # only deviates when a candidate looks worth its cost
                    if l_plan not in cand:
                        cand.append(l_plan)
                    qv = {r: q_value(ssp_hat, vf, sbar, idx.abar(a_plan, r))
                          for r in cand}
                    r_star = propose_level(l_prev, sorted(cand), qv,
                                           cfg.exploration.temperature, rng)
                    if r_star not in state.kappa.allowed(s, a_plan):
                        human_cost += cfg.exploration.gate_cost
                        ok = gate_query(oracle, s, a_plan, r_star, rng)
                        grew = update_autonomy_profile(
                            state.kappa, members[bucket], r_star, ok,
                            state.explo, bucket, episode,
                            cfg.exploration.embargo_episodes)
                        events.append((trial, episode, steps,
                                       "gate_approve" if ok else "gate_deny",
                                       s, a_plan, r_star))
                        if grew:
                            resolve = True
                        if ok:
                            l_exec = r_star
                    else:
                        l_exec = r_star
                        if l_exec != l_plan:
                            events.append((trial, episode, steps,
                                           "explore_exec", s, a_plan, l_exec))

            # execute (a_plan, l_exec) under level semantics
            audit_checks += 1
            if l_exec not in state.kappa.allowed(s, a_plan):
                audit_violations += 1
            mode = levels.mode(l_exec)
            if mode is LevelMode.HUMAN:
                s2 = human_takeover(oracle, s, a_plan, rng)
            elif mode is LevelMode.AUTONOMOUS:
                s2 = self._sample_domain(bundle, s, a_plan, rng)
            else:
                sig = sample_feedback(oracle, s, a_plan, l_exec, rng)
                snapshot(bucket, a_plan, l_exec)
                state.counts.record(bucket, a_plan, l_exec, sig)
                state.gate.update(state.counts, bucket, a_plan, l_exec)
                state.cum_feedback += 1
                if sig is Signal.APPROVE or sig is Signal.NONE:
                    s2 = self._sample_domain(bundle, s, a_plan, rng)
                elif sig is Signal.DISAPPROVE:
                    s2 = s
                else:  # OVERRIDE
                    s2 = human_takeover(oracle, s, a_plan, rng)
                if cfg.resolve_drift is not None:
                    new = state.counts.posterior_mean(bucket, a_plan, l_exec)
                    old = solved_lam[(bucket, a_plan, l_exec)]
                    if max(abs(new[k] - old[k])
                           for k in new) > cfg.resolve_drift:
                        resolve = True

            step_rho = self.base.rho.cost(s, a_plan, l_prev, l_exec)
            realized += (self.base.weights[0] * bundle.ssp.cost(s, a_plan)
                         + self.base.weights[1] * self.base.mu.cost(l_prev, l_exec)
                         + self.base.weights[2] * step_rho)
            human_cost += step_rho
            level_steps[l_exec] += 1
            steps += 1
            s, l_prev = s2, l_exec
            state.visited.add((s, l_prev))

            if resolve and s != goal:
                lam_hat = estimate_lambda(state.counts)
                ssp_hat = flat.ssp(lam=lam_hat)
                mask = flat.allowed_mask(state.kappa)
                vf, policy = solve_value_iteration(
                    ssp_hat, cfg.tolerance, allowed=mask,
                    initial_values=vf.values)
                solved_lam.clear()
                audit_planned()
                resolve = False

        state.vf_by_goal[goal] = vf.values.copy()

        chi = self._chi_for(bundle, flat)
        all_set = range(idx.n_sbar)
        visited_set = {idx.sbar(vs, vl) for vs, vl in state.visited
                       if vs != goal}
        reach = reachable_states(ssp_hat, policy, start_sbar)
        lo_all = level_optimality(policy, chi, all_set, idx)
        lo_visited = level_optimality(policy, chi, visited_set, idx)
        lo_reachable = level_optimality(policy, chi, reach, idx)

        pct = np.zeros(4)
        if steps:
            pct[:idx.nl] = 100.0 * level_steps / steps
        wall_ms = (time.perf_counter() - t0) * 1000.0
        rec = EpisodeRecord(
            trial=trial, episode=episode, expected_cost=expected_cost,
            realized_cost=realized, lo_all=lo_all, lo_visited=lo_visited,
            lo_reachable=lo_reachable, cum_feedback=state.cum_feedback,
            pct_l0=float(pct[0]), pct_l1=float(pct[1]),
            pct_l2=float(pct[2]), pct_l3=float(pct[3]),
            human_cost=human_cost, wall_ms=wall_ms)
        rec._audit = (audit_checks, audit_violations)
        return rec

    @staticmethod
    def _sample_domain(bundle, s, a, rng):
        succ, probs = bundle.ssp.transition_row(s, a)
        return int(succ[int(rng.choice(len(succ), p=probs))])


def run_experiment(bundle, cfg: ExperimentConfig) -> ExperimentResult:
    """Run trials x episodes; returns all records plus the audit tally."""
    if cfg.task == "random" and (bundle.retask is None
                                 or len(bundle.task_states) < 2):
        raise ValueError("domain does not support random tasks")
    flat_cache, chi_cache = {}, {}
    runner = _EpisodeRunner(bundle, cfg, flat_cache, chi_cache)
    result = ExperimentResult(records=[], events=[])
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    for trial in range(cfg.trials):
        rng = np.random.default_rng(seeds[trial])
        state = TrialState(bundle, cfg)
        for episode in range(cfg.episodes):
            ep_bundle = bundle
            if cfg.task == "random":
                pool = bundle.task_states
                i = int(rng.choice(len(pool)))
                j = int(rng.choice(len(pool) - 1))
                j = j + 1 if j >= i else j
                ep_bundle = bundle.retask(pool[i], pool[j])
            rec = runner.run(ep_bundle, state, trial, episode, rng,
                             result.events)
            checks, violations = rec._audit
            result.audit_checks += checks
            result.audit_violations += violations
            result.records.append(rec)
    return result


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.row())


def write_events(events, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "episode", "step", "kind", "state",
                         "action", "level"])
        for row in events:
            writer.writerow(row)


def write_summary(records, path):
    """Per-episode across-trial mean and standard error for each metric."""
    episodes = sorted({r.episode for r in records})
    metric_cols = CSV_COLUMNS[2:]
    columns = {c: {"mean": [], "se": []} for c in metric_cols}
    by_episode = {}
    for r in records:
        by_episode.setdefault(r.episode, []).append(r)
    for ep in episodes:
        recs = by_episode[ep]
        for c in metric_cols:
            vals = np.array([getattr(r, c) for r in recs], dtype=float)
            vals = vals[~np.isnan(vals)]
            if vals.size == 0:
                mean, se = None, None
            else:
                mean = float(vals.mean())
                se = float(vals.std(ddof=1) / np.sqrt(vals.size)) \
                    if vals.size > 1 else 0.0
            columns[c]["mean"].append(mean)
            columns[c]["se"].append(se)
    payload = {"episodes": episodes,
               "trials": len({r.trial for r in records}),
               "columns": columns}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
