"""Shared fixtures: small SSPs and a configurable two-state CAS."""

import numpy as np
import pytest

from casplan.cas import (CAS, AutonomyCost, AutonomyProfile, FeedbackProfile,
                         HumanCost, HumanTransition, LevelSet, Signal)
from casplan.domains.bundle import DomainBundle
from casplan.feedback import FeatureProjection
from casplan.oracle import OracleSpec
from casplan.ssp import SSP


def line_ssp(n=3, cost=1.0):
    """Deterministic chain s0 -> s1 -> ... -> goal, one action."""
    transitions = {(s, 0): {min(s + 1, n - 1): 1.0} for s in range(n)}
    transitions[(n - 1, 0)] = {n - 1: 1.0}
    costs = [cost if s != n - 1 else 0.0 for s in range(n)]
    return SSP(n, 1, transitions, costs, 0, n - 1)


def coin_ssp(p=0.5, cost=1.0):
    """Two states: the action reaches the goal w.p. p, else self-loops."""
    transitions = {(0, 0): {1: p, 0: 1.0 - p}, (1, 0): {1: 1.0}}
    return SSP(2, 1, transitions, [cost, 0.0], 0, 1)


def random_ssp(rng, max_states=6, max_actions=3):
    """Random valid SSP; every row leaks a little mass toward the goal."""
    n = int(rng.integers(2, max_states + 1))
    na = int(rng.integers(1, max_actions + 1))
    goal = n - 1
    transitions = {}
    for s in range(n):
        for a in range(na):
            if s == goal:
                transitions[(s, a)] = {goal: 1.0}
                continue
            row = rng.dirichlet(np.ones(n)) * 0.9
            row[goal] += 0.1
            transitions[(s, a)] = {s2: float(p) for s2, p in enumerate(row)
                                   if p > 0}
    costs = [0.0 if s == goal else float(rng.uniform(0.5, 2.0))
             for s in range(n) for _ in range(na)]
    return SSP(n, na, transitions, costs, 0, goal)


def two_state_cas(t_success=0.4, lam_table=None, kappa_default=(0, 1, 2, 3),
                  rho=(3.0, 0.3, 0.4, 0.0), mu_switch=0.0,
                  weights=(1.0, 1.0, 1.0)):
    """One non-goal state; the action reaches the goal w.p. t_success.

    The human takeover completes the step deterministically. Default
    lambda table makes supervised (l2) the competent level: overrides
    rescue most of the autonomous failure risk.
    """
    levels = LevelSet.standard()
    ssp = coin_ssp(p=t_success)
    tau = HumanTransition({(0, 0): {1: 1.0}, (1, 0): {1: 1.0}})
    if lam_table is None:
        lam_table = {
            (("b",), 0, 1): {Signal.APPROVE: 0.9, Signal.DISAPPROVE: 0.1},
            (("b",), 0, 2): {Signal.NONE: 0.2, Signal.OVERRIDE: 0.8},
        }
    lam = FeedbackProfile(levels, lam_table)
    kappa = AutonomyProfile(4, default=frozenset(kappa_default))
    return CAS(domain=ssp, levels=levels, kappa=kappa,
               mu=AutonomyCost(op_cost={}, switch_coeff=mu_switch),
               lam=lam,
               rho=HumanCost(per_level=dict(enumerate(rho)), top_rank=3),
               tau=tau, project=lambda s, a: ("b",), weights=weights)


def two_state_bundle(kappa0=(0, 1), kappa_h=(0, 1, 2), **cas_kwargs):
    """Wrap the two-state CAS as a domain bundle for harness runs."""
    cas = two_state_cas(**cas_kwargs)
    projection = FeatureProjection(lambda s, a: ("b",))
    oracle = OracleSpec(levels=cas.levels, true_lambda=cas.lam,
                        hidden_project=lambda s, a: ("b",),
                        kappa_h=lambda s, a: frozenset(kappa_h),
                        tau=cas.tau, epsilon=0.0)
    return DomainBundle(
        name="two-state", ssp=cas.domain, levels=cas.levels,
        kappa0=AutonomyProfile(4, default=frozenset(kappa0)),
        mu=cas.mu, rho=cas.rho, tau=cas.tau, weights=cas.weights,
        start_level=0, projection=projection, oracle=oracle,
        state_names=["s0", "goal"], action_names=["go"],
        task_states=[0], retask=None)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
