"""Softmax level proposals, gate handling, and autonomy-profile growth."""

import numpy as np
import pytest

from casplan.cas import AutonomyProfile
from casplan.exploration import (ExplorationConfig, ExplorationState,
                                 propose_level, update_autonomy_profile)
from casplan.oracle import answer_gate_query
from conftest import two_state_bundle


def test_config_validation():
    with pytest.raises(ValueError):
        ExplorationConfig(temperature=0.0)
    with pytest.raises(ValueError):
        ExplorationConfig(p_explore=1.5)
    ExplorationConfig()  # defaults are valid


def test_softmax_equal_q_is_uniform():
    rng = np.random.default_rng(0)
    picks = [propose_level(0, [1, 2], {1: 3.0, 2: 3.0}, 1.0, rng)
             for _ in range(10_000)]
    assert picks.count(1) / len(picks) == pytest.approx(0.5, abs=0.02)


def test_softmax_known_probabilities():
    # q = (1, 3), T = 1: P = (e^-1, e^-3) normalized = (0.881, 0.119)
    rng = np.random.default_rng(1)
    picks = [propose_level(0, [1, 2], {1: 1.0, 2: 3.0}, 1.0, rng)
             for _ in range(20_000)]
    assert picks.count(1) / len(picks) == pytest.approx(0.881, abs=0.01)


def test_softmax_zero_temperature_limit_is_argmin():
    rng = np.random.default_rng(2)
    picks = {propose_level(0, [1, 2, 3], {1: 5.0, 2: 1.0, 3: 5.0}, 1e-6, rng)
             for _ in range(200)}
    assert picks == {2}


def test_softmax_rejects_bad_input():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        propose_level(0, [], {}, 1.0, rng)
    with pytest.raises(ValueError):
        propose_level(0, [1], {1: float("inf")}, 1.0, rng)


def test_approval_broadcasts_across_bucket():
    kappa = AutonomyProfile(4, default=frozenset({0, 1}))
    state = ExplorationState()
    pairs = [(0, 0), (3, 0), (7, 0)]
    grew = update_autonomy_profile(kappa, pairs, 2, True, state, ("b",), 0, 10)
    assert grew
    for s, a in pairs:
        assert 2 in kappa.allowed(s, a)
    # untouched pairs keep the default
    assert kappa.allowed(9, 0) == frozenset({0, 1})


def test_approval_is_idempotent():
    kappa = AutonomyProfile(4, default=frozenset({0, 1}))
    state = ExplorationState()
    assert update_autonomy_profile(kappa, [(0, 0)], 2, True, state,
                                   ("b",), 0, 10)
    assert not update_autonomy_profile(kappa, [(0, 0)], 2, True, state,
                                       ("b",), 0, 10)


def test_denial_embargoes_for_cooldown():
    kappa = AutonomyProfile(4, default=frozenset({0, 1}))
    state = ExplorationState()
    grew = update_autonomy_profile(kappa, [(0, 0)], 3, False, state,
                                   ("b",), episode=5, cooldown=10)
    assert not grew
    assert 3 not in kappa.allowed(0, 0)
    assert state.denials[(("b",), 3)] == 1
    assert state.embargoed(("b",), 3, episode=5)
    assert state.embargoed(("b",), 3, episode=14)
    assert not state.embargoed(("b",), 3, episode=15)
    # other levels in the same bucket are unaffected
    assert not state.embargoed(("b",), 2, episode=5)


def test_kappa_growth_is_monotone():
    kappa = AutonomyProfile(4, default=frozenset({0}))
    state = ExplorationState()
    before = {(s, a): kappa.allowed(s, a) for s in range(3) for a in range(1)}
    for rank in (1, 2, 3):
        update_autonomy_profile(kappa, [(1, 0)], rank, True, state,
                                ("b",), 0, 10)
        for key, old in before.items():
            assert old <= kappa.allowed(*key)
            before[key] = kappa.allowed(*key)


def test_kappa_stays_inside_kappa_h_when_human_is_consistent():
    # with epsilon = 0 every approval comes from kappa_h, so kappa can
    # never outgrow the union of kappa0 and the human's allowance
    bundle = two_state_bundle(kappa0=(0, 1), kappa_h=(0, 1, 2))
    rng = np.random.default_rng(6)
    kappa = bundle.fresh_kappa()
    state = ExplorationState()
    for episode in range(50):
        for rank in (2, 3):
            ok = answer_gate_query(bundle.oracle, 0, 0, rank, rng)
            update_autonomy_profile(kappa, [(0, 0)], rank, ok, state,
                                    ("b",), episode, 10)
    assert kappa.allowed(0, 0) <= (frozenset({0, 1})
                                   | bundle.oracle.kappa_h(0, 0))
    assert kappa.allowed(0, 0) == frozenset({0, 1, 2})
