"""Domain builders: config validation, bucket structure, model soundness."""

import copy

import numpy as np
import pytest

from casplan.cas import Signal, cas_transition_row
from casplan.domains import (ConfigError, build_av, build_campus, load_config)


@pytest.fixture(scope="module")
def campus_cfg():
    return load_config(domain="campus")


@pytest.fixture(scope="module")
def av_cfg():
    return load_config(domain="av")


@pytest.fixture(scope="module")
def campus(campus_cfg):
    return build_campus(campus_cfg)


@pytest.fixture(scope="module")
def av(av_cfg):
    return build_av(av_cfg)


# -- config loading -----------------------------------------------------------

def test_load_config_requires_path_or_domain():
    with pytest.raises(ConfigError):
        load_config()


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config(path="/nonexistent/campus.yaml")


def test_load_config_rejects_non_mapping(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(path=str(p))


def test_load_config_rejects_invalid_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("domain: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(path=str(p))


def test_builders_check_domain_key(campus_cfg, av_cfg):
    with pytest.raises(ConfigError):
        build_campus(av_cfg)
    with pytest.raises(ConfigError):
        build_av(campus_cfg)


# -- campus -------------------------------------------------------------------

def test_campus_ssp_is_valid(campus):
    # SSP validation ran at construction; sanity-check the shape
    ssp = campus.ssp
    assert ssp.n_actions == 4
    sums = np.asarray(ssp.matrix.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums, 1.0, atol=1e-9)


def test_campus_kappa0_matches_config(campus, campus_cfg):
    free = frozenset(campus_cfg["kappa0"]["free"])
    obstacle = frozenset(campus_cfg["kappa0"]["obstacle"])
    assert campus.kappa0.default == free
    door_buckets = {b for b in campus.bucket_members() if b[0] == "door"}
    assert door_buckets  # the map has doors
    for bucket, members in campus.bucket_members().items():
        want = free if bucket == ("free",) else obstacle
        for s, a in members:
            assert campus.kappa0.allowed(s, a) == want


def test_campus_bucket_structure(campus):
    buckets = set(campus.bucket_members())
    assert ("free",) in buckets
    assert ("cw", "light") in buckets
    # doors are keyed by (building, color) only; mechanism stays hidden
    assert all(len(b) == 3 for b in buckets if b[0] == "door")


def test_campus_mixed_visibility_crosswalk_bucket(campus):
    # both crosswalks are light-traffic but differ in hidden visibility,
    # so the projected profile mixes their true approval rates
    lam = campus.reference_lambda()
    members = campus.bucket_members()[("cw", "light")]
    hidden = {campus.oracle.hidden_project(s, a) for s, a in members}
    assert hidden == {("cw", "light", "poor"), ("cw", "light", "good")}
    approve = lam.dist(("cw", "light"), 0, 1)[Signal.APPROVE]
    assert approve == pytest.approx((0.95 + 0.5) / 2)


def test_campus_composed_rows_stochastic(campus):
    lam = campus.reference_lambda()
    cas = campus.make_cas(lam)
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = int(rng.integers(campus.ssp.n_states))
        a = int(rng.integers(campus.ssp.n_actions))
        level = int(rng.integers(4))
        row = cas_transition_row(cas, s, a, level)
        assert sum(row.values()) == pytest.approx(1.0, abs=1e-9)


def test_campus_retask(campus):
    assert len(campus.task_states) > 2
    alt = campus.retask(campus.task_states[0], campus.task_states[-1])
    assert alt.ssp.start == campus.task_states[0]
    assert alt.ssp.goal == campus.task_states[-1]


def test_campus_rejects_ragged_map(campus_cfg):
    cfg = copy.deepcopy(campus_cfg)
    cfg["map"] = "####\n#..#\n###\n"
    with pytest.raises(ConfigError):
        build_campus(cfg)


def test_campus_rejects_unknown_map_character(campus_cfg):
    cfg = copy.deepcopy(campus_cfg)
    cfg["map"] = cfg["map"].replace(".", "?", 1)
    with pytest.raises(ConfigError):
        build_campus(cfg)


def test_campus_rejects_open_border(campus_cfg):
    cfg = copy.deepcopy(campus_cfg)
    lines = cfg["map"].splitlines()
    lines[0] = "." + lines[0][1:]
    cfg["map"] = "\n".join(lines) + "\n"
    with pytest.raises(ConfigError):
        build_campus(cfg)


def test_campus_rejects_mixed_mechanism_bucket(campus_cfg):
    # two doors sharing (building, color) must share a mechanism,
    # otherwise feedback generalization would blend distinct humans
    cfg = copy.deepcopy(campus_cfg)
    cfg["doors"]["6"] = dict(cfg["doors"]["6"], mechanism="pull")
    with pytest.raises(ConfigError):
        build_campus(cfg)


def test_campus_rejects_impassable_start(campus_cfg):
    cfg = copy.deepcopy(campus_cfg)
    cfg["start"] = [0, 0]
    with pytest.raises(ConfigError):
        build_campus(cfg)


# -- av -----------------------------------------------------------------------

def test_av_ssp_is_valid(av):
    sums = np.asarray(av.ssp.matrix.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums, 1.0, atol=1e-9)
    assert av.ssp.n_actions == 3


def test_av_kappa0_matches_config(av, av_cfg):
    k0 = av_cfg["kappa0"]
    assert av.kappa0.default == frozenset(k0["default"])
    by_name = {name: i for i, name in enumerate(av.state_names)}
    stop = by_name["stop-none-0"]
    for a in range(3):
        assert av.kappa0.allowed(stop, a) == frozenset(k0["stop"])


def test_av_lane_cells_share_bucket(av):
    buckets = {b for b in av.bucket_members() if b[0] == "lane"}
    assert buckets  # lanes exist and project to a merged "lane" key
    for bucket in buckets:
        members = av.bucket_members()[bucket]
        positions = {av.state_names[s].split("-")[0] for s, _ in members}
        assert positions <= {"lane1", "lane2"}


def test_av_rear_flag_hidden_from_agent(av):
    # the agent bucket ignores the rear flag; the oracle conditions on it
    pairs = [(s, a) for s, a in av.pairs
             if av.state_names[s].startswith("edge-close")]
    agent = {av.projection(s, a) for s, a in pairs}
    hidden = {av.oracle.hidden_project(s, a) for s, a in pairs}
    assert len(agent) < len(hidden)


def test_av_fixed_task(av):
    with pytest.raises(ConfigError):
        build_av(load_config(domain="av"), start=1)


def test_av_moving_obstacle_variant_builds(av_cfg):
    cfg = copy.deepcopy(av_cfg)
    cfg["obstacle"] = {"kind": "moving", "clear_prob": 0.2}
    moving = build_av(cfg)
    assert "cleared-none-0" in moving.state_names
    # the stopped variant has no cleared state
    stopped = build_av(copy.deepcopy(av_cfg))
    assert "cleared-none-0" not in stopped.state_names
    # clearing probability shows up on the behind-state rows
    by_name = {name: i for i, name in enumerate(moving.state_names)}
    behind, cleared = by_name["behind-unknown-0"], by_name["cleared-none-0"]
    assert moving.ssp.transition(behind, 0, cleared) == pytest.approx(0.2)
