"""Campus delivery gridworld.

A delivery robot navigates an ASCII campus map. Doors and crosswalks are
obstacle cells whose autonomous traversal may fail and where the human's
feedback habits depend on features the robot cannot observe (door
mechanism, crosswalk visibility).
"""

from __future__ import annotations

from ..cas import (AutonomyCost, AutonomyProfile, FeedbackProfile, HumanCost,
                   HumanTransition, LevelSet, Signal)
from ..feedback import FeatureProjection
from ..oracle import OracleSpec
from ..ssp import SSP
from .bundle import ConfigError, DomainBundle

ACTIONS = ["N", "S", "E", "W"]
DELTAS = {0: (-1, 0), 1: (1, 0), 2: (0, 1), 3: (0, -1)}
IMPASSABLE = {"#", "R"}
N_LEVELS = 4


def _parse_grid(cfg: dict):
    grid = [line for line in cfg["map"].splitlines() if line]
    if not grid or any(len(row) != len(grid[0]) for row in grid):
        raise ConfigError("map must be a non-empty rectangular grid")
    known = IMPASSABLE | {".", "P", "r"} | set(cfg.get("doors", {})) \
        | set(cfg.get("crosswalks", {}))
    for r, row in enumerate(grid):
        for c, ch in enumerate(row):
            if ch not in known:
                raise ConfigError(f"unknown map character {ch!r} at ({r}, {c})")
            edge = r in (0, len(grid) - 1) or c in (0, len(row) - 1)
            if edge and ch not in IMPASSABLE:
                raise ConfigError("map border must be impassable")
    return grid


def _check_bucket_uniformity(cfg: dict):
    """Doors sharing an agent-visible bucket must share hidden attributes
    that drive the human's permission set."""
    seen: dict = {}
    for ch, attrs in cfg.get("doors", {}).items():
        key = (attrs["building"], attrs["color"])
        mech = attrs["mechanism"]
        if seen.setdefault(key, mech) != mech:
            raise ConfigError(
                f"doors with bucket {key} mix mechanisms; feedback "
                "generalization requires one mechanism per (building, color)")


def build_campus(cfg: dict, start=None, goal=None) -> DomainBundle:
    if cfg.get("domain") != "campus":
        raise ConfigError("config is not a campus domain")
    grid = _parse_grid(cfg)
    _check_bucket_uniformity(cfg)
    doors = cfg.get("doors", {})
    crosswalks = cfg.get("crosswalks", {})

    cells = [(r, c) for r, row in enumerate(grid)
             for c, ch in enumerate(row) if ch not in IMPASSABLE]
    sid = {cell: i for i, cell in enumerate(cells)}
    n_states, n_actions = len(cells), len(ACTIONS)

    def char(cell):
        return grid[cell[0]][cell[1]]

    def locate(key):
        cell = tuple(cfg[key])
        if cell not in sid:
            raise ConfigError(f"{key} cell {cell} is not passable")
        return sid[cell]

    start = locate("start") if start is None else int(start)
    goal = locate("goal") if goal is None else int(goal)
    if start == goal:
        raise ConfigError("start and goal must differ")

    def success_prob(cell) -> float:
        ch = char(cell)
        if ch in doors:
            return float(cfg["door_success"][doors[ch]["mechanism"]])
        if ch in crosswalks:
            return float(cfg["traffic_success"][crosswalks[ch]["traffic"]])
        return 1.0

    transitions, tau_rows = {}, {}
    for (r, c), s in sid.items():
        for a, (dr, dc) in DELTAS.items():
            target = (r + dr, c + dc)
            if s == goal:
                transitions[(s, a)] = {s: 1.0}
                tau_rows[(s, a)] = {s: 1.0}
            elif target not in sid:
                transitions[(s, a)] = {s: 1.0}
                tau_rows[(s, a)] = {s: 1.0}
            else:
                p = success_prob((r, c))
                t = sid[target]
                row = {t: p}
                if p < 1.0:
                    row[s] = 1.0 - p
                transitions[(s, a)] = row
                tau_rows[(s, a)] = {t: 1.0}

    move = float(cfg["costs"]["move"])
    costs = [0.0 if s == goal else move
             for s in range(n_states) for _ in range(n_actions)]
    ssp = SSP(n_states, n_actions, transitions, costs, start, goal)
    tau = HumanTransition(tau_rows)

    # agent-visible and hidden feature buckets
    def agent_bucket(s, a):
        ch = char(cells[s])
        if ch in doors:
            d = doors[ch]
            return ("door", d["building"], d["color"])
        if ch in crosswalks:
            return ("cw", crosswalks[ch]["traffic"])
        return ("free",)

    def hidden_bucket(s, a):
        ch = char(cells[s])
        if ch in doors:
            d = doors[ch]
            return ("door", d["building"], d["color"], d["mechanism"])
        if ch in crosswalks:
            cw = crosswalks[ch]
            return ("cw", cw["traffic"], cw["visibility"])
        return ("free",)

    # ground-truth feedback profile over hidden buckets
    human = cfg["human"]
    levels = LevelSet.standard()
    hidden_dists = {("free",): (human["free_approve"], human["free_override"])}
    for d in doors.values():
        mech = d["mechanism"]
        hidden_dists[("door", d["building"], d["color"], mech)] = (
            human["door_approve"][mech], human["door_override"][mech])
    for cw in crosswalks.values():
        traffic, vis = cw["traffic"], cw["visibility"]
        hidden_dists[("cw", traffic, vis)] = (
            human["crosswalk_approve"][traffic][vis],
            human["crosswalk_override"][traffic][vis])
    table = {}
    for bucket, (approve, override) in hidden_dists.items():
        for a in range(n_actions):
            table[(bucket, a, 1)] = {Signal.APPROVE: approve,
                                     Signal.DISAPPROVE: 1.0 - approve}
            table[(bucket, a, 2)] = {Signal.NONE: 1.0 - override,
                                     Signal.OVERRIDE: override}
    true_lambda = FeedbackProfile(levels, table, allow_default=False)

    kh = human["kappa_h"]

    def kappa_h(s, a):
        ch = char(cells[s])
        if ch in doors:
            return frozenset(kh["door"][doors[ch]["mechanism"]])
        if ch in crosswalks:
            return frozenset(kh["crosswalk"][crosswalks[ch]["traffic"]])
        return frozenset(kh["free"])

    oracle = OracleSpec(levels=levels, true_lambda=true_lambda,
                        hidden_project=hidden_bucket, kappa_h=kappa_h,
                        tau=tau, epsilon=float(human.get("epsilon", 0.0)))

    # interruption cost per step, by cell class
    rho_cfg = cfg["costs"]["rho"]
    rho_over = {}
    for s in range(n_states):
        ch = char(cells[s])
        key = "door" if ch in doors else "crosswalk" if ch in crosswalks else None
        if key is not None:
            for a in range(n_actions):
                for rank, v in enumerate(rho_cfg[key]):
                    rho_over[(s, a, rank)] = float(v)
    rho = HumanCost(per_level=dict(enumerate(map(float, rho_cfg["free"]))),
                    overrides=rho_over, top_rank=N_LEVELS - 1)
    mu = AutonomyCost(op_cost={l: 0.0 for l in range(N_LEVELS)},
                      switch_coeff=float(cfg["costs"]["mu_switch"]))
    k0 = cfg["kappa0"]
    obstacle_levels = frozenset(k0["obstacle"])
    k0_over = {(s, a): obstacle_levels for s in range(n_states)
               if char(cells[s]) in doors or char(cells[s]) in crosswalks
               for a in range(n_actions)}
    kappa0 = AutonomyProfile(N_LEVELS, default=frozenset(k0["free"]),
                             overrides=k0_over)

    def retask(new_start, new_goal):
        return build_campus(cfg, start=new_start, goal=new_goal)

    return DomainBundle(
        name="campus", ssp=ssp, levels=levels, kappa0=kappa0, mu=mu, rho=rho,
        tau=tau, weights=tuple(cfg.get("weights", (1.0, 1.0, 1.0))),
        start_level=int(cfg.get("start_level", 0)),
        projection=FeatureProjection(agent_bucket), oracle=oracle,
        state_names=[f"r{r}c{c}" for r, c in cells], action_names=ACTIONS,
        task_states=[sid[cell] for cell in cells if char(cell) == "r"],
        retask=retask)
