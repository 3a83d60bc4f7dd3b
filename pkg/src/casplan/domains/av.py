"""Autonomous vehicle passing a stopped obstacle against oncoming traffic.

States (position, oncoming, rear) are enumerated by forward search from
the start under the union of the autonomous and human-takeover dynamics.
Crashing is modeled as a high-cost detour to the goal so the problem stays
a valid SSP.
"""

from __future__ import annotations

from ..cas import (AutonomyCost, AutonomyProfile, FeedbackProfile, HumanCost,
                   HumanTransition, LevelSet, Signal)
from ..feedback import FeatureProjection
from ..oracle import OracleSpec
from ..ssp import SSP
from .bundle import ConfigError, DomainBundle

ACTIONS = ["wait", "forward", "back"]
WAIT, FORWARD, BACK = 0, 1, 2
LANES = ("lane1", "lane2")
N_LEVELS = 4

_AHEAD = {"behind": "edge", "edge": "lane1", "lane1": "lane2", "lane2": "past"}
_BEHIND = {"edge": "behind", "lane1": "edge", "lane2": "lane1"}

START = ("behind", "unknown", 0)
STOP = ("stop", "none", 0)
CRASH = ("crash", "none", 0)
PAST = ("past", "none", 0)
CLEARED = ("cleared", "none", 0)


def _clear_prob(cfg) -> float:
    """Chance per step that a moving obstacle drives on (0 when stopped)."""
    obstacle = cfg.get("obstacle", {})
    if obstacle.get("kind", "stopped") == "stopped":
        return 0.0
    return float(obstacle["clear_prob"])


def _feature_dist(cfg, next_pos, onc, rear, entering):
    """Joint successor distribution over (oncoming, rear) at next_pos."""
    if next_pos == "behind":
        return {("unknown", 0): 1.0}
    if next_pos in ("stop", "crash", "past"):
        return {("none", 0): 1.0}
    onc_dist = cfg["obs_dist"] if entering else cfg["evolve"][onc]
    ra = float(cfg["rear_appear"])
    rear_dist = {1: 1.0} if rear else {0: 1.0 - ra, 1: ra}
    return {(o, r): po * pr for o, po in onc_dist.items()
            for r, pr in rear_dist.items()}


def _intended_pos(pos, action, rear):
    if action == FORWARD:
        return _AHEAD[pos]
    if action == BACK and rear == 0 and pos in _BEHIND:
        return _BEHIND[pos]
    return pos


def _transition(cfg, state):
    """Autonomous rows: action -> {successor state: prob}."""
    pos, onc, rear = state
    clear = _clear_prob(cfg)
    rows = {}
    for a in range(len(ACTIONS)):
        if pos == "past":
            rows[a] = {PAST: 1.0}
        elif pos == "crash":
            rows[a] = {PAST: 1.0}
        elif pos == "cleared":
            rows[a] = {PAST: 1.0} if a == FORWARD else {CLEARED: 1.0}
        elif pos == "stop":
            sr = float(cfg["stop_recover"])
            rows[a] = ({PAST: sr, STOP: 1.0 - sr} if a == FORWARD
                       else {STOP: 1.0})
        elif pos in ("behind", "edge") and clear > 0.0:
            sub = _transition(dict(cfg, obstacle={"kind": "stopped"}),
                              state)[a]
            rows[a] = {CLEARED: clear}
            for s2, p in sub.items():
                rows[a][s2] = rows[a].get(s2, 0.0) + (1.0 - clear) * p
        else:
            row, residual = {}, 1.0
            if pos in LANES and onc == "close":
                p = float(cfg["crash_in_lane_close"])
                row[CRASH] = p
                residual -= p
            nxt = _intended_pos(pos, a, rear)
            if pos == "edge" and a == FORWARD and onc == "close":
                p = residual * float(cfg["crash_enter_lane_close"])
                row[CRASH] = row.get(CRASH, 0.0) + p
                residual -= p
            entering = pos == "behind" and nxt == "edge"
            for feats, p in _feature_dist(cfg, nxt, onc, rear, entering).items():
                succ = (nxt, *feats) if nxt not in ("stop", "crash", "past") \
                    else {"stop": STOP, "crash": CRASH, "past": PAST}[nxt]
                row[succ] = row.get(succ, 0.0) + residual * p
            rows[a] = row
    return rows


def _takeover(cfg, state):
    """Human-takeover rows: the human never crashes. Caught in the lane
    with oncoming traffic, the human completes the pass; asked to enter
    against oncoming traffic, the human refuses and pulls over."""
    pos, onc, rear = state
    rows = {}
    for a in range(len(ACTIONS)):
        if pos == "past":
            rows[a] = {PAST: 1.0}
        elif pos in ("crash", "stop", "cleared"):
            rows[a] = {PAST: 1.0}
        elif pos in LANES and onc in ("close", "far"):
            rows[a] = {PAST: 1.0}
        elif pos == "edge" and a == FORWARD and onc in ("close", "far"):
            rows[a] = {STOP: 1.0}
        else:
            nxt = _intended_pos(pos, a, rear)
            entering = pos == "behind" and nxt == "edge"
            row = {}
            for feats, p in _feature_dist(cfg, nxt, onc, rear, entering).items():
                succ = (nxt, *feats) if nxt not in ("stop", "crash", "past") \
                    else {"stop": STOP, "crash": CRASH, "past": PAST}[nxt]
                row[succ] = row.get(succ, 0.0) + p
            rows[a] = row
    return rows


def build_av(cfg: dict, start=None, goal=None) -> DomainBundle:
    if cfg.get("domain") != "av":
        raise ConfigError("config is not an av domain")
    if start is not None or goal is not None:
        raise ConfigError("the av domain has a fixed start and goal")

    # enumerate reachable states under either control regime
    states, frontier = [], [START]
    seen = {START}
    trans_rows, tau_named = {}, {}
    while frontier:
        s = frontier.pop()
        states.append(s)
        trans_rows[s] = _transition(cfg, s)
        tau_named[s] = _takeover(cfg, s)
        for rows in (trans_rows[s], tau_named[s]):
            for row in rows.values():
                for s2 in row:
                    if s2 not in seen:
                        seen.add(s2)
                        frontier.append(s2)
    states.sort(key=lambda st: (st[0], st[1], st[2]))
    sid = {s: i for i, s in enumerate(states)}
    n_states, n_actions = len(states), len(ACTIONS)
    start_id, goal_id = sid[START], sid[PAST]

    transitions, tau_rows = {}, {}
    for s, rows in trans_rows.items():
        for a, row in rows.items():
            transitions[(sid[s], a)] = {sid[s2]: p for s2, p in row.items()}
            tau_rows[(sid[s], a)] = {sid[s2]: p
                                     for s2, p in tau_named[s][a].items()}

    move, crash_cost = float(cfg["costs"]["move"]), float(cfg["costs"]["crash"])
    costs = []
    for s in states:
        step = 0.0 if s == PAST else crash_cost if s == CRASH else move
        costs.extend([step] * n_actions)
    ssp = SSP(n_states, n_actions, transitions, costs, start_id, goal_id)
    tau = HumanTransition(tau_rows)

    def agent_bucket(s, a):
        # both lane cells share feedback statistics and permissions
        pos, onc, _rear = states[s]
        return ("lane" if pos in LANES else pos, onc)

    def hidden_bucket(s, a):
        return states[s]

    # ground-truth feedback profile over hidden (pos, oncoming, rear) buckets
    human = cfg["human"]
    levels = LevelSet.standard()
    table = {}
    for pos, onc, rear in states:
        if pos == "past":
            continue
        for a, name in enumerate(ACTIONS):
            if pos in ("stop", "crash"):
                approve = float(human["special"][pos]["approve"])
                override = float(human["special"][pos]["override"])
            else:
                approve = float(human["approve"][name][onc])
                override = float(human["override"][name][onc])
                if rear and pos != "behind":
                    override = min(
                        1.0, override + float(human["rear_override_boost"][name]))
            key = (pos, onc, rear)
            table[(key, a, 1)] = {Signal.APPROVE: approve,
                                  Signal.DISAPPROVE: 1.0 - approve}
            table[(key, a, 2)] = {Signal.NONE: 1.0 - override,
                                  Signal.OVERRIDE: override}
    true_lambda = FeedbackProfile(levels, table, allow_default=False)

    kh = human["kappa_h"]

    def kappa_h(s, a):
        pos, onc, _rear = states[s]
        if pos == "stop":
            return frozenset(kh["stop"])
        if pos == "edge" and onc == "close":
            return frozenset(kh["edge_close"])
        if pos in LANES and onc == "close":
            return frozenset(kh["lane_close"])
        return frozenset(kh["default"])

    oracle = OracleSpec(levels=levels, true_lambda=true_lambda,
                        hidden_project=hidden_bucket, kappa_h=kappa_h,
                        tau=tau, epsilon=float(human.get("epsilon", 0.0)))

    k0 = cfg["kappa0"]
    overrides = {}
    for s, (pos, _onc, _rear) in enumerate(states):
        key = "lane" if pos in LANES else pos if pos in ("stop", "crash") else None
        if key is not None:
            for a in range(n_actions):
                overrides[(s, a)] = frozenset(k0[key])
    kappa0 = AutonomyProfile(N_LEVELS, default=frozenset(k0["default"]),
                             overrides=overrides)

    rho = HumanCost(per_level=dict(enumerate(map(float, cfg["costs"]["rho"]))),
                    top_rank=N_LEVELS - 1)
    mu = AutonomyCost(op_cost={l: 0.0 for l in range(N_LEVELS)},
                      switch_coeff=float(cfg["costs"]["mu_switch"]))

    return DomainBundle(
        name="av", ssp=ssp, levels=levels, kappa0=kappa0, mu=mu, rho=rho,
        tau=tau, weights=tuple(cfg.get("weights", (1.0, 1.0, 1.0))),
        start_level=int(cfg.get("start_level", 0)),
        projection=FeatureProjection(agent_bucket), oracle=oracle,
        state_names=["-".join(map(str, s)) for s in states],
        action_names=ACTIONS, task_states=[start_id], retask=None)
