"""Human-readable structured-text dumps of model state.

Schema (one record per line, sections in square brackets):

    [kappa]
    default = 0,1
    state=<state> action=<action> levels=<comma-separated ranks>

    [lambda]
    bucket=<bucket> action=<action> level=<rank> n=<updates> \
p(<signal>)=<posterior mean> ...

    [policy]
    state=<state> level_prev=<rank> -> action=<action> level=<rank>

    [competence]
    state=<state> level_prev=<rank> action=<action> chi=<rank>

State and action fields use the supplied display names, falling back to
raw indices. The [lambda] section doubles as the count-store dump: the
`n=` field plus per-signal posterior means, with the raw counts available
through `FeedbackCounts.to_dict` for exact JSON round-trips.
"""

from __future__ import annotations

from .cas import AutonomyProfile, Competence
from .feedback import FeedbackCounts


def _name(names, i):
    return names[i] if names is not None else str(i)


def _fmt_bucket(bucket):
    if isinstance(bucket, tuple):
        return "/".join(map(str, bucket))
    return str(bucket)


def dump_kappa(kappa: AutonomyProfile, state_names=None,
               action_names=None) -> str:
    lines = ["[kappa]",
             "default = " + ",".join(map(str, sorted(kappa.default)))]
    for (s, a), levels in sorted(kappa.items()):
        lines.append(f"state={_name(state_names, s)} "
                     f"action={_name(action_names, a)} "
                     f"levels={','.join(map(str, sorted(levels)))}")
    return "\n".join(lines)


def dump_lambda(counts: FeedbackCounts, action_names=None) -> str:
    lines = ["[lambda]"]
    for bucket, action, rank in sorted(counts.counts, key=str):
        mean = counts.posterior_mean(bucket, action, rank)
        probs = " ".join(f"p({sig.value})={p:.4f}"
                         for sig, p in sorted(mean.items(),
                                              key=lambda kv: kv[0].value))
        lines.append(f"bucket={_fmt_bucket(bucket)} "
                     f"action={_name(action_names, action)} level={rank} "
                     f"n={counts.updates(bucket, action, rank)} {probs}")
    return "\n".join(lines)


def dump_policy(policy, index, state_names=None, action_names=None) -> str:
    lines = ["[policy]"]
    for sbar in range(index.n_sbar):
        if sbar == index.goal:
            continue
        s, l_prev = index.split_sbar(sbar)
        a, l = index.split_abar(int(policy[sbar]))
        lines.append(f"state={_name(state_names, s)} level_prev={l_prev} "
                     f"-> action={_name(action_names, a)} level={l}")
    return "\n".join(lines)


def dump_competence(comp: Competence, state_names=None,
                    action_names=None) -> str:
    """One chi line per (domain state, previous level, action). The switch
    component of mu can make chi depend on the level currently in force,
    so rows are not collapsed over it."""
    idx = comp.index
    lines = ["[competence]"]
    for s in idx.domain_states:
        for l_prev in range(idx.nl):
            row = comp.chi[idx.sbar(s, l_prev)]
            for a in range(idx.na):
                lines.append(f"state={_name(state_names, s)} "
                             f"level_prev={l_prev} "
                             f"action={_name(action_names, a)} "
                             f"chi={int(row[a])}")
    return "\n".join(lines)


def dump_model(kappa=None, counts=None, policy=None, index=None,
               comp=None, state_names=None, action_names=None) -> str:
    """Concatenate whichever sections the caller has state for."""
    parts = []
    if kappa is not None:
        parts.append(dump_kappa(kappa, state_names, action_names))
    if counts is not None:
        parts.append(dump_lambda(counts, action_names))
    if policy is not None and index is not None:
        parts.append(dump_policy(policy, index, state_names, action_names))
    if comp is not None:
        parts.append(dump_competence(comp, state_names, action_names))
    return "\n\n".join(parts) + "\n"
