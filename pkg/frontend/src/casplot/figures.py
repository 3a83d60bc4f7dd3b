"""Figure rendering over the experiment metrics CSV contract.

The input schema is the harness metrics file: one row per (trial,
episode) with expected/realized cost, three level-optimality fractions,
cumulative feedback, per-level action shares, human cost, and wall time.
This package never imports the planning library; the CSV is the whole
interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

EXPECTED_COLUMNS = [
    "trial", "episode", "expected_cost", "realized_cost",
    "lo_all", "lo_visited", "lo_reachable", "cum_feedback",
    "pct_l0", "pct_l1", "pct_l2", "pct_l3", "human_cost", "wall_ms",
]

FIGURES = ("cost", "optimality", "actions-table")

DEFAULT_TABLE_EPISODES = (0, 25, 100, 150)

PCT_COLUMNS = ["pct_l0", "pct_l1", "pct_l2", "pct_l3"]


class SchemaError(ValueError):
    """Input CSV columns do not match the metrics contract."""

    def __init__(self, path, found):
        missing = [c for c in EXPECTED_COLUMNS if c not in found]
        unexpected = [c for c in found if c not in EXPECTED_COLUMNS]
        parts = [f"{path}: columns do not match the metrics schema"]
        if missing:
            parts.append("missing: " + ", ".join(missing))
        if unexpected:
            parts.append("unexpected: " + ", ".join(unexpected))
        if not missing and not unexpected:
            parts.append("columns are out of order")
        super().__init__("; ".join(parts))
        self.missing = missing
        self.unexpected = unexpected


@dataclass
class PlotSpec:
    """One render request: inputs, figure selector, output, styling."""

    inputs: Sequence[str]
    figure: str
    out: str
    episodes: Sequence[int] = field(default_factory=lambda: list(DEFAULT_TABLE_EPISODES))
    title: str | None = None
    dpi: int = 150

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure {self.figure!r}; "
                             f"choose from {', '.join(FIGURES)}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def load_metrics(paths: Sequence[str]) -> pd.DataFrame:
    """Read and concatenate metrics CSVs, validating the schema of each.

    Rows from different files keep distinct trial groups so means and
    standard errors aggregate over every (file, trial) pair.
    """
    frames = []
    for i, path in enumerate(paths):
        frame = pd.read_csv(path)
        if list(frame.columns) != EXPECTED_COLUMNS:
            raise SchemaError(path, list(frame.columns))
        frame = frame.assign(source=i)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def _episode_stats(frame: pd.DataFrame, column: str):
    """Per-episode mean and standard error across (file, trial) pairs.

    NaN entries (undefined level-optimality subsets) are excluded; a
    single remaining sample gets a zero-width band.
    """
    episodes = np.sort(frame["episode"].unique())
    means = np.empty(len(episodes))
    ses = np.empty(len(episodes))
    for k, ep in enumerate(episodes):
        vals = frame.loc[frame["episode"] == ep, column].to_numpy(float)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            means[k], ses[k] = np.nan, 0.0
        else:
            means[k] = np.mean(vals)
            ses[k] = (np.std(vals, ddof=1) / np.sqrt(vals.size)
                      if vals.size > 1 else 0.0)
    return episodes, means, ses


def cost_series(frame: pd.DataFrame):
    """Data series behind the cost figure: (episodes, mean, se)."""
    return _episode_stats(frame, "expected_cost")


def optimality_series(frame: pd.DataFrame) -> dict:
    """Data series behind the optimality figure, keyed by column."""
    return {col: _episode_stats(frame, col)
            for col in ("lo_all", "lo_visited", "lo_reachable",
                        "cum_feedback")}


def actions_table(frame: pd.DataFrame, episodes: Sequence[int]) -> pd.DataFrame:
    """Mean per-level action-share percentages at the requested episodes.

    Episodes absent from the data are dropped; an empty result is an
    error rather than an empty table.
    """
    present = [ep for ep in episodes if (frame["episode"] == ep).any()]
    if not present:
        raise ValueError(
            f"no requested episode {sorted(set(episodes))} is present in "
            f"the data (episodes run {frame['episode'].min()}.."
            f"{frame['episode'].max()})")
    rows = {}
    for ep in present:
        sub = frame.loc[frame["episode"] == ep]
        rows[ep] = [float(np.mean(sub[col].to_numpy(float)))
                    for col in PCT_COLUMNS]
    return pd.DataFrame.from_dict(rows, orient="index", columns=PCT_COLUMNS)


def _n_groups(frame: pd.DataFrame) -> int:
    return len(frame.groupby(["source", "trial"]))


def _render_cost(frame: pd.DataFrame, spec: PlotSpec):
    episodes, mean, se = cost_series(frame)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(episodes, mean, color="tab:blue", label="expected cost")
    ax.fill_between(episodes, mean - se, mean + se, color="tab:blue",
                    alpha=0.25, linewidth=0, label="± standard error")
    ax.set_xlabel("episode")
    ax.set_ylabel("expected cost at start state")
    ax.set_title(spec.title or
                 f"Expected cost (mean over {_n_groups(frame)} trials)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out, dpi=spec.dpi)
    plt.close(fig)


def _render_optimality(frame: pd.DataFrame, spec: PlotSpec):
    series = optimality_series(frame)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = {
        "lo_all": ("all states", "tab:blue"),
        "lo_visited": ("visited states", "tab:orange"),
        "lo_reachable": ("reachable states", "tab:green"),
    }
    for col, (label, color) in styles.items():
        episodes, mean, se = series[col]
        ax.plot(episodes, mean, color=color, label=label)
        ax.fill_between(episodes, mean - se, mean + se, color=color,
                        alpha=0.2, linewidth=0)
    ax.set_xlabel("episode")
    ax.set_ylabel("level optimality")
    ax.set_ylim(0.0, 1.05)
    ax2 = ax.twinx()
    episodes, mean, _ = series["cum_feedback"]
    ax2.plot(episodes, mean, color="tab:red", linestyle="--",
             label="cumulative feedback")
    ax2.set_ylabel("cumulative feedback signals")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="lower right")
    ax.set_title(spec.title or
                 f"Level optimality (mean ± SE over {_n_groups(frame)} trials)")
    fig.tight_layout()
    fig.savefig(spec.out, dpi=spec.dpi)
    plt.close(fig)


def format_actions_table(table: pd.DataFrame) -> str:
    """Fixed-width text rendering of the action-share table."""
    lines = ["episode  " + "  ".join(f"{c:>8}" for c in PCT_COLUMNS)]
    for ep, row in table.iterrows():
        lines.append(f"{ep:>7}  " +
                     "  ".join(f"{row[c]:8.3f}" for c in PCT_COLUMNS))
    return "\n".join(lines) + "\n"


def _render_actions_table(frame: pd.DataFrame, spec: PlotSpec):
    table = actions_table(frame, spec.episodes)
    text = format_actions_table(table)
    Path(spec.out).write_text(text)
    return text


def render(spec: PlotSpec):
    """Render one figure or table; returns the table text when textual."""
    frame = load_metrics(spec.inputs)
    if spec.figure == "cost":
        _render_cost(frame, spec)
        return None
    if spec.figure == "optimality":
        _render_optimality(frame, spec)
        return None
    return _render_actions_table(frame, spec)
