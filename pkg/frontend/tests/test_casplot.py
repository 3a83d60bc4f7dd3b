"""Plot tool: schema validation, rendering, and table reproduction."""

import csv
from importlib import resources

import numpy as np
import pytest

from casplot import PlotSpec, SchemaError, actions_table, load_metrics, render
from casplot.cli import EXIT_DATA, EXIT_OK, main
from casplot.figures import (DEFAULT_TABLE_EPISODES, cost_series,
                             format_actions_table, optimality_series)

SAMPLE = str(resources.files("casplot") / "data" / "sample_metrics.csv")


@pytest.fixture(scope="module")
def frame():
    return load_metrics([SAMPLE])


# -- schema ----------------------------------------------------------------------

def test_sample_loads(frame):
    assert len(frame) == 1600
    assert frame["episode"].max() == 159


def test_schema_mismatch_reports_column_diff(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("trial,episode,oops\n0,0,1\n")
    with pytest.raises(SchemaError) as err:
        load_metrics([bad])
    assert "missing" in str(err.value)
    assert "expected_cost" in str(err.value)
    assert "unexpected" in str(err.value)
    assert "oops" in str(err.value)


def test_schema_mismatch_is_nonzero_exit_and_no_file(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("trial,episode\n0,0\n")
    out = tmp_path / "fig.png"
    rc = main(["--figure", "cost", "--in", str(bad), "--out", str(out)])
    assert rc == EXIT_DATA
    assert "data error" in capsys.readouterr().err
    assert not out.exists()


# -- the three figure types render from the shipped sample -------------------------

@pytest.mark.parametrize("figure,suffix", [("cost", ".png"),
                                           ("optimality", ".png"),
                                           ("actions-table", ".txt")])
def test_renders_from_shipped_sample(tmp_path, figure, suffix):
    out = tmp_path / f"{figure}{suffix}"
    spec = PlotSpec(inputs=[SAMPLE], figure=figure, out=str(out))
    render(spec)
    assert out.exists() and out.stat().st_size > 0


def test_cli_renders_and_prints_table(tmp_path, capsys):
    out = tmp_path / "table.txt"
    rc = main(["--figure", "actions-table", "--in", SAMPLE,
               "--out", str(out)])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert text == out.read_text()
    # header + one row per default episode
    assert len(text.splitlines()) == 1 + len(DEFAULT_TABLE_EPISODES)


# -- actions table reproduces the sample's percentages exactly ---------------------

def sample_pct_by_episode():
    """Independent aggregation of the shipped CSV with the csv module."""
    cols = ("pct_l0", "pct_l1", "pct_l2", "pct_l3")
    by_ep = {}
    with open(SAMPLE) as fh:
        for row in csv.DictReader(fh):
            ep = int(row["episode"])
            by_ep.setdefault(ep, []).append([float(row[c]) for c in cols])
    return {ep: np.mean(vals, axis=0) for ep, vals in by_ep.items()}


def test_actions_table_reproduces_sample_percentages(frame):
    table = actions_table(frame, DEFAULT_TABLE_EPISODES)
    expected = sample_pct_by_episode()
    for ep in DEFAULT_TABLE_EPISODES:
        np.testing.assert_array_equal(table.loc[ep].to_numpy(),
                                      expected[ep])
    # and the printed form matches the same numbers at its precision
    text = format_actions_table(table)
    for line, ep in zip(text.splitlines()[1:], DEFAULT_TABLE_EPISODES):
        printed = [float(tok) for tok in line.split()[1:]]
        np.testing.assert_allclose(printed, expected[ep], atol=5e-4)


def test_actions_table_drops_absent_episodes(frame):
    table = actions_table(frame, [0, 10_000])
    assert list(table.index) == [0]


def test_empty_episode_range_is_error_and_no_file(tmp_path, capsys):
    out = tmp_path / "table.txt"
    rc = main(["--figure", "actions-table", "--in", SAMPLE,
               "--out", str(out), "--episodes", "9999"])
    assert rc == EXIT_DATA
    assert "no requested episode" in capsys.readouterr().err
    assert not out.exists()


def test_bad_episode_list_is_error(tmp_path, capsys):
    rc = main(["--figure", "actions-table", "--in", SAMPLE,
               "--out", str(tmp_path / "t.txt"), "--episodes", "a,b"])
    assert rc == EXIT_DATA
    capsys.readouterr()


# -- series properties ---------------------------------------------------------------

def test_single_trial_has_zero_se(frame, tmp_path):
    single = frame[frame["trial"] == 0].drop(columns="source")
    path = tmp_path / "one.csv"
    single.to_csv(path, index=False)
    _, _, se = cost_series(load_metrics([path]))
    assert np.all(se == 0.0)


def test_multiple_inputs_concatenate(tmp_path, frame):
    # same file twice doubles the sample count but keeps the means
    double = load_metrics([SAMPLE, SAMPLE])
    assert len(double) == 2 * len(frame)
    _, m1, _ = cost_series(frame)
    _, m2, _ = cost_series(double)
    np.testing.assert_allclose(m1, m2)


def test_rerun_yields_identical_series(frame):
    a = optimality_series(frame)
    b = optimality_series(load_metrics([SAMPLE]))
    for col in a:
        for x, y in zip(a[col], b[col]):
            np.testing.assert_array_equal(x, y)


def test_nan_optimality_excluded(tmp_path):
    rows = ["0,0,1.0,1.0,,0.5,0.5,0,100.0,0.0,0.0,0.0,0.0,1.0",
            "1,0,1.0,1.0,0.8,0.5,0.5,0,100.0,0.0,0.0,0.0,0.0,1.0"]
    path = tmp_path / "nan.csv"
    path.write_text("trial,episode,expected_cost,realized_cost,lo_all,"
                    "lo_visited,lo_reachable,cum_feedback,pct_l0,pct_l1,"
                    "pct_l2,pct_l3,human_cost,wall_ms\n" +
                    "\n".join(rows) + "\n")
    series = optimality_series(load_metrics([path]))
    _, mean, se = series["lo_all"]
    assert mean[0] == 0.8 and se[0] == 0.0


def test_unknown_figure_rejected():
    with pytest.raises(ValueError):
        PlotSpec(inputs=[SAMPLE], figure="pie", out="x.png")


def test_no_inputs_rejected():
    with pytest.raises(ValueError):
        PlotSpec(inputs=[], figure="cost", out="x.png")
