import pandas as pd
import pytest

from base.exceptions import ConfigurationError, MalformedCsvError
from harness.services.plots import (
    CURVE_COLUMNS,
    available_metrics,
    curve_frame,
    export_plot_data,
    read_metrics,
    scatter_frame,
)


def write_metrics(path, seed, iterations=3):
    frame = pd.DataFrame(
        {
            "seed": seed,
            "iteration": range(iterations),
            "variant": "full",
            "beta": [1.0 / (index + 1) for index in range(iterations)],
            "target_variance": [0.5] * iterations,
            "exact_return": [None] * iterations,
        }
    )
    frame.to_csv(path, index=False)

    return path


def write_uncertainty(path, rows=5):
    pd.DataFrame({"uncertainty": [0.1 * index for index in range(rows)], "td_target": [1.0] * rows}).to_csv(
        path, index=False
    )

    return path


def test_curves_from_two_seeds(tmp_path):
    paths = [write_metrics(tmp_path / f"metrics_{seed}.csv", seed) for seed in (0, 1)]
    curves = curve_frame(paths, ["beta"])
    assert list(curves.columns) == CURVE_COLUMNS
    assert set(curves["seed"]) == {0, 1}
    assert len(curves) == 6
    assert set(curves["metric"]) == {"beta"}


def test_all_metrics_by_default(tmp_path):
    frame = read_metrics(write_metrics(tmp_path / "metrics.csv", 0))
    assert available_metrics(frame) == ["beta", "target_variance"]
    assert set(curve_frame([tmp_path / "metrics.csv"])["metric"]) == {"beta", "target_variance"}


def test_empty_selection_lists_available(tmp_path):
    path = write_metrics(tmp_path / "metrics.csv", 0)
    with pytest.raises(ConfigurationError, match="available metrics: beta, target_variance"):
        curve_frame([path], [])
    with pytest.raises(ConfigurationError, match="available metrics"):
        curve_frame([path], ["no_such_metric"])


def test_parser_error_has_line(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("iteration,beta\n0,1.0\n1,2.0,3.0\n", encoding="utf-8")
    with pytest.raises(MalformedCsvError) as error:
        read_metrics(path)
    assert error.value.line == 3


def test_non_numeric_value_has_line(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("iteration,beta\nfirst,1.0\n", encoding="utf-8")
    with pytest.raises(MalformedCsvError) as error:
        read_metrics(path)
    assert error.value.line == 2


def test_missing_columns(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("beta\n1.0\n", encoding="utf-8")
    with pytest.raises(MalformedCsvError) as error:
        read_metrics(path)
    assert error.value.line == 1


def test_empty_file(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(MalformedCsvError) as error:
        read_metrics(path)
    assert error.value.line is None


def test_scatter_keeps_rows(tmp_path):
    paths = [write_uncertainty(tmp_path / "a.csv", 5), write_uncertainty(tmp_path / "b.csv", 7)]
    assert len(scatter_frame(paths)) == 12


def test_export_from_run_directories(tmp_path):
    runs = []
    for seed in (0, 1):
        run = tmp_path / f"run_{seed}"
        run.mkdir()
        write_metrics(run / "metrics.csv", seed)
        write_uncertainty(run / "uncertainty.csv")
        runs.append(run)

    written = export_plot_data(runs, tmp_path / "plots", ["target_variance"])
    assert set(written) == {"curves.csv", "scatter.csv"}
    assert len(pd.read_csv(written["curves.csv"])) == 6
    assert len(pd.read_csv(written["scatter.csv"])) == 10


def test_export_without_scatter(tmp_path):
    written = export_plot_data([write_metrics(tmp_path / "metrics.csv", 0)], tmp_path / "plots")
    assert set(written) == {"curves.csv"}


def test_missing_run(tmp_path):
    with pytest.raises(ConfigurationError):
        export_plot_data([tmp_path / "absent"], tmp_path / "plots")
