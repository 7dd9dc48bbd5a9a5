import csv
import json

import numpy as np
import pytest

from hypervectors import HDCError
from experiments import (
    CSV_HEADER,
    EXPERIMENT_DEFAULTS,
    EXPERIMENTS,
    PAPER_SCALE_OVERRIDES,
    parse_dims,
    resolve_params,
    run_experiment,
)


def _by_x(result, metric):
    groups = {}
    for row in result.rows:
        if row.metric == metric:
            groups.setdefault(row.x_value, []).append(row.value)
    return {x: float(np.mean(v)) for x, v in groups.items()}


def test_every_experiment_has_defaults():
    assert set(EXPERIMENTS) == {
        "histogram", "fsa-recall", "substring-original", "substring-cleanup",
        "tm-noise", "ca110", "ca110-noise", "resonator",
    }
    assert set(PAPER_SCALE_OVERRIDES) <= set(EXPERIMENT_DEFAULTS)
    fsa = EXPERIMENT_DEFAULTS["fsa-recall"]
    assert (fsa["states"], fsa["symbols"]) == (22, 29)
    assert fsa["dims"][0] == 100 and fsa["dims"][-1] == 4000 and len(fsa["dims"]) == 40
    histogram = EXPERIMENT_DEFAULTS["histogram"]
    assert histogram["dims"][0] == 200 and histogram["dims"][-1] == 10000 and histogram["max_count"] == 1023


def test_resolve_params():
    params = resolve_params("fsa-recall", paper_scale=True)
    assert params["trials"] == 50 and params["transitions"] == 1000
    assert resolve_params("tm-noise", {"noise": 0.1})["noise"] == [0.1]
    assert EXPERIMENT_DEFAULTS["tm-noise"]["noise"][0] == 0.05
    with pytest.raises(HDCError):
        resolve_params("tm-noise", {"bogus": 1})
    with pytest.raises(HDCError):
        resolve_params("no-such-experiment")


def test_parse_dims():
    assert parse_dims("200:1000:200") == [200, 400, 600, 800, 1000]
    assert parse_dims("256:4096:x2") == [256, 512, 1024, 2048, 4096]
    for bad in ["100", "a:b:c", "100:50:10", "100:200:0", "64:128:x1"]:
        with pytest.raises(HDCError):
            parse_dims(bad)


def test_histogram_correlation_improves_with_dimension():
    result = run_experiment("histogram", {"sizes": [512], "dims": [200, 10000], "trials": 2}, seed=3)
    assert len(result.rows) == 4
    means = _by_x(result, "correlation")
    assert means[10000] >= means[200] + 0.2


def test_fsa_recall_accuracy():
    result = run_experiment(
        "fsa-recall", {"dims": [100, 4000], "noise": [0.25], "transitions": 200, "trials": 1}, seed=5
    )
    means = _by_x(result, "accuracy")
    assert means[4000] >= 0.97
    assert means[100] < means[4000]


def test_substring_experiments():
    cleanup = run_experiment(
        "substring-cleanup",
        {"base_lens": [32], "dims": [64, 4096], "bases": 20, "query_len": 10, "trials": 1},
        seed=2,
    )
    assert len(cleanup.rows) == 2
    assert _by_x(cleanup, "accuracy")[4096] >= 0.95

    original = run_experiment(
        "substring-original", {"base_lens": [8], "dims": [256], "bases": 10, "trials": 1}, seed=2
    )
    assert len(original.rows) == 1
    assert 0.0 <= original.rows[0].value <= 1.0
    assert original.rows[0].series == {"base_len": 8}

    calibrated = run_experiment(
        "substring-cleanup",
        {"base_lens": [16], "dims": [1024], "bases": 3, "query_len": 5, "threshold": "calibrated", "trials": 1},
        seed=2,
    )
    assert len(calibrated.rows) == 1
    with pytest.raises(HDCError):
        run_experiment("substring-cleanup", {"threshold": "loose", "bases": 1, "dims": [64], "trials": 1})


def test_tm_noise_rows():
    result = run_experiment("tm-noise", {"noise": [0.1], "target_steps": 100, "trials": 2}, seed=1)
    assert [row.trial for row in result.rows] == [0, 1]
    assert all(row.x_name == "ber" and row.metric == "dimension" and row.value >= 16 for row in result.rows)


def test_ca_experiments():
    result = run_experiment("ca110", {"lengths": [16], "dims": [1024], "steps": 5, "trials": 1}, seed=1)
    assert len(result.rows) == 1
    assert 0.0 <= result.rows[0].value <= 1.0
    noisy = run_experiment("ca110-noise", {"lengths": [16], "dims": [1024], "steps": 5, "noise": [0.25], "trials": 1}, seed=1)
    assert noisy.rows[0].series == {"length": 16, "ber": 0.25}


def test_resonator_rows():
    result = run_experiment("resonator", {"dims": [1024], "trials": 3}, seed=9)
    assert len(result.rows) == 9
    assert {row.metric for row in result.rows} == {"success", "converged", "iterations"}


def test_csv_is_deterministic_and_self_documenting(tmp_path):
    overrides = {"dims": [256, 512], "trials": 2}
    first = tmp_path / "a" / "run"
    second = tmp_path / "b" / "run"
    run_experiment("resonator", overrides, seed=4, output_path=str(first))
    run_experiment("resonator", overrides, seed=4, output_path=str(second))
    first_csv = (tmp_path / "a" / "run.csv").read_bytes()
    assert first_csv == (tmp_path / "b" / "run.csv").read_bytes()

    with open(tmp_path / "a" / "run.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 1 + 2 * 2 * 3
    assert [int(row[2]) for row in rows[1:]] == sorted(int(row[2]) for row in rows[1:])

    params = json.loads((tmp_path / "a" / "run.params.json").read_text(encoding="utf-8"))
    assert params["experiment"] == "resonator" and params["seed"] == 4
    assert params["params"]["dims"] == [256, 512]


def test_worker_pool_gives_identical_rows():
    overrides = {"dims": [256], "noise": [0.1], "transitions": 50, "trials": 3}
    serial = run_experiment("fsa-recall", overrides, seed=6)
    pooled = run_experiment("fsa-recall", overrides, seed=6, workers=2)
    assert serial.rows == pooled.rows


def test_summary_groups_by_series_x_and_metric():
    result = run_experiment("tm-noise", {"noise": [0.1, 0.2], "target_steps": 50, "trials": 2}, seed=1)
    summary = result.summary()
    assert len(summary) == 2
    assert [entry[1] for entry in summary] == [0.1, 0.2]
