import json

import pandas as pd
import pytest

from mipnn.data import subsample
from mipnn.errors import ConfigError, InputError
from mipnn.experiments import (
    RESULT_COLUMNS,
    SUMMARY_COLUMNS,
    Datasets,
    ExperimentConfig,
    RunRecord,
    experiment_tasks,
    load_datasets,
    run_experiment,
    subset_hash,
    summarize,
    train_network,
    write_results,
)


@pytest.fixture(scope="module")
def datasets(synthetic):
    return Datasets(*synthetic)


def record(model, n, seed, train, test, status="optimal"):
    return RunRecord(model, model, 1, n, seed, train, test, 1.0, status, 0.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(models=("perceptron",))
    with pytest.raises(ConfigError):
        ExperimentConfig(p_values=(0,))
    with pytest.raises(ConfigError):
        ExperimentConfig(accuracy_stop=1.2)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 3})
    cfg = ExperimentConfig.from_dict({"seeds": [4], "hidden": 8})
    assert cfg.seeds == (4,) and cfg.hidden == (8,)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_task_grids():
    cfg = ExperimentConfig(sample_counts=(10, 20), p_values=(3,))
    tasks = experiment_tasks("exp1", cfg)
    assert len(tasks) == 4 * 2 * 3
    assert {t[1] for t in tasks if t[0] == "gd"} == {1}
    assert {t[1] for t in tasks if t[0] != "gd"} == {3}
    tasks = experiment_tasks("exp2", ExperimentConfig(p_values=(1, 3, 7, 15), sample_counts=(10, 20)))
    assert len(tasks) == 24 and {t[0] for t in tasks} == {"sat-margin"}
    with pytest.raises(ConfigError):
        experiment_tasks("exp3", cfg)


def test_summary_means():
    records = [record("sat-margin", 10, s, a, b) for s, a, b in [(1, 1.0, 0.5), (2, 0.8, 0.7), (3, 0.9, 0.6)]]
    records.append(record("sat-margin", 10, 4, None, None, status="error"))
    summary = summarize(records)
    assert list(summary.columns) == list(SUMMARY_COLUMNS)
    row = summary.iloc[0]
    assert row["runs"] == 4
    assert row["mean_train_acc"] == pytest.approx(0.9)
    assert row["mean_test_acc"] == pytest.approx(0.6)


def test_train_network_records(datasets):
    cfg = ExperimentConfig(time_limit=30)
    result = train_network(cfg, datasets, "sat-margin", 1, 20, 1)
    r = result.record
    assert r.status in ("optimal", "feasible-stopped") and r.train_acc >= 0.9
    assert 0 <= r.test_acc <= 1 and r.objective == "sat-margin"
    assert r.subset_hash == subset_hash(subsample(datasets.train, 20, 1))
    assert result.network.layer_sizes == (datasets.train.n_features, 16, 2)


def test_gd_record(datasets):
    cfg = ExperimentConfig(epochs=20)
    result = train_network(cfg, datasets, "gd", 1, 20, 2)
    assert result.record.status == "trained" and result.record.objective == "squared-hinge"
    assert result.history.epochs[-1] == 20
    assert result.record.objective_value == pytest.approx(result.history.loss[-1])


def test_too_many_samples(datasets):
    with pytest.raises(ConfigError):
        train_network(ExperimentConfig(), datasets, "sat-margin", 1, 10**6, 1)


def test_runs_are_deterministic_apart_from_time(datasets):
    cfg = ExperimentConfig(models=("max-correct", "gd"), sample_counts=(10,), seeds=(1, 2), time_limit=30, epochs=30)
    a = run_experiment("exp1", cfg, datasets)
    b = run_experiment("exp1", cfg, datasets)
    strip = lambda rs: [{k: v for k, v in r.row().items() if k != "wall_time_s"} for r in rs]
    assert strip(a) == strip(b)


def test_write_results(tmp_path, datasets):
    cfg = ExperimentConfig(models=("gd",), sample_counts=(10,), seeds=(1,), epochs=5)
    records = run_experiment("exp1", cfg, datasets)
    paths = write_results(records, tmp_path, cfg, "exp1")
    frame = pd.read_csv(paths["results"])
    assert list(frame.columns) == list(RESULT_COLUMNS) and len(frame) == 1
    doc = json.loads(paths["config"].read_text())
    assert doc["experiment"] == "exp1" and doc["config"]["models"] == ["gd"]
    assert len(paths["runs"].read_text().splitlines()) == 1
    assert "matplotlib" in paths["plot"].read_text()


def test_load_datasets_missing(tmp_path):
    with pytest.raises(InputError):
        load_datasets(str(tmp_path / "nothing"))
