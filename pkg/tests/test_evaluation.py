import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from calloc.baselines import DNNTrainConfig, KNNLocalizer, knn_predict, train_dnn
from calloc.evaluation import (
    CSV_COLUMNS,
    EvalGrid,
    MetricsReport,
    cell_means_from_per_sample,
    emit_report,
    load_report_csv,
    load_report_json,
    localization_error,
    parse_range,
    run_grid,
)


@pytest.fixture(scope="module")
def dnn(tiny):
    x = tiny.train.normalized()
    return train_dnn(x, tiny.labels(tiny.train.rp_ids), tiny.n_rps, DNNTrainConfig(epochs=15))


def test_localization_error_examples(tiny):
    assert localization_error([3], [3], tiny).tolist() == [0.0]
    assert localization_error([4], [5], tiny).tolist() == [1.0]
    assert localization_error([0], [9], {0: (0, 0), 9: (9, 0)}).tolist() == [9.0]
    assert localization_error(0, 10, {0: (0, 0), 10: (10, 0)}).tolist() == [10.0]
    with pytest.raises(KeyError):
        localization_error([77], [0], tiny)


def test_knn_brute_force_example():
    # distances 1, 2, 9 from the origin
    train = np.array([[1.0, 0.0], [0.0, 2.0], [9.0, 0.0]])
    assert knn_predict(train, np.array(["A", "A", "B"]), [[0.0, 0.0]], k=3).tolist() == ["A"]


def test_knn_exact_match_and_degenerate_k():
    train = np.array([[0.0], [1.0], [2.0], [3.0]])
    labels = np.array([0, 1, 1, 0])
    assert knn_predict(train, labels, [[2.0]], k=1).tolist() == [1]
    # a 2-2 tie over the whole set goes to the nearest member's label
    assert knn_predict(train, labels, [[0.1]], k=4).tolist() == [0]
    assert knn_predict(train, labels, [[2.9]], k=4).tolist() == [0]
    assert knn_predict(train, labels, [[1.2]], k=4).tolist() == [1]
    with pytest.raises(ValueError):
        knn_predict(train, labels, [[0.0]], k=5)


@given(st.integers(0, 10_000), st.integers(1, 7))
def test_knn_matches_brute_force(seed, k):
    rng = np.random.default_rng(seed)
    train, labels = rng.uniform(size=(12, 3)), rng.integers(0, 3, 12)
    q = rng.uniform(size=(1, 3))
    d = np.sqrt(((train - q) ** 2).sum(1))
    nearest = sorted(range(12), key=lambda i: d[i])[:k]
    votes = {lab: sum(labels[i] == lab for i in nearest) for lab in set(labels[nearest])}
    best = max(votes.values())
    expect = next(labels[i] for i in nearest if votes[labels[i]] == best)
    assert knn_predict(train, labels, q, k)[0] == expect


def test_parse_range():
    assert parse_range("0.1:0.5:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert parse_range("10:100:10") == [float(v) for v in range(10, 101, 10)]
    assert parse_range("1,2") == [1.0, 2.0]
    assert parse_range("3") == [3.0]
    for bad in ("1:2", "2:1:1", "0:1:0"):
        with pytest.raises(ValueError):
            parse_range(bad)


def test_grid_cell_count():
    g = EvalGrid(devices=("BLU", "HTC", "S7", "LG", "MOTO", "OP3"))
    assert g.n_cells() == 300
    with pytest.raises(ValueError, match="empty"):
        EvalGrid(epsilons=())


def test_metrics_validation():
    r = MetricsReport.from_errors([0.0, 1.0, 5.0], 0.5, attack="fgsm", building="b", device="all", eps=0.1, phi=10, mode="manipulation", seed=0)
    assert (r.n, r.mean_m, r.median_m, r.max_m) == (3, 2.0, 1.0, 5.0)
    with pytest.raises(ValueError):
        MetricsReport("fgsm", "b", "all", 0.1, 10, "manipulation", 1, 0.0, 3.0, 1.0, 1.0, 2.0, 0)
    with pytest.raises(ValueError):
        MetricsReport.from_errors([], 0.0, attack="fgsm", building="b", device="all", eps=0.1, phi=10, mode="manipulation", seed=0)


def test_run_grid_shape_and_clean_identity(tiny, dnn):
    grid = EvalGrid(epsilons=(0.0, 0.3), phis=(0, 50), devices=("all", "OP3"), attacks=("fgsm", "pgd"), steps=3)
    reports = run_grid(dnn, tiny, grid)
    assert len(reports) == grid.n_cells() == 16
    for r in reports:
        assert r.building == "tiny" and 0 <= r.mean_m <= r.max_m
        if r.eps == 0 or r.phi == 0:
            assert r.mean_m == r.clean_mean_m
    by = {(r.attack, r.device, r.eps, r.phi): r for r in reports}
    assert by[("pgd", "all", 0.3, 50)].n == len(tiny.test)
    assert by[("pgd", "OP3", 0.3, 50)].n == tiny.n_rps


def test_attack_strength_is_visible(tiny, dnn):
    reports = run_grid(dnn, tiny, EvalGrid(epsilons=(0.5,), phis=(100,), attacks=("pgd",)))
    assert reports[0].mean_m > reports[0].clean_mean_m


def test_knn_needs_surrogate(tiny, dnn):
    knn = KNNLocalizer(tiny.train.normalized(), tiny.labels(tiny.train.rp_ids), k=3)
    grid = EvalGrid(epsilons=(0.2,), phis=(50,))
    with pytest.raises(ValueError, match="surrogate"):
        run_grid(knn, tiny, grid)
    reports = run_grid(knn, tiny, grid, surrogate=dnn)
    assert len(reports) == 1
    # an untouched cell never needs the surrogate
    assert len(run_grid(knn, tiny, EvalGrid(epsilons=(0.2,), phis=(0,)))) == 1


def test_run_grid_building_filter(tiny, dnn):
    with pytest.raises(ValueError, match="no datasets"):
        run_grid(dnn, tiny, EvalGrid(buildings=("elsewhere",)))
    with pytest.raises(KeyError):
        run_grid({"other": dnn}, tiny, EvalGrid(epsilons=(0.1,), phis=(10,)))


def test_report_files_round_trip(tiny, dnn, tmp_path):
    grid = EvalGrid(epsilons=(0.1, 0.3), phis=(20, 60), devices=("all", "BLU"), attacks=("fgsm", "mim"), steps=2)
    reports = run_grid(dnn, tiny, grid, per_sample=True)
    written = emit_report(reports, tmp_path, config=grid.to_dict())
    assert sorted(p.name for p in written) == ["per_sample.csv", "report.csv", "report.json"]

    with open(tmp_path / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(reports) == 16
    assert tuple(rows[0]) == CSV_COLUMNS
    assert load_report_csv(tmp_path / "report.csv") == reports

    doc = json.loads((tmp_path / "report.json").read_text())
    assert set(doc["results"]) == {"fgsm", "mim"}
    assert set(doc["results"]["mim"]["tiny"]) == {"all", "BLU"}
    back, config = load_report_json(tmp_path / "report.json")
    assert sorted(back, key=lambda r: tuple(map(str, r.row().values()))) == sorted(
        reports, key=lambda r: tuple(map(str, r.row().values()))
    )
    assert config["epsilons"] == [0.1, 0.3]

    means = cell_means_from_per_sample(tmp_path / "per_sample.csv")
    assert len(means) == len(reports)
    for r in reports:
        key = (r.attack, r.building, r.device, r.eps, r.phi, r.mode, r.seed)
        assert means[key] == pytest.approx(r.mean_m, rel=1e-12)


def test_empty_report_rejected(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        emit_report([], tmp_path)


def test_unwritable_report_path(tiny, dnn, tmp_path):
    reports = run_grid(dnn, tiny, EvalGrid(epsilons=(0.1,), phis=(10,)))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(reports, blocker / "sub")
