import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hls_bnc.data import Dataset, make_folds
from hls_bnc.evaluation import (
    EvalResult,
    EvaluationError,
    ModelConfig,
    TimingConfig,
    load_fold_reports,
    run_benchmark,
    run_cv,
    score_rows,
    time_fit,
    timing_record,
    wdl,
    write_summary_csv,
)
from hls_bnc.exceptions import ConfigError
from hls_bnc.fixtures import load_fixture


def _result(name, ll, zo=0.0, model="m"):
    return EvalResult(name, model, np.array([zo]), np.array([ll]), 0.0)


def test_score_rows_perfect_and_uniform():
    y = np.array([0, 1, 1])
    ll, zo = score_rows(np.eye(2)[y], y)
    assert ll.sum() == 0 and zo.sum() == 0
    ll, zo = score_rows(np.full((3, 2), 0.5), y)
    np.testing.assert_allclose(ll, np.log(2))
    # ties go to class 0
    np.testing.assert_array_equal(zo, [0, 1, 1])
    ll, _ = score_rows(np.array([[1.0, 0.0]]), np.array([1]))
    assert np.isfinite(ll[0])


def test_perfect_classifier_cv(tmp_path):
    X = np.repeat(np.arange(2), 20)[:, None]
    data = Dataset.from_arrays(X, X[:, 0])
    res = run_cv(data, ModelConfig("nb", "mle"), make_folds(data, 5, 0), dataset_name="copy", out_dir=tmp_path)
    assert res.zero_one == 0.0 and res.log_loss == 0.0 and res.n_folds == 5


def test_fold_reports_reproduce_aggregates(tmp_path):
    data = load_fixture("lenses")
    cfg = ModelConfig("tan", "add:1")
    res = run_cv(data, cfg, make_folds(data, 4, 0), dataset_name="lenses", out_dir=tmp_path)
    reports = load_fold_reports(tmp_path)
    assert len(reports) == 4
    rows = sorted(r for rep in reports for r in rep["rows"])
    assert rows == list(range(data.n_rows))
    fold_ll = [np.mean(rep["row_log_loss"]) for rep in sorted(reports, key=lambda r: r["fold"])]
    assert np.isclose(np.mean(fold_ll), res.log_loss, rtol=0, atol=1e-12)
    assert np.isclose(np.mean([r["zero_one"] for r in reports]), res.zero_one)


def test_fold_failure_names_context(monkeypatch):
    import hls_bnc.evaluation as ev

    def broken(*args, **kwargs):
        raise FloatingPointError("boom")

    monkeypatch.setattr(ev, "train", broken)
    data = load_fixture("lenses")
    with pytest.raises(EvaluationError, match="lenses / tan/add:1 / fold 0"):
        run_cv(data, ModelConfig("tan", "add:1"), make_folds(data, 3, 0), dataset_name="lenses")


def test_benchmark_table_and_summary(tmp_path):
    datasets = {n: load_fixture(n) for n in ("lenses", "iris")}
    configs = [ModelConfig("nb", "add:1"), ModelConfig("nb", "hls-nb:1")]
    table = run_benchmark(datasets, configs, k=3, seed=0, out_dir=tmp_path / "folds")
    assert set(table) == {"nb/add:1", "nb/hls-nb:1"}
    assert set(table["nb/add:1"]) == {"lenses", "iris"}
    write_summary_csv(table, tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().strip().splitlines()) == 5
    rec = wdl(table["nb/hls-nb:1"], table["nb/add:1"])
    assert rec.total == 2


def test_wdl_examples():
    a = [_result(f"d{i}", 0.1) for i in range(5)]
    b = [_result(f"d{i}", 0.2) for i in range(5)]
    assert str(wdl(a, b)) == "5-0-0"
    assert str(wdl(a, a)) == "0-5-0"
    assert str(wdl(a, a, "zero_one")) == "0-5-0"
    with pytest.raises(ConfigError):
        wdl(a, b[:4])
    with pytest.raises(ConfigError):
        wdl(a, b, "hinge")
    with pytest.raises(ConfigError):
        wdl(a, b, draw_tolerance=-1)
    near = [_result(f"d{i}", 0.1 + 1e-13) for i in range(5)]
    assert str(wdl(near, a)) == "0-5-0"


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=12), st.randoms())
def test_wdl_antisymmetric_and_order_free(pairs, rnd):
    a = [_result(f"d{i}", x / 10) for i, (x, _) in enumerate(pairs)]
    b = [_result(f"d{i}", y / 10) for i, (_, y) in enumerate(pairs)]
    ab, ba = wdl(a, b), wdl(b, a)
    assert (ab.wins, ab.draws, ab.losses) == (ba.losses, ba.draws, ba.wins)
    rnd.shuffle(a)
    assert wdl(a, b) == ab


def test_timing():
    cfg = TimingConfig(2, 1000, 4, 0)
    assert time_fit(cfg, repetitions=1) > 0
    rec = timing_record(cfg, repetitions=1)
    assert set(rec) >= {"fast_seconds", "slow_seconds", "total_fast_seconds", "cardinality"}
    with pytest.raises(ConfigError):
        time_fit(cfg, repetitions=0)
    with pytest.raises(ConfigError):
        time_fit(cfg, "add:1")
    json.dumps(rec)
