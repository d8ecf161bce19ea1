import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autosvd import evaluation, factor
from autosvd.cae import CaeTrainConfig
from autosvd.dataset import SplitSpec
from autosvd.evaluation import ExperimentResult, ExperimentSpec
from autosvd.factor import TrainConfig


def test_rmse_examples():
    assert evaluation.rmse([2.0], [4.0]) == 2.0
    assert evaluation.rmse([1, 2, 3, 4], [1, 2, 3, 4]) == 0.0
    assert evaluation.rmse([1, 1], [2, 3]) == pytest.approx(math.sqrt(2.5), rel=1e-15)


def test_rmse_rejects_bad_input():
    with pytest.raises(ValueError, match="empty"):
        evaluation.rmse([], [])
    with pytest.raises(ValueError, match="length"):
        evaluation.rmse([1.0, 2.0], [1.0])


pairs = st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=40)


@settings(max_examples=80, deadline=None)
@given(pairs=pairs, seed=st.integers(0, 1000), c=st.floats(0.01, 100))
def test_rmse_properties(pairs, seed, c):
    p, a = map(np.array, zip(*pairs))
    value = evaluation.rmse(p, a)
    assert value >= 0.0
    perm = np.random.default_rng(seed).permutation(len(p))
    assert evaluation.rmse(p[perm], a[perm]) == pytest.approx(value, rel=1e-12, abs=1e-12)
    assert evaluation.rmse(c * p, c * a) == pytest.approx(c * value, rel=1e-9, abs=1e-12)
    assert evaluation.rmse(a, p) == value


def test_method_name():
    assert evaluation.method_name("svdpp", "naive") == "svdpp"
    assert evaluation.method_name("autosvdpp", "efficient") == "autosvdpp[efficient]"


def test_spec_validation():
    with pytest.raises(ValueError, match="repetitions"):
        ExperimentSpec(repetitions=0)
    with pytest.raises(ValueError):
        ExperimentSpec(variant="autosvd", trainer="efficient")
    with pytest.raises(ValueError):
        ExperimentSpec(variant="nope")
    assert ExperimentSpec(variant="svdpp").train_config() == TrainConfig.paper_defaults("svdpp")


def test_heldout_cold_start_filter(make_ratings):
    from autosvd import dataset
    ds = make_ratings(10, 12, 40, seed=2)
    train, test = dataset.split(ds, SplitSpec(0.5, 1))
    m, _ = factor.train("biased_svd", train, TrainConfig(epochs=1, k=2))
    pred, actual = evaluation.heldout_predictions(m, train, test)
    assert len(pred) == len(test)
    pred2, actual2 = evaluation.heldout_predictions(m, train, test, filter_cold_start=True)
    warm = (train.user_counts[test.users] > 0) & (train.item_counts[test.items] > 0)
    assert len(pred2) == int(warm.sum())
    np.testing.assert_array_equal(actual2, actual[warm])


def _small_spec(variant, trainer="naive", reps=2, **kw):
    return ExperimentSpec(
        split=SplitSpec(0.8, 3), variant=variant, trainer=trainer, repetitions=reps,
        cfg=TrainConfig.paper_defaults(variant, k=3, epochs=3),
        cae_cfg=CaeTrainConfig(epochs=2), label="fixture", **kw)


def test_run_experiment_composition(make_ratings):
    # the harness must reproduce split -> train -> rmse done by hand
    from autosvd import dataset
    ds = make_ratings(20, 25, 200, seed=3)
    spec = _small_spec("biased_svd")
    res = evaluation.run_experiment(spec, ratings=ds)
    assert res.seeds == [3, 4] and res.epochs_run == [3, 3]
    for r, seed in enumerate(res.seeds):
        train, test = dataset.split(ds, SplitSpec(0.8, seed))
        cfg = TrainConfig.paper_defaults("biased_svd", k=3, epochs=3, seed=r)
        m, _ = factor.train("biased_svd", train, cfg)
        pred = factor.predict_many(m, train, test.users, test.items)
        assert res.rmses[r] == evaluation.rmse(pred, test.ratings)
    assert res.mean_rmse == pytest.approx(np.mean(res.rmses))
    assert res.dataset == "fixture" and res.config["cae"] is None


def test_run_experiment_deterministic_with_content(make_ratings):
    from autosvd.dataset import ItemContentMatrix
    ds = make_ratings(15, 18, 120, seed=4)
    rows = np.random.default_rng(0).integers(0, 2, (18, 5)).astype(float)
    content = ItemContentMatrix(rows, tuple("abcde"), 0, 0)
    spec = _small_spec("autosvdpp", "efficient")
    a = evaluation.run_experiment(spec, ds, content)
    b = evaluation.run_experiment(spec, ds, content)
    assert a.rmses == b.rmses and all(np.isfinite(a.rmses))
    with pytest.raises(ValueError, match="needs item content"):
        evaluation.run_experiment(spec, ds)


def _result(variant, trainer="naive", rmses=(0.9, 0.92), secs=((0.1, 0.1), (0.1, 0.1))):
    return ExperimentResult("ml-100k", 0.9, variant, trainer, list(rmses),
                            [list(s) for s in secs], [len(s) for s in secs], [0, 1])


def test_emit_report_header_only(tmp_path):
    paths = evaluation.emit_report([], tmp_path)
    for key, cols in [("results", evaluation.RESULTS_COLUMNS),
                      ("accuracy", evaluation.ACCURACY_COLUMNS),
                      ("timing", evaluation.TIMING_COLUMNS)]:
        assert paths[key].read_text() == "\t".join(cols) + "\n"


def test_emit_report_round_trip(tmp_path):
    results = [_result("biased_svd", secs=((0.1,), (0.3,))), _result("autosvd", rmses=(0.8,),
                                                                     secs=((0.4,),))]
    evaluation.emit_report(results, tmp_path)
    rows = evaluation.read_tsv(tmp_path / "results.tsv")
    assert [r["variant"] for r in rows] == ["biased_svd", "autosvd"]
    assert float(rows[0]["mean_rmse"]) == pytest.approx(0.91, abs=1e-6)
    assert rows[0]["rmse_per_repetition"] == "0.900000,0.920000"
    timing = evaluation.read_tsv(tmp_path / "timing.tsv")
    assert float(timing[0]["ratio_to_biased_svd"]) == 1.0
    assert float(timing[1]["ratio_to_biased_svd"]) == pytest.approx(2.0)


def test_accuracy_table_shape(tmp_path):
    # four methods on one dataset and split, one row each
    results = [_result(v) for v in factor.VARIANTS]
    evaluation.emit_report(results, tmp_path)
    acc = evaluation.read_tsv(tmp_path / "accuracy.tsv")
    assert [r["method"] for r in acc] == list(factor.VARIANTS)
    assert {r["dataset"] for r in acc} == {"ml-100k"}
    assert {r["train_fraction"] for r in acc} == {"0.9"}


def test_benchmark_shape_and_ratio(make_ratings, tmp_path):
    ds = make_ratings(30, 40, 300, seed=5)
    feats = np.random.default_rng(1).random((40, 10))
    entries = [("biased_svd", "naive"), ("autosvdpp", "naive"), ("autosvdpp", "efficient")]
    rows = evaluation.benchmark_epoch(entries, ds, feats, repeats=2)
    assert [r.method for r in rows] == ["biased_svd", "autosvdpp", "autosvdpp[efficient]"]
    assert rows[0].ratio == 1.0 and all(r.seconds > 0 for r in rows)
    evaluation.emit_report([], tmp_path, rows)
    timing = evaluation.read_tsv(tmp_path / "timing.tsv")
    assert len(timing) == 3 and timing[0]["ratio_to_biased_svd"] == "1.0000"
