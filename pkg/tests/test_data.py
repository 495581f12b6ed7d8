import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sdpnn.data import (
    Dataset,
    Task,
    add_bias,
    apply_pca,
    cache_dataset,
    dataset_hash,
    gen_random,
    gen_spiral,
    load_cached,
    load_csv,
    pca_reduce,
    resolve_dataset,
)
from sdpnn.errors import DatasetError


def test_gen_random_shapes_and_determinism():
    a = gen_random(7)
    assert a.X_train.shape == (25, 2) and a.Y_train.shape == (25, 5)
    assert a.task is Task.REGRESSION and not a.has_test
    b = gen_random(7)
    assert_array_equal(a.X_train, b.X_train)
    assert_array_equal(a.Y_train, b.Y_train)
    assert not np.array_equal(a.X_train, gen_random(8).X_train)
    assert a.meta["generator"]["hidden"] == 100


def test_gen_random_overrides():
    ds = gen_random(0, n=6, d=3, c=1, hidden=4)
    assert (ds.n, ds.d, ds.c) == (6, 3, 1)


def test_gen_spiral_layout():
    ds = gen_spiral(1)
    assert ds.X_train.shape == (60, 2) and ds.Y_train.shape == (60, 3)
    assert_array_equal(ds.Y_train.sum(axis=0), [20, 20, 20])
    assert_array_equal(ds.Y_train.sum(axis=1), np.ones(60))
    assert_array_equal(ds.X_train, gen_spiral(1).X_train)


def test_gen_spiral_radius_without_noise():
    ds = gen_spiral(0, noise=0.0)
    t = np.linspace(0.05, 1.0, 20)
    assert_allclose(np.linalg.norm(ds.X_train, axis=1), np.tile(t, 3))


def test_load_csv_split_and_encoding(toy_csv):
    ds = load_csv(toy_csv, "label", split_seed=0)
    assert ds.X_train.shape == (6, 2) and ds.X_test.shape == (6, 2)
    assert ds.Y_train.shape == (6, 2)
    assert ds.task is Task.CLASSIFICATION
    assert ds.meta["classes"] == ["a", "b"]
    assert ds.meta["class_counts"] == {"a": 6, "b": 6}
    again = load_csv(toy_csv, "label", split_seed=0)
    assert_array_equal(ds.X_train, again.X_train)
    other = load_csv(toy_csv, "label", split_seed=1)
    assert not np.array_equal(ds.X_train, other.X_train)


def test_load_csv_options(toy_csv):
    ds = load_csv(toy_csv, -1, split_seed=0, train_count=4)
    assert ds.n == 4 and ds.X_test.shape[0] == 8
    ds = load_csv(toy_csv, "label", split_seed=0, limit=8)
    assert ds.n == 4 and ds.meta["class_counts"] == {"a": 6, "b": 2}


def test_load_csv_errors(tmp_path, toy_csv):
    df = pd.read_csv(toy_csv)
    df.loc[3, "x1"] = np.nan
    missing = tmp_path / "missing.csv"
    df.to_csv(missing, index=False)
    with pytest.raises(DatasetError, match="missing"):
        load_csv(missing, "label", 0)

    single = tmp_path / "single.csv"
    pd.DataFrame({"x": [1.0, 2.0, 3.0], "label": ["a", "a", "a"]}).to_csv(single, index=False)
    with pytest.raises(DatasetError, match="two classes"):
        load_csv(single, "label", 0)

    with pytest.raises(DatasetError):
        load_csv(toy_csv, "nope", 0)
    with pytest.raises(DatasetError):
        load_csv(toy_csv, "label", 0, train_count=12)


def test_pca_reduce_sign_convention_and_projection():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5)) @ rng.standard_normal((5, 5))
    Xt = rng.standard_normal((10, 5))
    Z, Zt, manifest = pca_reduce(X, Xt, 3)
    assert Z.shape == (40, 3) and Zt.shape == (10, 3)
    comps = np.array(manifest["components"])
    lead = comps[np.arange(3), np.argmax(np.abs(comps), axis=1)]
    assert (lead > 0).all()
    assert_allclose(comps @ comps.T, np.eye(3), atol=1e-10)
    assert_allclose(Z, (X - X.mean(axis=0)) @ comps.T, atol=1e-10)
    # variance is sorted by component
    var = Z.var(axis=0)
    assert (np.diff(var) <= 1e-12).all()
    with pytest.raises(DatasetError):
        pca_reduce(X, Xt, 6)


def test_apply_pca_records_step(toy_csv):
    ds = apply_pca(load_csv(toy_csv, "label", 0), 1)
    assert ds.d == 1 and ds.X_test.shape == (6, 1)
    assert ds.meta["steps"][-1] == "pca_1"


def test_add_bias_once(toy_csv):
    ds = add_bias(load_csv(toy_csv, "label", 0))
    assert ds.d == 3
    assert_array_equal(ds.X_train[:, -1], 1.0)
    assert_array_equal(ds.X_test[:, -1], 1.0)
    with pytest.raises(DatasetError):
        add_bias(ds)


def test_dataset_invariants():
    with pytest.raises(DatasetError):
        Dataset(np.ones((3, 2)), np.ones((2, 1)))
    with pytest.raises(DatasetError):
        Dataset(np.ones((2, 1)), np.array([[1.0, 1.0], [0.0, 1.0]]), task=Task.CLASSIFICATION)
    with pytest.raises(DatasetError):
        Dataset(np.ones((2, 1)), np.ones((2, 1)), X_test=np.ones((2, 1)))


def test_cache_round_trip(tmp_path):
    ds = gen_spiral(3)
    path = cache_dataset(ds, tmp_path)
    assert path.exists() and path.with_suffix(".json").exists()
    back = load_cached(path)
    assert dataset_hash(back) == dataset_hash(ds)
    assert back.task is Task.CLASSIFICATION
    assert cache_dataset(ds, tmp_path) == path


def test_resolve_dataset(toy_csv):
    assert resolve_dataset("random", seed=1).n == 25
    assert resolve_dataset("Spiral").n == 60
    reg = {"toy": {"path": str(toy_csv), "label_column": "label", "train_count": 5}}
    ds = resolve_dataset("toy", registry=reg)
    assert ds.n == 5 and ds.name == "toy"
    assert resolve_dataset(str(toy_csv)).n == 6
    with pytest.raises(DatasetError):
        resolve_dataset("no-such-dataset")
