"""Datasets: synthetic generators, CSV ingestion, PCA reduction, bias column, cache.

All randomness goes through ``numpy.random.Philox`` (counter-based, stable
across numpy releases), seeded by the caller.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.decomposition import PCA

from .artifacts import array_hash, compute_hash, load_json, write_json
from .config import resolve_path
from .errors import DatasetError
from .logger import get_logger

log = get_logger(__name__)

RNG_NAME = "numpy.random.Philox"


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True, eq=False)
class Dataset:
    X_train: np.ndarray
    Y_train: np.ndarray
    X_test: Optional[np.ndarray] = None
    Y_test: Optional[np.ndarray] = None
    task: Task = Task.REGRESSION
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X, Y = _as_matrix(self.X_train), _as_matrix(self.Y_train)
        if X.shape[0] != Y.shape[0]:
            raise DatasetError(f"X_train has {X.shape[0]} rows, Y_train has {Y.shape[0]}")
        object.__setattr__(self, "X_train", X)
        object.__setattr__(self, "Y_train", Y)
        object.__setattr__(self, "task", Task(self.task))
        if (self.X_test is None) != (self.Y_test is None):
            raise DatasetError("X_test and Y_test must be given together")
        if self.X_test is not None:
            Xt, Yt = _as_matrix(self.X_test), _as_matrix(self.Y_test)
            if Xt.shape[1] != X.shape[1] or Yt.shape[1] != Y.shape[1]:
                raise DatasetError("train and test column dimensions differ")
            if Xt.shape[0] != Yt.shape[0]:
                raise DatasetError(f"X_test has {Xt.shape[0]} rows, Y_test has {Yt.shape[0]}")
            object.__setattr__(self, "X_test", Xt)
            object.__setattr__(self, "Y_test", Yt)
        for name in ("X_train", "Y_train", "X_test", "Y_test"):
            a = getattr(self, name)
            if a is not None and not np.all(np.isfinite(a)):
                raise DatasetError(f"{name} contains non-finite entries")
        if self.task is Task.CLASSIFICATION:
            for Ya in (self.Y_train, self.Y_test):
                if Ya is not None and Ya.size and not _is_one_hot(Ya):
                    raise DatasetError("classification labels must be one-hot")

    @property
    def n(self):
        return self.X_train.shape[0]

    @property
    def d(self):
        return self.X_train.shape[1]

    @property
    def c(self):
        return self.Y_train.shape[1]

    @property
    def has_test(self):
        return self.X_test is not None

    @property
    def name(self):
        return self.meta.get("name", "dataset")

    def manifest(self):
        out = dict(self.meta)
        out.update({
            "task": self.task.value,
            "shapes": {
                "X_train": list(self.X_train.shape),
                "Y_train": list(self.Y_train.shape),
                "X_test": list(self.X_test.shape) if self.has_test else None,
                "Y_test": list(self.Y_test.shape) if self.has_test else None,
            },
            "hash": dataset_hash(self),
        })
        return out


def _as_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _is_one_hot(Y):
    return bool(np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=1) == 1))


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def one_hot(labels, classes=None):
    labels = np.asarray(labels)
    classes = np.unique(labels) if classes is None else np.asarray(classes)
    Y = (labels[:, None] == classes[None, :]).astype(float)
    return Y, classes


def dataset_hash(ds: Dataset):
    return array_hash(ds.X_train, ds.Y_train, ds.X_test, ds.Y_test)


def gen_random(seed, n=25, d=2, c=5, hidden=100):
    """Regression data labelled by a random two-layer ReLU network."""
    rng = rng_for(seed)
    X = rng.standard_normal((n, d))
    Ug = rng.standard_normal((d, hidden))
    Vg = rng.standard_normal((hidden, c))
    Y = np.maximum(X @ Ug, 0.0) @ Vg
    meta = {"name": "random", "seed": seed, "rng": RNG_NAME,
            "generator": {"n": n, "d": d, "c": c, "hidden": hidden},
            "steps": ["gen_random"]}
    return Dataset(X, Y, task=Task.REGRESSION, meta=meta)


def gen_spiral(seed, points_per_class=20, classes=3, omega=1.5, noise=0.1,
               t_min=0.05, t_max=1.0):
    """Interleaved spirals; class k sits at angle 2*pi*t*omega + 2*pi*k/classes."""
    rng = rng_for(seed)
    t = np.linspace(t_min, t_max, points_per_class)
    X, labels = [], []
    for k in range(classes):
        theta = 2 * np.pi * t * omega + 2 * np.pi * k / classes
        if noise > 0:
            theta = theta + noise * rng.standard_normal(points_per_class)
        X.append(np.column_stack([t * np.cos(theta), t * np.sin(theta)]))
        labels.append(np.full(points_per_class, k))
    X = np.vstack(X)
    Y, _ = one_hot(np.concatenate(labels), np.arange(classes))
    meta = {"name": "spiral", "seed": seed, "rng": RNG_NAME,
            "generator": {"points_per_class": points_per_class, "classes": classes,
                          "omega": omega, "noise": noise, "t_min": t_min, "t_max": t_max},
            "steps": ["gen_spiral"]}
    return Dataset(X, Y, task=Task.CLASSIFICATION, meta=meta)


def load_csv(path, label_column, split_seed, train_count=None, limit=None, name=None):
    """Numeric features + categorical label, one-hot encoded, shuffled 50/50 split.

    The train split gets floor(N/2) rows unless ``train_count`` overrides it.
    ``label_column`` is a header name or a 0-based column position.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"{path}: cannot parse CSV ({e})") from e
    if limit is not None:
        df = df.iloc[: int(limit)]
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.isdigit()
                                         and label_column not in df.columns):
        label_column = df.columns[int(label_column)]
    if label_column not in df.columns:
        raise DatasetError(f"{path}: no label column {label_column!r}")
    if df.isna().any().any():
        bad = df.columns[df.isna().any()].tolist()
        raise DatasetError(f"{path}: missing cells in columns {bad}")

    features = df.drop(columns=[label_column])
    try:
        X = features.apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise DatasetError(f"{path}: non-numeric feature cell ({e})") from e
    labels = df[label_column].astype(str).to_numpy()
    Y, classes = one_hot(labels)
    if classes.size < 2:
        raise DatasetError(f"{path}: need at least two classes, found {classes.tolist()}")

    N = X.shape[0]
    n_train = N // 2 if train_count is None else int(train_count)
    if not 0 < n_train < N:
        raise DatasetError(f"{path}: train count {n_train} invalid for {N} rows")
    perm = rng_for(split_seed).permutation(N)
    tr, te = perm[:n_train], perm[n_train:]
    counts = {str(k): int(v) for k, v in zip(classes, Y.sum(axis=0))}
    meta = {"name": name or path.stem, "source": str(path), "file_sha256": compute_hash(path),
            "label_column": str(label_column), "classes": classes.tolist(),
            "class_counts": counts, "split_seed": split_seed, "rng": RNG_NAME,
            "train_count": n_train, "limit": limit, "steps": ["load_csv"]}
    log.info(f"Loaded {path.name}: {N} rows, {X.shape[1]} features, "
             f"{classes.size} classes, train={n_train}")
    return Dataset(X[tr], Y[tr], X[te], Y[te], Task.CLASSIFICATION, meta)


def pca_reduce(X_train, X_test, k):
    """Project both splits on the top-k principal axes of the centred train matrix.

    Each axis is signed so its largest-magnitude component is positive.
    """
    X_train = np.asarray(X_train, dtype=float)
    if X_train.shape[0] == 0:
        raise DatasetError("PCA needs a nonempty train matrix")
    d = X_train.shape[1]
    if not 1 <= k <= d:
        raise DatasetError(f"PCA components k={k} must lie in [1, {d}]")
    pca = PCA(n_components=k, svd_solver="full").fit(X_train)
    comps = pca.components_.copy()
    lead = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(k), lead])[:, None]
    mean = pca.mean_
    Z_train = (X_train - mean) @ comps.T
    Z_test = None if X_test is None else (np.asarray(X_test, dtype=float) - mean) @ comps.T
    manifest = {"k": k, "mean": mean.tolist(), "components": comps.tolist(),
                "explained_variance_ratio": pca.explained_variance_ratio_.tolist()}
    return Z_train, Z_test, manifest


def apply_pca(ds: Dataset, k):
    Z_train, Z_test, manifest = pca_reduce(ds.X_train, ds.X_test, k)
    meta = dict(ds.meta)
    meta["steps"] = list(meta.get("steps", [])) + [f"pca_{k}"]
    meta["pca"] = {"k": k, "explained_variance_ratio": manifest["explained_variance_ratio"]}
    return replace(ds, X_train=Z_train, X_test=Z_test, meta=meta)


def load_mnist(path, split_seed, limit=2000, components=20, label_column="label"):
    """First ``limit`` rows of an MNIST CSV, split 50/50, PCA fitted on train."""
    ds = load_csv(path, label_column, split_seed, limit=limit, name="mnist")
    return apply_pca(ds, components)


def add_bias(ds: Dataset):
    if ds.meta.get("bias"):
        raise DatasetError(f"{ds.name}: bias column already added")
    if ds.n == 0:
        raise DatasetError(f"{ds.name}: cannot add a bias column to an empty dataset")

    def aug(X):
        return None if X is None else np.hstack([X, np.ones((X.shape[0], 1))])

    meta = dict(ds.meta)
    meta["bias"] = True
    meta["steps"] = list(meta.get("steps", [])) + ["add_bias"]
    return replace(ds, X_train=aug(ds.X_train), X_test=aug(ds.X_test), meta=meta)


def cache_dataset(ds: Dataset, cache_dir):
    """Store ``ds`` as <hash>.npz plus <hash>.json manifest; returns the npz path."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    h = dataset_hash(ds)
    npz = cache_dir / f"{h[:16]}.npz"
    if not npz.exists():
        arrays = {"X_train": ds.X_train, "Y_train": ds.Y_train}
        if ds.has_test:
            arrays.update(X_test=ds.X_test, Y_test=ds.Y_test)
        with open(npz, "wb") as f:
            np.savez(f, **arrays)
        write_json(npz.with_suffix(".json"), ds.manifest())
        log.info(f"Cached {ds.name} -> {npz}")
    return npz


def load_cached(path):
    path = Path(path)
    meta = load_json(path.with_suffix(".json"))
    with np.load(path) as z:
        arrays = {k: z[k] for k in z.files}
    info = {k: v for k, v in meta.items() if k not in ("shapes", "hash", "task")}
    ds = Dataset(arrays["X_train"], arrays["Y_train"], arrays.get("X_test"),
                 arrays.get("Y_test"), Task(meta["task"]), info)
    if dataset_hash(ds) != meta["hash"]:
        raise DatasetError(f"{path}: cached arrays do not match their manifest hash")
    return ds


def resolve_dataset(source, seed=0, registry=None, split_seed=0):
    """Build a dataset from ``random``, ``spiral``, a registry name or a CSV path."""
    registry = registry or {}
    key = str(source).lower()
    if key == "random":
        return gen_random(seed)
    if key == "spiral":
        return gen_spiral(seed)
    if key in registry:
        entry = dict(registry[key])
        path = resolve_path(entry.pop("path"))
        if entry.pop("kind", "csv") == "mnist":
            return load_mnist(path, split_seed, **entry)
        return load_csv(path, entry.pop("label_column", -1), split_seed, name=key, **entry)
    path = Path(source)
    if path.suffix == ".npz":
        return load_cached(path)
    if path.exists():
        return load_csv(path, -1, split_seed)
    raise DatasetError(f"unknown dataset {source!r} (not a generator, registry entry or file)")
