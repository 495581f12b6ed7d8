"""Two-layer ReLU network: forward pass, training loss, ReLU split and SGD baseline.

The network is psi(x) = sum_j (x^T u_j)_+ v_j^T with first-layer weights as the
columns of U (d x m) and second-layer weights as the columns of V (c x m).
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DimensionError, NonFiniteInputError, TrainingDivergence
from .logger import get_logger

log = get_logger(__name__)


@dataclass(frozen=True)
class NetworkWeights:
    U: np.ndarray
    V: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if U.shape[1] != V.shape[1]:
            raise DimensionError(
                f"U has {U.shape[1]} neurons but V has {V.shape[1]}"
            )
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise NonFiniteInputError("network weights contain non-finite entries")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def m(self):
        return self.U.shape[1]

    @property
    def d(self):
        return self.U.shape[0]

    @property
    def c(self):
        return self.V.shape[0]

    @classmethod
    def zeros(cls, d, c, m=0):
        return cls(np.zeros((d, m)), np.zeros((c, m)))

    def scaled(self, t):
        """First layer scaled by t (positive homogeneity of the ReLU)."""
        return NetworkWeights(t * self.U, self.V.copy(), dict(self.provenance))

    def to_dict(self):
        return {
            "d": self.d,
            "c": self.c,
            "m": self.m,
            "U": self.U.tolist(),
            "V": self.V.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data):
        d, c, m = int(data["d"]), int(data["c"]), int(data["m"])
        U = np.asarray(data["U"], dtype=float).reshape(d, m)
        V = np.asarray(data["V"], dtype=float).reshape(c, m)
        return cls(U, V, dict(data.get("provenance", {})))


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 1e-3
    iters: int = 8000
    batch: Union[int, str] = "full"
    seed: int = 0
    init_scale: float = 1.0
    restarts: int = 5

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("sgd.lr", f"must be > 0, got {self.lr}")
        if int(self.iters) < 1:
            raise ConfigError("sgd.iters", f"must be >= 1, got {self.iters}")
        if int(self.restarts) < 1:
            raise ConfigError("sgd.restarts", f"must be >= 1, got {self.restarts}")
        if self.batch != "full" and int(self.batch) < 1:
            raise ConfigError("sgd.batch", f"must be 'full' or >= 1, got {self.batch}")

    @property
    def full_batch(self):
        return self.batch == "full"


def _check_shapes(X, w, Y=None):
    if X.ndim != 2 or X.shape[1] != w.d:
        raise DimensionError(f"X has shape {X.shape}, network expects {w.d} inputs")
    if Y is not None and (Y.shape[0] != X.shape[0] or Y.shape[1] != w.c):
        raise DimensionError(
            f"Y has shape {Y.shape}, expected ({X.shape[0]}, {w.c})"
        )


def relu(z):
    return np.maximum(z, 0.0)


def forward(X, w: NetworkWeights):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_shapes(X, w)
    return relu(X @ w.U) @ w.V.T


def training_loss(X, Y, w: NetworkWeights, gamma):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    _check_shapes(X, w, Y)
    R = forward(X, w) - Y
    reg = 0.5 * gamma * (np.sum(w.U**2) + np.sum(w.V**2))
    return float(np.sum(R**2) + reg)


def loss_gradient(X, Y, w: NetworkWeights, gamma, scale=1.0):
    """Analytic (sub)gradient of training_loss; ReLU subgradient at 0 is 0.

    ``scale`` multiplies the data term only (n / batch for a minibatch).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    _check_shapes(X, w, Y)
    Z = X @ w.U
    H = relu(Z)
    R = H @ w.V.T - Y
    gV = scale * 2.0 * R.T @ H + gamma * w.V
    gU = scale * X.T @ ((2.0 * R @ w.V) * (Z > 0)) + gamma * w.U
    return gU, gV


def relu_split(xu):
    """Split Xu into alpha = (Xu)_+ and beta = (Xu)_+ - Xu.

    Both parts are nonnegative, alpha - beta == Xu and <alpha, beta> == 0 exactly.
    """
    xu = np.asarray(xu, dtype=float)
    if not np.all(np.isfinite(xu)):
        raise NonFiniteInputError("relu_split input contains non-finite entries")
    alpha = np.maximum(xu, 0.0)
    beta = alpha - xu
    return alpha, beta


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _train_once(X, Y, gamma, m, cfg: SgdConfig, seed):
    n, d = X.shape
    c = Y.shape[1]
    rng = _rng(seed)
    U = cfg.init_scale * rng.standard_normal((d, m))
    V = cfg.init_scale * rng.standard_normal((c, m))
    record_every = max(1, cfg.iters // 1000)
    batch = n if cfg.full_batch else min(int(cfg.batch), n)
    curve = []
    progress_every = max(1, cfg.iters // 10)

    w = NetworkWeights(U, V)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            for it in range(cfg.iters):
                if batch < n:
                    idx = rng.choice(n, size=batch, replace=False)
                    Xb, Yb, scale = X[idx], Y[idx], n / batch
                else:
                    Xb, Yb, scale = X, Y, 1.0
                gU, gV = loss_gradient(Xb, Yb, w, gamma, scale)
                w = NetworkWeights(w.U - cfg.lr * gU, w.V - cfg.lr * gV)
                if it % record_every == 0 or it == cfg.iters - 1:
                    loss = training_loss(X, Y, w, gamma)
                    if not np.isfinite(loss):
                        return None, curve
                    curve.append(loss)
                if it % progress_every == 0:
                    log.debug(f"sgd iter={it} loss={curve[-1]:.6e}")
        except NonFiniteInputError:
            return None, curve
    return w, curve


def sgd_train(X, Y, gamma, m, cfg: Optional[SgdConfig] = None):
    """Gradient-descent baseline; best of ``cfg.restarts`` random initializations.

    Returns (weights, loss_curve) of the restart with the lowest final loss.
    Raises TrainingDivergence if every restart diverges.
    """
    cfg = cfg or SgdConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    if int(m) < 1:
        raise ConfigError("width", f"must be >= 1, got {m}")

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best, best_curve, finals = None, None, []
    for k, ss in enumerate(seeds):
        w, curve = _train_once(X, Y, gamma, int(m), cfg, ss)
        if w is None:
            log.warning(f"SGD restart {k} diverged after {len(curve)} records")
            finals.append(float("inf"))
            continue
        finals.append(curve[-1])
        log.debug(f"SGD restart {k}: final loss {curve[-1]:.6g}")
        if best is None or curve[-1] < best_curve[-1]:
            best, best_curve = w, curve

    if best is None:
        raise TrainingDivergence(
            f"all {cfg.restarts} SGD restarts diverged (lr={cfg.lr})", finals
        )
    log.info(f"SGD m={m} gamma={gamma}: best final loss {best_curve[-1]:.6g} "
             f"over {cfg.restarts} restarts")
    prov = {"method": "sgd", "width": int(m), "gamma": gamma, "lr": cfg.lr,
            "iters": cfg.iters, "seed": cfg.seed, "restart_losses": finals}
    return NetworkWeights(best.U, best.V, prov), np.asarray(best_curve)


def sgd_sweep(X, Y, gamma, widths=(5, 10, 100, 200, 300), cfg=None):
    """Best final loss per width, for the full approximation-ratio table."""
    return {int(m): sgd_train(X, Y, gamma, m, cfg)[1][-1] for m in widths}
