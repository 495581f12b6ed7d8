"""Rounding of a lifted solution back to network weights.

Find lam (p x R) minimizing phi(lam) = ||Lambda* - lam lam^T||_F^2 over
D1 = {alpha, beta rows nonnegative, alpha * beta = 0} and D2 = {M lam = 0},
with the three-operator splitting iteration

    lam_k   = proj_D1(bar_k)
    hat_k   = proj_D2(2 lam_k - bar_k - eta * grad_phi(lam_k))
    bar_k+1 = bar_k - lam_k + hat_k
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, NumericalFailure
from .lifted import LiftedProblem, SelectionSet
from .logger import get_logger
from .network import NetworkWeights

log = get_logger(__name__)

PRUNE_TOL = 1e-10
RANK_TOL = 1e-12
# ||Hessian of phi||_2 <= 8 ||Lambda*||_2 at any exact factorization
LIPSCHITZ_FACTOR = 8.0


class TieBreak(str, Enum):
    KEEP_ALPHA = "keep_alpha"
    LITERAL = "literal"


@dataclass(frozen=True)
class RoundingOptions:
    R: int = 300
    iters: int = 1000
    step_eta: Union[float, str] = "auto"
    tie_break: TieBreak = TieBreak.KEEP_ALPHA

    def __post_init__(self):
        if int(self.R) < 1:
            raise ConfigError("rounding.R", f"must be >= 1, got {self.R}")
        if int(self.iters) < 1:
            raise ConfigError("rounding.iters", f"must be >= 1, got {self.iters}")
        if self.step_eta != "auto" and not float(self.step_eta) > 0:
            raise ConfigError("rounding.step_eta",
                              f"must be 'auto' or > 0, got {self.step_eta}")
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    lam: np.ndarray
    best_iteration: int = 0
    best_phi: float = float("nan")
    last_phi: float = float("nan")

    def __post_init__(self):
        if not np.all(np.isfinite(self.lam)):
            raise NumericalFailure("factor matrix contains non-finite entries")

    @property
    def R(self):
        return self.lam.shape[1]

    @property
    def p(self):
        return self.lam.shape[0]


def _check_rows(lam, p):
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 2 or lam.shape[0] != p:
        raise DimensionError(f"factor has shape {lam.shape}, expected ({p}, R)")
    return lam


def proj_D1(lam, sel: SelectionSet, tie_break=TieBreak.KEEP_ALPHA):
    lam = _check_rows(lam, sel.p)
    tie_break = TieBreak(tie_break)
    a = lam[sel.alpha]
    b = lam[sel.beta]
    new_a = np.where((a < 0) | (b > a), 0.0, a)
    new_b = np.where((b < 0) | (a > b), 0.0, b)
    if tie_break is TieBreak.KEEP_ALPHA:
        new_b = np.where((a == b) & (a > 0), 0.0, new_b)
    out = lam.copy()
    out[sel.alpha] = new_a
    out[sel.beta] = new_b
    return out


class NullspaceProjector:
    """Caches an orthonormal basis of the row space of M; applies I - M^+ M."""

    def __init__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        self.p = M.shape[1]
        try:
            _, s, Vt = linalg.svd(M, full_matrices=False)
        except (linalg.LinAlgError, ValueError) as e:
            raise NumericalFailure(f"SVD of M failed: {e}") from e
        smax = s[0] if s.size else 0.0
        rank = int(np.sum(s > RANK_TOL * smax)) if smax > 0 else 0
        self.basis = Vt[:rank].T
        self.rank = rank

    def __call__(self, lam):
        lam = _check_rows(lam, self.p)
        if self.rank == 0:
            return lam.copy()
        return lam - self.basis @ (self.basis.T @ lam)


def proj_D2(lam, M):
    """(I - M^+ M) lam; ``M`` may be a matrix or a prebuilt NullspaceProjector."""
    proj = M if isinstance(M, NullspaceProjector) else NullspaceProjector(M)
    return proj(lam)


def phi(lam, Lambda_star):
    """||Lambda* - lam lam^T||_F^2; inf once lam has overflowed."""
    lam = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(lam)):
        return float("inf")
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.linalg.norm(Lambda_star - lam @ lam.T) ** 2)


def grad_phi(lam, Lambda_star):
    lam = np.asarray(lam, dtype=float)
    Lambda_star = np.asarray(Lambda_star, dtype=float)
    if Lambda_star.shape != (lam.shape[0], lam.shape[0]):
        raise DimensionError(
            f"Lambda* has shape {Lambda_star.shape}, factor has {lam.shape[0]} rows"
        )
    return 4.0 * (lam @ (lam.T @ lam) - Lambda_star @ lam)


def initial_factor(Lambda_star, sel: SelectionSet, R):
    """Eigen square root of Lambda*, largest eigenvalues first, cut or zero-padded to R.

    Each eigenvector is signed so its alpha/beta rows sum to a nonnegative value.
    """
    w, Q = linalg.eigh(Lambda_star)
    order = np.argsort(w)[::-1]
    w, Q = w[order], Q[:, order]
    wmax = w[0] if w.size else 0.0
    keep = w > RANK_TOL * wmax if wmax > 0 else np.zeros_like(w, dtype=bool)
    w, Q = w[keep], Q[:, keep]
    signs = np.where(Q[sel.ab].sum(axis=0) < 0, -1.0, 1.0)
    F = Q * (signs * np.sqrt(w))
    lam = np.zeros((sel.p, R))
    k = min(R, F.shape[1])
    lam[:, :k] = F[:, :k]
    return lam


def _prepare(Lambda_star, p):
    L = np.asarray(Lambda_star, dtype=float)
    if L.shape != (p, p):
        raise DimensionError(f"Lambda* has shape {L.shape}, expected ({p}, {p})")
    L = 0.5 * (L + L.T)
    w, Q = linalg.eigh(L)
    if w[0] < 0:
        L = (Q * np.maximum(w, 0.0)) @ Q.T
        L = 0.5 * (L + L.T)
    return L


def tos_round(Lambda_star, prob: LiftedProblem, opts: Optional[RoundingOptions] = None):
    """Three-operator-splitting rounding. Returns (FactorMatrix, phi history).

    The returned factor is the proj_D1 iterate with the smallest phi; the
    history holds phi(lam_k) for every iteration. The automatic step is
    1 / (LIPSCHITZ_FACTOR ||Lambda*||_2). A non-finite iterate raises
    NumericalFailure carrying the best finite factor seen so far.
    """
    opts = opts or RoundingOptions()
    sel = prob.sel
    L = _prepare(Lambda_star, sel.p)
    norm2 = float(linalg.norm(L, 2))
    if opts.step_eta == "auto":
        eta = 1.0 / (LIPSCHITZ_FACTOR * norm2) if norm2 > 0 else 1.0
    else:
        eta = float(opts.step_eta)

    proj2 = NullspaceProjector(prob.M)
    bar = initial_factor(L, sel, int(opts.R))
    history = np.empty(opts.iters)
    best_lam = proj_D1(bar, sel, opts.tie_break)
    best_phi, best_k = np.inf, 0
    progress_every = max(1, opts.iters // 10)

    for k in range(opts.iters):
        lam = proj_D1(bar, sel, opts.tie_break)
        val = phi(lam, L)
        if not np.isfinite(val):
            state = FactorMatrix(best_lam, best_k, float(best_phi))
            raise NumericalFailure(f"rounding iterate {k} is not finite", state=state)
        history[k] = val
        if val < best_phi:
            best_lam, best_phi, best_k = lam, val, k
        with np.errstate(over="ignore", invalid="ignore"):
            hat = proj2(2.0 * lam - bar - eta * grad_phi(lam, L))
            bar = bar - lam + hat
        if k % progress_every == 0:
            log.debug(f"round iter={k} phi={val:.6e}")

    log.info(f"round: R={opts.R} iters={opts.iters} eta={eta:.3e} best phi={best_phi:.6e} "
             f"(iter {best_k}), last phi={history[-1]:.6e}")
    fm = FactorMatrix(best_lam, best_k, float(best_phi), float(history[-1]))
    return fm, history


def extract_weights(fm: FactorMatrix, sel: SelectionSet):
    """U = P_u lam, V = P_v lam, dropping columns where both parts vanish."""
    lam = _check_rows(fm.lam, sel.p)
    U = lam[sel.u]
    V = lam[sel.v]
    alive = (linalg.norm(U, axis=0) >= PRUNE_TOL) | (linalg.norm(V, axis=0) >= PRUNE_TOL)
    prov = {"method": "tos_round", "R": fm.R, "best_iteration": fm.best_iteration,
            "best_phi": fm.best_phi}
    return NetworkWeights(U[:, alive], V[:, alive], prov)
