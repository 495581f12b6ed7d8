"""Lifted SDP formulation of two-layer ReLU training.

The decision variable is a symmetric p x p matrix Lambda, p = 2n + d + c, whose
rows and columns are laid out in four blocks:

    [ alpha (n) | beta (n) | u (d) | v (c) ]

Selection matrices are 0/1 row selectors and are stored as index arrays, so
every product P Lambda P^T is a slice ``Lambda[np.ix_(rows, cols)]``.
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, NonFiniteInputError, NumericalFailure
from .logger import get_logger
from .network import NetworkWeights, relu_split

log = get_logger(__name__)

ASYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class SelectionSet:
    n: int
    d: int
    c: int

    @property
    def p(self):
        return 2 * self.n + self.d + self.c

    @cached_property
    def alpha(self):
        return np.arange(0, self.n)

    @cached_property
    def beta(self):
        return np.arange(self.n, 2 * self.n)

    @cached_property
    def u(self):
        return np.arange(2 * self.n, 2 * self.n + self.d)

    @cached_property
    def v(self):
        return np.arange(2 * self.n + self.d, self.p)

    @cached_property
    def ab(self):
        return np.arange(0, 2 * self.n)

    def index(self, block):
        if block not in ("alpha", "beta", "u", "v", "ab"):
            raise KeyError(f"unknown block {block!r}")
        return getattr(self, block)

    def dense(self, block):
        """Dense 0/1 selection matrix of ``block`` (rows select columns)."""
        idx = self.index(block)
        P = np.zeros((idx.size, self.p))
        P[np.arange(idx.size), idx] = 1.0
        return P

    def sub(self, Lambda, rows, cols=None):
        """P_rows Lambda P_cols^T as a slice."""
        cols = rows if cols is None else cols
        return Lambda[np.ix_(self.index(rows), self.index(cols))]


def build_selection_matrices(n, d, c):
    for name, val in (("n", n), ("d", d), ("c", c)):
        if int(val) < 1:
            raise DimensionError(f"{name} must be >= 1, got {val}")
    return SelectionSet(int(n), int(d), int(c))


@dataclass(frozen=True, eq=False)
class LiftedProblem:
    sel: SelectionSet
    M: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    gamma: float
    A0: np.ndarray
    bias: bool = False

    @property
    def p(self):
        return self.sel.p

    @cached_property
    def trace_bound(self):
        """Upper bound on trace(Lambda) at any optimum (inf when gamma == 0).

        Lambda = 0 is feasible, so (gamma/2)(tr L_uu + tr L_vv) <= ||Y||^2, and
        feasibility forces tr L_aa + tr L_bb = tr(X L_uu X^T) <= ||X||_2^2 tr L_uu.
        """
        if self.gamma <= 0:
            return float("inf")
        xnorm2 = float(linalg.norm(self.X, 2) ** 2)
        return (1.0 + xnorm2) * 2.0 * float(np.sum(self.Y**2)) / self.gamma


def build_problem(X, Y, gamma, bias=False):
    X = np.atleast_2d(np.array(X, dtype=float))
    Y = np.atleast_2d(np.array(Y, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise NonFiniteInputError("X and Y must be finite")
    if not gamma >= 0:
        raise ConfigError("gamma", f"must be >= 0, got {gamma}")
    if bias:
        X = np.hstack([X, np.ones((X.shape[0], 1))])

    n, d = X.shape
    sel = build_selection_matrices(n, d, Y.shape[1])
    rows = np.arange(n)
    M = np.zeros((n, sel.p))
    M[rows, sel.alpha] = -1.0
    M[rows, sel.beta] = 1.0
    M[:, sel.u] = X

    A0 = M.T @ M
    A0[sel.alpha, sel.beta] += 0.5
    A0[sel.beta, sel.alpha] += 0.5
    A0 = 0.5 * (A0 + A0.T)

    for a in (X, Y, M, A0):
        a.setflags(write=False)
    return LiftedProblem(sel, M, X, Y, float(gamma), A0, bool(bias))


def as_symmetric(Lambda, p):
    """Validate shape and return (Lambda + Lambda^T)/2, warning on visible asymmetry."""
    Lambda = np.asarray(Lambda, dtype=float)
    if Lambda.shape != (p, p):
        raise DimensionError(f"Lambda has shape {Lambda.shape}, expected ({p}, {p})")
    asym = float(np.max(np.abs(Lambda - Lambda.T))) if Lambda.size else 0.0
    if asym > ASYMMETRY_TOL:
        msg = f"Lambda is not symmetric (max |L - L^T| = {asym:.3e}); symmetrizing"
        log.warning(msg)
        warnings.warn(msg, UserWarning, stacklevel=3)
    return 0.5 * (Lambda + Lambda.T)


def objective(prob: LiftedProblem, Lambda):
    L = as_symmetric(Lambda, prob.p)
    sel = prob.sel
    fit = np.sum((sel.sub(L, "alpha", "v") - prob.Y) ** 2)
    reg = np.trace(sel.sub(L, "u")) + np.trace(sel.sub(L, "v"))
    return float(fit + 0.5 * prob.gamma * reg)


def residuals(prob: LiftedProblem, Lambda):
    """(eq_residual, min_eig, min_nonneg) of a candidate Lambda."""
    L = as_symmetric(Lambda, prob.p)
    if not np.all(np.isfinite(L)):
        raise NumericalFailure("Lambda contains non-finite entries")
    eq = float(np.sum(prob.A0 * L))
    try:
        min_eig = float(linalg.eigvalsh(L)[0])
    except linalg.LinAlgError as e:
        raise NumericalFailure(f"eigendecomposition failed: {e}") from e
    min_nonneg = float(np.min(prob.sel.sub(L, "ab")))
    return eq, min_eig, min_nonneg


def critical_width(n, d, c):
    build_selection_matrices(n, d, c)
    return max(2 * n + d + c, 2 * n * n + n - 1)


def lift_weights(prob: LiftedProblem, w: NetworkWeights):
    """Exact lift factor (p x m): column j is [(Xu_j)_+; (Xu_j)_+ - Xu_j; u_j; v_j]."""
    sel = prob.sel
    if w.d != sel.d or w.c != sel.c:
        raise DimensionError(
            f"network is {w.d}->{w.c}, problem expects {sel.d}->{sel.c}"
        )
    lam = np.zeros((sel.p, w.m))
    XU = prob.X @ w.U
    for j in range(w.m):
        alpha, beta = relu_split(XU[:, j])
        lam[sel.alpha, j] = alpha
        lam[sel.beta, j] = beta
    lam[sel.u] = w.U
    lam[sel.v] = w.V
    return lam


def lift_matrix(prob: LiftedProblem, w: NetworkWeights):
    lam = lift_weights(prob, w)
    return lam @ lam.T


def problem_metadata(prob: LiftedProblem, dataset_hash=None):
    s = prob.sel
    return {
        "n": s.n,
        "d": s.d,
        "c": s.c,
        "p": s.p,
        "variables": s.p * s.p,
        "gamma": prob.gamma,
        "bias": prob.bias,
        "critical_width": critical_width(s.n, s.d, s.c),
        "dataset_hash": dataset_hash,
    }


class SolverStatus(str, Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True, eq=False)
class LiftedSolution:
    Lambda: np.ndarray
    objective: float
    eq_residual: float
    min_eig: float
    min_nonneg: float
    dual_bound: float
    status: SolverStatus
    iterations: int = 0

    def summary(self):
        return {
            "objective": self.objective,
            "eq_residual": self.eq_residual,
            "min_eig": self.min_eig,
            "min_nonneg": self.min_nonneg,
            "dual_bound": self.dual_bound,
            "status": self.status.value,
            "iterations": self.iterations,
        }
