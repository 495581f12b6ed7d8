"""Operator-splitting solver for the lifted SDP relaxation.

Problem:  minimize  f(L) = ||L[alpha, v] - Y||_F^2 + (gamma/2)(tr L[u, u] + tr L[v, v])
          subject to <A0, L> = 0,  L PSD,  L[ab, ab] >= 0 entrywise.

Consensus ADMM over three copies (X, Z1, Z2) of the symmetric-matrix space:

  X-step:  prox of f restricted to the hyperplane <A0, X> = 0, taken at the
           average of the two consensus targets with penalty 2 rho. The Hessian
           of f plus the penalty is diagonal in the entrywise basis, so the step
           is a closed-form scaling followed by one scalar multiplier solve.
  Z1-step: exact projection onto the PSD cone.
  Z2-step: exact clamp of the 2n-block to nonnegative entries.

On exit the PSD copy is polished with Dykstra's alternating projections
(``project_dnn_slab``) so the returned matrix has an exactly nonnegative block.
"""

import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg

from . import lifted
from .artifacts import write_csv
from .errors import ConfigError, NumericalFailure
from .lifted import LiftedProblem, LiftedSolution, SelectionSet, SolverStatus
from .logger import get_logger

log = get_logger(__name__)

RHO_MIN, RHO_MAX = 1e-4, 1e4


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 20000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-5
    penalty_rho: float = 1.0
    adaptive_rho: bool = True
    over_relaxation: float = 1.6
    log_every: int = 100
    max_inner_iters: int = 500
    adapt_every: int = 25
    bound_every: Optional[int] = None

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigError("solver.max_iters", f"must be >= 1, got {self.max_iters}")
        for name in ("eps_abs", "eps_rel", "penalty_rho"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name}", f"must be > 0, got {getattr(self, name)}")
        if not 1.0 <= self.over_relaxation <= 1.9:
            raise ConfigError(
                "solver.over_relaxation", f"must lie in [1.0, 1.9], got {self.over_relaxation}"
            )
        if int(self.max_inner_iters) < 1:
            raise ConfigError("solver.max_inner_iters", "must be >= 1")
        if int(self.adapt_every) < 1:
            raise ConfigError("solver.adapt_every", "must be >= 1")

    @property
    def bound_interval(self):
        return self.bound_every or (self.log_every if self.log_every > 0 else 100)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    primal_res: float
    dual_res: float
    objective: float
    eq_residual: float
    rho: float
    dual_bound: float = float("nan")


@dataclass
class SolverTrace:
    records: List[TraceRecord] = field(default_factory=list)
    seconds: float = 0.0

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def rows(self):
        return [asdict(r) for r in self.records]


def write_trace_csv(trace: SolverTrace, path):
    return write_csv(path, trace.rows(), columns=list(TraceRecord.__dataclass_fields__))


def project_psd(S):
    """Euclidean projection onto the PSD cone by eigenvalue clamping."""
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    try:
        w, Q = linalg.eigh(S)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"eigendecomposition failed in PSD projection: {e}") from e
    if w[0] >= 0:
        return S
    keep = w > 0
    Qk = Q[:, keep]
    P = (Qk * w[keep]) @ Qk.T
    return 0.5 * (P + P.T)


def _clamp_block(S, ab):
    out = S.copy()
    block = out[np.ix_(ab, ab)]
    out[np.ix_(ab, ab)] = np.maximum(block, 0.0)
    return out


def _dykstra(S, sel: SelectionSet, inner_tol, max_iters):
    x = np.asarray(S, dtype=float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    ab = sel.ab
    for k in range(1, max_iters + 1):
        y = project_psd(x + p)
        p = x + p - y
        x_new = _clamp_block(y + q, ab)
        q = y + q - x_new
        gap = linalg.norm(x_new - y)
        step = linalg.norm(x_new - x)
        x = x_new
        # gap bounds the PSD violation of x (Weyl), the clamp makes the block exact
        if gap < inner_tol and step < inner_tol:
            return x, k
    return x, max_iters


def project_dnn_slab(S, sel: SelectionSet, inner_tol, max_iters=500):
    """Approximate projection onto {PSD} cap {L[ab, ab] >= 0} (Dykstra).

    The result has an exactly nonnegative 2n-block and smallest eigenvalue
    >= -inner_tol whenever the alternation converged within ``max_iters``.
    """
    if not inner_tol > 0:
        raise ValueError(f"inner_tol must be > 0, got {inner_tol}")
    x, _ = _dykstra(S, sel, inner_tol, max_iters)
    return x


class _SmoothBlock:
    """Prox of f on the hyperplane <A0, X> = 0, for a fixed penalty rho."""

    def __init__(self, prob: LiftedProblem):
        sel = prob.sel
        p = sel.p
        self.prob = prob
        self.A0 = np.asarray(prob.A0)
        self.fit_mask = np.zeros((p, p), dtype=bool)
        self.fit_mask[np.ix_(sel.alpha, sel.v)] = True
        self.fit_mask[np.ix_(sel.v, sel.alpha)] = True
        self.nonneg_mask = np.zeros((p, p), dtype=bool)
        self.nonneg_mask[np.ix_(sel.ab, sel.ab)] = True
        self.Yfull = np.zeros((p, p))
        self.Yfull[np.ix_(sel.alpha, sel.v)] = prob.Y
        self.Yfull[np.ix_(sel.v, sel.alpha)] = prob.Y.T
        self.reg_idx = np.concatenate([sel.u, sel.v])
        self.factor(1.0)

    def factor(self, rho):
        self.rho = rho
        weights = np.where(self.fit_mask, 1.0 / (1.0 + rho), 1.0 / rho)
        self.C = self.A0 * weights
        self.denom = float(np.sum(self.A0 * self.C))

    def solve(self, V):
        rho, g = self.rho, self.prob.gamma
        B = V.copy()
        B[self.reg_idx, self.reg_idx] -= g / (2.0 * rho)
        m = self.fit_mask
        B[m] = (self.Yfull[m] + rho * V[m]) / (1.0 + rho)
        mu = float(np.sum(self.A0 * B)) / self.denom if self.denom > 0 else 0.0
        return B - mu * self.C, mu

    def gradient(self, Z):
        sel = self.prob.sel
        R = Z[np.ix_(sel.alpha, sel.v)] - self.prob.Y
        G = np.zeros_like(Z)
        G[np.ix_(sel.alpha, sel.v)] = R
        G[np.ix_(sel.v, sel.alpha)] = R.T
        G[self.reg_idx, self.reg_idx] += 0.5 * self.prob.gamma
        return G


def _bound_from(base, min_eig, trace_bound):
    if min_eig >= 0:
        return base
    if np.isinf(trace_bound):
        return float("-inf")
    return base + trace_bound * min_eig


def lagrangian_bound(prob: LiftedProblem, Z, mu, obj=None, N=None, split_iters=10):
    """Certified lower bound on the SDP optimum from the iterate Z and multiplier mu.

    For N >= 0 on the 2n-block and any feasible L with tr L <= T:
      f(L) >= f(Z) - <G, Z> + <G + mu A0 - N, L> >= f(Z) - <G, Z> + T min(0, eig_min)
    ``N`` seeds the multiplier of the nonnegativity constraint; it is refined by
    a few alternating steps and the better of the two bounds is kept. The value
    is capped at ``obj`` (still a valid bound, never above a logged objective).
    """
    block = _SmoothBlock(prob)
    sel = prob.sel
    obj = lifted.objective(prob, Z) if obj is None else obj
    G = block.gradient(Z)
    Q = G + mu * block.A0
    base = obj - float(np.sum(G * Z))
    ab = np.ix_(sel.ab, sel.ab)
    if N is None:
        N = np.zeros_like(Q)
    else:
        N = np.where(block.nonneg_mask, np.maximum(N, 0.0), 0.0)
    best = float("-inf")
    for k in range(split_iters + 1):
        if k > 0:
            S = project_psd(Q - N)
            N = np.zeros_like(Q)
            N[ab] = np.maximum(Q[ab] - S[ab], 0.0)
        min_eig = float(linalg.eigvalsh(0.5 * (Q - N + (Q - N).T))[0])
        best = max(best, _bound_from(base, min_eig, prob.trace_bound))
    return min(best, obj)


def solve(prob: LiftedProblem, opts: Optional[SolverOptions] = None):
    """Solve the lifted SDP. Returns (LiftedSolution, SolverTrace).

    Stopping at ``max_iters`` is reported through ``status``; non-finite
    residuals or a failed eigendecomposition raise NumericalFailure.
    """
    opts = opts or SolverOptions()
    p = prob.p
    sel = prob.sel
    ab = sel.ab
    block = _SmoothBlock(prob)
    rho = float(np.clip(opts.penalty_rho, RHO_MIN, RHO_MAX))
    block.factor(2.0 * rho)
    a = opts.over_relaxation
    a0_norm = float(linalg.norm(block.A0))

    Z1 = np.zeros((p, p))
    Z2 = np.zeros((p, p))
    U1 = np.zeros((p, p))
    U2 = np.zeros((p, p))
    last_good = Z1
    mu = 0.0
    trace = SolverTrace()
    best_bound = float("-inf")
    last_res = float("inf")
    status = SolverStatus.MAX_ITERATIONS
    t0 = time.perf_counter()
    log.info(f"solve: n={sel.n} d={sel.d} c={sel.c} p={p} gamma={prob.gamma} "
             f"max_iters={opts.max_iters}")

    def failure(msg, err=None):
        state = _finish(prob, last_good, best_bound,
                        SolverStatus.NUMERICAL_FAILURE, k, safe=True)
        raise NumericalFailure(msg, state=state) from err

    k = 0
    for k in range(1, opts.max_iters + 1):
        X, mu = block.solve(0.5 * ((Z1 - U1) + (Z2 - U2)))
        Xh1 = a * X + (1.0 - a) * Z1
        Xh2 = a * X + (1.0 - a) * Z2
        Z1_prev, Z2_prev = Z1, Z2
        try:
            Z1 = project_psd(Xh1 + U1)
        except NumericalFailure as e:
            failure(f"iteration {k}: {e}", e)
        Z2 = _clamp_block(Xh2 + U2, ab)
        U1 = U1 + Xh1 - Z1
        U2 = U2 + Xh2 - Z2

        pres = float(np.hypot(linalg.norm(X - Z1), linalg.norm(X - Z2)))
        dres = float(rho * linalg.norm((Z1 - Z1_prev) + (Z2 - Z2_prev)))
        eq = float(np.sum(block.A0 * Z1))
        obj = lifted.objective(prob, Z1)
        if not all(np.isfinite(v) for v in (pres, dres, eq, obj)):
            failure(f"iteration {k}: non-finite residuals")
        last_res = max(pres, dres)
        last_good = Z1

        bound = float("nan")
        logging_now = opts.log_every > 0 and k % opts.log_every == 0
        if k % opts.bound_interval == 0:
            try:
                bound = lagrangian_bound(prob, Z1, mu, obj, N=-rho * U2)
            except (NumericalFailure, linalg.LinAlgError) as e:
                failure(f"iteration {k}: dual bound failed ({e})", e)
            best_bound = max(best_bound, bound)
        trace.records.append(TraceRecord(k, pres, dres, obj, eq, rho, bound))
        if logging_now:
            log.info(f"iter={k} obj={obj:.8e} pres={pres:.3e} dres={dres:.3e} "
                     f"eq={eq:.3e} rho={rho:.2e} bound={bound:.8e}")

        scale = max(float(linalg.norm(X)), float(linalg.norm(Z1)), float(linalg.norm(Z2)),
                    rho * float(np.hypot(linalg.norm(U1), linalg.norm(U2))))
        tol = opts.eps_abs + opts.eps_rel * scale
        eq_tol = max(1.0, a0_norm) * tol
        if max(pres, dres) <= tol and abs(eq) <= eq_tol:
            status = SolverStatus.OPTIMAL
            break

        if opts.adaptive_rho and k % opts.adapt_every == 0:
            new_rho = rho
            if pres > 10.0 * dres:
                new_rho = min(2.0 * rho, RHO_MAX)
            elif dres > 10.0 * pres:
                new_rho = max(0.5 * rho, RHO_MIN)
            if new_rho != rho:
                U1 = U1 * (rho / new_rho)
                U2 = U2 * (rho / new_rho)
                rho = new_rho
                block.factor(2.0 * rho)
                log.debug(f"iter={k} rho -> {rho:.2e}")

    trace.seconds = time.perf_counter() - t0
    polish_tol = max(min(0.01 * last_res, 1e-2), 0.1 * opts.eps_abs)
    try:
        Lam, inner = _dykstra(Z1, sel, polish_tol, opts.max_inner_iters)
        final_bound = lagrangian_bound(prob, Lam, mu, N=-rho * U2)
    except (NumericalFailure, linalg.LinAlgError) as e:
        failure(f"final polish failed ({e})", e)
    log.debug(f"polish: {inner} alternating steps to tol {polish_tol:.1e}")
    best_bound = max(best_bound, final_bound)
    sol = _finish(prob, Lam, best_bound, status, k)
    log.info(f"solve: status={sol.status.value} iters={k} obj={sol.objective:.8e} "
             f"bound={sol.dual_bound:.8e} time={trace.seconds:.2f}s")
    return sol, trace


def _finish(prob, Z, best_bound, status, iterations, safe=False):
    Z = 0.5 * (Z + Z.T)
    obj = lifted.objective(prob, Z)
    try:
        eq, min_eig, min_nonneg = lifted.residuals(prob, Z)
    except NumericalFailure:
        if not safe:
            raise
        eq, min_eig, min_nonneg = float("nan"), float("nan"), float("nan")
    return LiftedSolution(
        Lambda=Z,
        objective=obj,
        eq_residual=eq,
        min_eig=min_eig,
        min_nonneg=min_nonneg,
        dual_bound=min(best_bound, obj),
        status=status,
        iterations=iterations,
    )
