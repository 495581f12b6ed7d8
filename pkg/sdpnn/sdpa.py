"""SDPA sparse-format export of the lifted problem, and a reader for cross-checks.

Variables are the upper-triangular entries Lambda[i, j] (i <= j, row-major)
followed by an epigraph variable t for the squared-error term:

  block 1  p x p PSD          Lambda
  block 2  LP (diagonal)      Lambda[ab, ab] >= 0,  <A0, Lambda> >= 0,  -<A0, Lambda> >= 0
  block 3  (nc+1) PSD         [[I, r], [r^T, t]],   r = vec(Lambda[alpha, v] - Y)

and the objective is t + (gamma/2)(tr Lambda[u, u] + tr Lambda[v, v]).
SDPA form: minimize c^T x subject to sum_i F_i x_i - F_0 PSD.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy import sparse

from .errors import DimensionError
from .lifted import LiftedProblem
from .logger import get_logger

log = get_logger(__name__)


def _var_index(i, j, p):
    """1-based variable number of Lambda[i, j], i <= j."""
    return i * p - i * (i - 1) // 2 + (j - i) + 1


def _num(x):
    return "%.17g" % x


def write_sdpa(prob: LiftedProblem, path):
    sel = prob.sel
    p, n, c = sel.p, sel.n, sel.c
    n_lam = p * (p + 1) // 2
    m = n_lam + 1
    t_var = m
    ab = sel.ab
    lp_size = ab.size * (ab.size + 1) // 2 + 2
    schur = n * c + 1

    cost = np.zeros(m)
    for i in np.concatenate([sel.u, sel.v]):
        cost[_var_index(i, i, p) - 1] = 0.5 * prob.gamma
    cost[t_var - 1] = 1.0

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    A0 = np.asarray(prob.A0)
    Y = np.asarray(prob.Y)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f'"lifted two-layer ReLU SDP: n={n} d={sel.d} c={c} p={p} gamma={prob.gamma}\n')
        f.write(f"{m}\n3\n")
        f.write(f"{p} {-lp_size} {schur}\n")
        f.write(" ".join(_num(v) for v in cost) + "\n")

        # F0
        for k in range(n * c):
            f.write(f"0 3 {k + 1} {k + 1} -1\n")
            yk = Y[k // c, k % c]
            if yk != 0:
                f.write(f"0 3 {k + 1} {schur} {_num(yk)}\n")

        # Lambda variables
        lp_row = {}
        row = 0
        for a in range(ab.size):
            for b in range(a, ab.size):
                row += 1
                lp_row[(int(ab[a]), int(ab[b]))] = row
        eq_pos, eq_neg = lp_size - 1, lp_size
        alpha0, v0 = int(sel.alpha[0]), int(sel.v[0])
        for i in range(p):
            for j in range(i, p):
                var = _var_index(i, j, p)
                f.write(f"{var} 1 {i + 1} {j + 1} 1\n")
                if (i, j) in lp_row:
                    r = lp_row[(i, j)]
                    f.write(f"{var} 2 {r} {r} 1\n")
                coef = A0[i, i] if i == j else 2.0 * A0[i, j]
                if coef != 0:
                    f.write(f"{var} 2 {eq_pos} {eq_pos} {_num(coef)}\n")
                    f.write(f"{var} 2 {eq_neg} {eq_neg} {_num(-coef)}\n")
                if i < n and v0 <= j:
                    k = (i - alpha0) * c + (j - v0)
                    f.write(f"{var} 3 {k + 1} {schur} 1\n")
        f.write(f"{t_var} 3 {schur} {schur} 1\n")
    log.info(f"Wrote SDPA file {path} ({m} variables, blocks {p}, {-lp_size}, {schur})")
    return path


@dataclass
class SdpaProblem:
    m: int
    blocks: List[int]
    cost: np.ndarray
    entries: List[Tuple[int, int, int, int, float]] = field(default_factory=list)

    def block_matrices(self, blk):
        """(A, F0) with vec(F(x)) = A x - vec(F0) for block ``blk`` (1-based)."""
        size = abs(self.blocks[blk - 1])
        rows, cols, vals = [], [], []
        F0 = np.zeros((size, size))
        for mat, b, i, j, v in self.entries:
            if b != blk:
                continue
            cells = {(i - 1, j - 1), (j - 1, i - 1)}
            for r, s in cells:
                if mat == 0:
                    F0[r, s] = v
                else:
                    rows.append(r * size + s)
                    cols.append(mat - 1)
                    vals.append(v)
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(size * size, self.m))
        return A, F0


def read_sdpa(path):
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in "\"*"]

    def nums(line):
        return [t for t in re.split(r"[\s,{}()]+", line.strip()) if t]

    m = int(nums(lines[0])[0])
    nblock = int(nums(lines[1])[0])
    blocks = [int(t) for t in nums(lines[2])[:nblock]]
    cost = np.array([float(t) for t in nums(lines[3])[:m]])
    if cost.size != m:
        raise DimensionError(f"{path}: cost vector has {cost.size} entries, expected {m}")
    entries = []
    for line in lines[4:]:
        t = nums(line)
        entries.append((int(t[0]), int(t[1]), int(t[2]), int(t[3]), float(t[4])))
    return SdpaProblem(m, blocks, cost, entries)


def solve_with_cvxpy(problem: SdpaProblem, solver=None):
    """Solve an SDPA problem with cvxpy; returns (optimal value, x)."""
    import cvxpy as cp

    x = cp.Variable(problem.m)
    constraints = []
    for blk, size in enumerate(problem.blocks, start=1):
        A, F0 = problem.block_matrices(blk)
        s = abs(size)
        if size < 0:
            diag = np.arange(s) * (s + 1)
            constraints.append(A[diag] @ x - np.diag(F0) >= 0)
        else:
            S = cp.Variable((s, s), symmetric=True)
            constraints += [cp.reshape(A @ x, (s, s), order="F") - F0 == S, S >> 0]
    prob = cp.Problem(cp.Minimize(problem.cost @ x), constraints)
    prob.solve(solver=solver)
    return float(prob.value), np.asarray(x.value)
