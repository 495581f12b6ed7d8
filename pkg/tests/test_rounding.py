import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_instance
from sdpnn.errors import ConfigError, DimensionError, NumericalFailure
from sdpnn.lifted import build_problem, build_selection_matrices, lift_matrix, lift_weights
from sdpnn.network import NetworkWeights, training_loss
from sdpnn.rounding import (
    FactorMatrix,
    NullspaceProjector,
    RoundingOptions,
    TieBreak,
    extract_weights,
    grad_phi,
    initial_factor,
    phi,
    proj_D1,
    proj_D2,
    tos_round,
)

VALUES = (-1.0, 0.0, 1.0, 2.0)


def in_D1(lam, sel):
    a, b = lam[sel.alpha], lam[sel.beta]
    return (a >= 0).all() and (b >= 0).all() and not (a * b).any()


def column(sel, alpha, beta):
    lam = np.full((sel.p, 1), 7.0)
    lam[sel.alpha, 0] = alpha
    lam[sel.beta, 0] = beta
    return lam


def test_proj_D1_examples():
    sel = build_selection_matrices(1, 2, 1)
    out = proj_D1(column(sel, 3.0, 5.0), sel)
    assert_array_equal(out[sel.ab, 0], [0.0, 5.0])
    assert_array_equal(out[np.r_[sel.u, sel.v], 0], [7.0, 7.0, 7.0])
    out = proj_D1(column(sel, -1.0, 2.0), sel)
    assert_array_equal(out[sel.ab, 0], [0.0, 2.0])
    out = proj_D1(column(sel, 2.0, 2.0), sel, TieBreak.KEEP_ALPHA)
    assert_array_equal(out[sel.ab, 0], [2.0, 0.0])
    out = proj_D1(column(sel, 2.0, 2.0), sel, "literal")
    assert_array_equal(out[sel.ab, 0], [2.0, 2.0])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_proj_D1_exhaustive_patterns(n):
    sel = build_selection_matrices(n, 1, 1)
    pairs = list(itertools.product(VALUES, repeat=2))
    for combo in itertools.product(pairs, repeat=n):
        lam = np.zeros((sel.p, 1))
        lam[sel.alpha, 0] = [a for a, _ in combo]
        lam[sel.beta, 0] = [b for _, b in combo]
        out = proj_D1(lam, sel)
        assert in_D1(out, sel)
        assert_array_equal(proj_D1(out, sel), out)
        literal = proj_D1(lam, sel, TieBreak.LITERAL)
        assert (literal[sel.ab] >= 0).all()


def test_proj_D1_random_cases():
    rng = np.random.default_rng(0)
    sel = build_selection_matrices(5, 3, 2)
    for _ in range(1000):
        lam = rng.standard_normal((sel.p, 3))
        out = proj_D1(lam, sel)
        assert in_D1(out, sel)
        assert_array_equal(proj_D1(out, sel), out)
        assert_array_equal(out[sel.u], lam[sel.u])


def test_proj_D1_dimension_mismatch():
    sel = build_selection_matrices(2, 1, 1)
    with pytest.raises(DimensionError):
        proj_D1(np.zeros((3, 2)), sel)


@pytest.mark.parametrize("seed", range(20))
def test_proj_D2_matches_least_squares_oracle(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((3, 8))
    lam = rng.standard_normal((8, 2))
    out = proj_D2(lam, M)
    # oracle: subtract the least-squares component in the row space of M
    coef, *_ = np.linalg.lstsq(M.T, lam, rcond=None)
    assert_allclose(out, lam - M.T @ coef, atol=1e-8)
    assert np.linalg.norm(M @ out) <= 1e-8 * (1.0 + np.linalg.norm(lam))
    assert_allclose(proj_D2(out, M), out, atol=1e-12)
    # the residual lies in the row space, so it is orthogonal to the output
    assert abs(np.sum(out * (lam - out))) <= 1e-8


def test_proj_D2_fixed_points():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((2, 5))
    proj = NullspaceProjector(M)
    inside = proj(rng.standard_normal((5, 3)))
    assert_allclose(proj_D2(inside, proj), inside, rtol=1e-10, atol=1e-12)
    lam = rng.standard_normal((5, 3))
    assert_array_equal(proj_D2(lam, np.zeros((2, 5))), lam)


def test_proj_D2_is_closest_nullspace_point():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((3, 7))
    proj = NullspaceProjector(M)
    x = rng.standard_normal((7, 1))
    px = proj(x)
    for _ in range(50):
        y = proj(rng.standard_normal((7, 1)))
        assert np.linalg.norm(px - x) <= np.linalg.norm(y - x) + 1e-12


def test_rank_deficient_M_handled():
    M = np.ones((3, 4))
    proj = NullspaceProjector(M)
    assert proj.rank == 1
    out = proj(np.ones((4, 1)))
    assert_allclose(M @ out, 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_grad_phi_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p, R = int(rng.integers(2, 11)), int(rng.integers(1, 5))
    A = rng.standard_normal((p, p))
    L = A @ A.T
    lam = rng.standard_normal((p, R))
    G = grad_phi(lam, L)
    h = 1e-5
    fd = np.zeros_like(lam)
    for i in range(p):
        for j in range(R):
            E = np.zeros_like(lam)
            E[i, j] = h
            fd[i, j] = (phi(lam + E, L) - phi(lam - E, L)) / (2 * h)
    assert np.linalg.norm(G - fd) <= 1e-5 * np.linalg.norm(G)


def test_grad_phi_stationary_cases():
    lam = np.random.default_rng(0).standard_normal((6, 2))
    assert_allclose(grad_phi(lam, lam @ lam.T), 0.0, atol=1e-12)
    assert_array_equal(grad_phi(np.zeros((6, 2)), np.eye(6)), 0.0)
    with pytest.raises(DimensionError):
        grad_phi(lam, np.eye(5))


def test_initial_factor_reconstructs_and_pads():
    prob, w = random_instance(4, n=4, d=2, c=2, m=2)
    L = lift_matrix(prob, w)
    lam = initial_factor(L, prob.sel, 10)
    assert lam.shape == (prob.p, 10)
    assert_allclose(lam @ lam.T, L, atol=1e-10)
    assert not lam[:, 2:].any()
    assert (lam[prob.sel.ab].sum(axis=0) >= 0).all()


def test_rounding_options_validation():
    with pytest.raises(ConfigError):
        RoundingOptions(R=0)
    with pytest.raises(ConfigError):
        RoundingOptions(iters=0)
    with pytest.raises(ConfigError):
        RoundingOptions(step_eta=-1.0)
    assert RoundingOptions(tie_break="literal").tie_break is TieBreak.LITERAL


@pytest.mark.parametrize("seed", range(20))
def test_single_neuron_lift_is_recovered(seed):
    rng = np.random.default_rng(seed)
    n, d, c = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
    prob = build_problem(rng.standard_normal((n, d)), rng.standard_normal((n, c)), 0.1)
    w = NetworkWeights(rng.standard_normal((d, 1)), rng.standard_normal((c, 1)))
    L = lift_matrix(prob, w)
    fm, history = tos_round(L, prob, RoundingOptions(R=5, iters=100))
    assert fm.best_phi <= 1e-4 * np.linalg.norm(L) ** 2
    rec = extract_weights(fm, prob.sel)
    loss = training_loss(prob.X, prob.Y, w, prob.gamma)
    assert training_loss(prob.X, prob.Y, rec, prob.gamma) == pytest.approx(loss, rel=1e-6)
    assert history.shape == (100,)


def test_zero_matrix_rounds_to_empty_network(small_problem):
    L = np.zeros((small_problem.p, small_problem.p))
    fm, history = tos_round(L, small_problem, RoundingOptions(R=4, iters=20))
    assert_array_equal(fm.lam, 0.0)
    assert_array_equal(history, 0.0)
    w = extract_weights(fm, small_problem.sel)
    assert w.m == 0


def test_rounding_is_deterministic():
    prob, w = random_instance(11, n=5, d=2, c=2, m=3)
    L = lift_matrix(prob, w)
    opts = RoundingOptions(R=8, iters=60)
    a, ha = tos_round(L, prob, opts)
    b, hb = tos_round(L, prob, opts)
    assert_array_equal(ha, hb)
    assert_array_equal(a.lam, b.lam)
    assert a.best_phi == pytest.approx(ha.min())
    assert a.last_phi == ha[-1]


def test_extract_weights_reads_blocks_and_prunes():
    prob, w = random_instance(5, n=3, d=2, c=2, m=2)
    lam = np.hstack([lift_weights(prob, w), np.zeros((prob.p, 3))])
    rec = extract_weights(FactorMatrix(lam), prob.sel)
    assert rec.m == 2
    assert_array_equal(rec.U, w.U)
    assert_array_equal(rec.V, w.V)


def orthogonal_lift_instance(seed, m):
    """Network whose lift columns have disjoint supports, one input axis per neuron."""
    rng = np.random.default_rng(seed)
    rows = 2
    X = np.zeros((rows * m, m))
    for j in range(m):
        X[rows * j:rows * (j + 1), j] = rng.uniform(0.5, 2.0, rows) * rng.choice([-1.0, 1.0], rows)
    Y = rng.standard_normal((rows * m, m))
    prob = build_problem(X, Y, 0.1)
    U = np.diag(rng.uniform(0.5, 2.0, m) * rng.choice([-1.0, 1.0], m))
    V = np.diag(rng.uniform(0.5, 2.0, m))
    return prob, NetworkWeights(U, V)


@pytest.mark.parametrize("seed", range(10))
def test_multi_neuron_lift_is_recovered(seed):
    prob, w = orthogonal_lift_instance(seed, m=3)
    L = lift_matrix(prob, w)
    fm, history = tos_round(L, prob, RoundingOptions(R=6, iters=200))
    assert np.isfinite(history).all()
    assert fm.best_phi <= 1e-10 * np.linalg.norm(L) ** 2
    rec = extract_weights(fm, prob.sel)
    assert rec.m == 3
    loss = training_loss(prob.X, prob.Y, w, prob.gamma)
    assert training_loss(prob.X, prob.Y, rec, prob.gamma) == pytest.approx(loss, rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_auto_step_stays_bounded_on_generic_lifts(seed):
    prob, w = random_instance(seed, n=5, d=2, c=2, m=3)
    L = lift_matrix(prob, w)
    fm, history = tos_round(L, prob, RoundingOptions(R=8, iters=300))
    assert np.isfinite(history).all()
    assert fm.best_phi <= history[0]
    assert np.isfinite(fm.lam).all()


def test_divergent_step_raises_with_best_factor():
    prob, w = random_instance(11, n=5, d=2, c=2, m=3)
    L = lift_matrix(prob, w)
    with pytest.raises(NumericalFailure) as err:
        tos_round(L, prob, RoundingOptions(R=8, iters=2000, step_eta=1e3))
    state = err.value.state
    assert isinstance(state, FactorMatrix)
    assert np.isfinite(state.lam).all()
    assert np.isfinite(state.best_phi)
    assert in_D1(state.lam, prob.sel)


def test_phi_of_overflowed_factor_is_inf():
    lam = np.full((3, 1), np.inf)
    assert phi(lam, np.eye(3)) == np.inf
    assert phi(np.full((3, 1), 1e200), np.eye(3)) == np.inf


def test_rounding_options_have_no_seed():
    with pytest.raises(TypeError):
        RoundingOptions(seed=1)
