from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from helpers import spectrum_with
from ridgeshrink.errors import DegenerateDataError, SettingError
from ridgeshrink.estimators import Weights, estimate_a_single, estimate_b_double, rls_apply
from ridgeshrink.matmodel import DataMatrix, RidgeConfig, RidgeMode, center_and_whiten
from ridgeshrink.simlab import loss
from ridgeshrink.sure import (
    SureInput,
    a_hat_gradient,
    bayes_optimal_weights,
    double_clause2_rhs,
    double_quadratic,
    double_rhs,
    minimax_estimated,
    minimax_known,
    prop2_bound,
    single_clause3_rhs,
    single_quadratic,
    single_rhs,
    sure_delta,
    sure_estimated,
    sure_estimated_from_eigenvalues,
    sure_general,
    sure_general_from_eigenvalues,
    trace_mode_c_threshold,
)

CONST = RidgeMode.CONSTANT
TRACE = RidgeMode.TRACE


def _ridge_g(ev, a, b, ridge):
    """Shrinkage amounts g_i (estimate = X - g * centered part) and their partials."""
    trW = ev.sum()
    alpha = ridge.alpha_hat(trW)
    g = a / (ev + alpha) + b / trW
    dg = -a * (1 + ridge.c0) / (ev + alpha) ** 2 - b / trW**2
    return g, dg


def _random_ev(rng, m):
    return np.sort(rng.exponential(10.0, m) + 0.1)[::-1]


# --- specific SURE ----------------------------------------------------------


def test_zero_weights_zero_delta():
    spec = spectrum_with([5.0, 3.0, 1.0], n=10, p=3)
    assert sure_delta(spec, RidgeConfig(TRACE, 0.3), Weights(0.0, 0.0)) == 0.0


def test_hand_evaluated_delta():
    # n=3, p=1, l=2, alpha=1: 2/9 - 2/3 - 2/9 + 4/9
    spec = spectrum_with([2.0], n=3, p=1)
    d = sure_delta(SureInput(spec, RidgeConfig(CONST, 1.0), Weights(1.0, 0.0)))
    assert d == pytest.approx(-2 / 9, abs=1e-13)


def test_degenerate_spectrum():
    spec = center_and_whiten(DataMatrix(np.ones((2, 4))))
    with pytest.raises(DegenerateDataError):
        sure_delta(spec, RidgeConfig(CONST, 1.0), Weights(1.0, 1.0))


@pytest.mark.parametrize("n,p", [(12, 5), (6, 11), (9, 8), (2, 3)])
def test_general_sure_matches_ridge_formula(n, p):
    rng = np.random.default_rng(n * 31 + p)
    m = min(p, n - 1)
    worst = 0.0
    for k in range(100):
        ev = _random_ev(rng, m)
        ridge = RidgeConfig(TRACE if k % 2 else CONST, float(rng.uniform(0.05, 2.0)))
        w = Weights(float(rng.uniform(-3, 10)), float(rng.uniform(-5, 20)))
        spec = spectrum_with(ev, n=n, p=p, seed=k)
        g, dg = _ridge_g(spec.ev, w.a, w.b, ridge)
        a = sure_general(spec, g, dg, coincident_slope=dg)
        b = sure_delta(spec, ridge, w)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    assert worst < 1e-10


def test_general_sure_finite_difference_partials():
    rng = np.random.default_rng(2)
    n, p = 15, 6
    ridge = RidgeConfig(TRACE, 0.4)
    w = Weights(4.0, 7.0)
    for _ in range(20):
        ev = _random_ev(rng, 6)
        g, dg = _ridge_g(ev, w.a, w.b, ridge)
        fd = np.empty_like(ev)
        for i in range(ev.size):
            h = 1e-6 * ev[i]
            up, dn = ev.copy(), ev.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (_ridge_g(up, w.a, w.b, ridge)[0][i] - _ridge_g(dn, w.a, w.b, ridge)[0][i]) / (2 * h)
        exact = sure_general_from_eigenvalues(ev, n, p, g, dg)
        approx = sure_general_from_eigenvalues(ev, n, p, g, fd)
        assert approx == pytest.approx(exact, rel=1e-4)


def test_general_sure_zero_g():
    ev = np.array([4.0, 2.0, 1.0])
    assert sure_general_from_eigenvalues(ev, 10, 3, np.zeros(3), np.zeros(3)) == 0.0


def test_general_sure_collision():
    ev = np.array([4.0, 4.0, 1.0])
    ridge = RidgeConfig(CONST, 1.0)
    g, dg = _ridge_g(ev, 2.0, 0.0, ridge)
    with pytest.raises(DegenerateDataError):
        sure_general_from_eigenvalues(ev, 10, 3, g, dg)
    # with the derivative as the divided-difference limit, the ridge identity still holds
    spec = spectrum_with(ev, n=10, p=3)
    got = sure_general(spec, *_ridge_g(spec.ev, 2.0, 0.0, ridge), coincident_slope=dg)
    assert got == pytest.approx(sure_delta(spec, ridge, Weights(2.0)), rel=1e-9)


# --- estimated weights -------------------------------------------------------


def _a_hat_of(ev, n, p, ridge):
    return a_hat_gradient(ev, n, p, ridge)[0]


@pytest.mark.parametrize("mode", [CONST, TRACE])
@pytest.mark.parametrize("n,p", [(12, 5), (5, 12)])
def test_a_hat_gradient_matches_finite_differences(mode, n, p):
    rng = np.random.default_rng(7)
    ridge = RidgeConfig(mode, 0.3)
    ev = _random_ev(rng, min(p, n - 1))
    _, grad = a_hat_gradient(ev, n, p, ridge)
    for i in range(ev.size):
        h = 1e-6 * ev[i]
        up, dn = ev.copy(), ev.copy()
        up[i] += h
        dn[i] -= h
        fd = (_a_hat_of(up, n, p, ridge) - _a_hat_of(dn, n, p, ridge)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("mode", [CONST, TRACE])
def test_estimated_single_sure_against_fd_formula(mode):
    # -a^2 tr(V^2 W) - 4 sum l_i/(l_i + alpha) d a / d l_i with finite-difference partials
    rng = np.random.default_rng(8)
    n, p = 20, 6
    ridge = RidgeConfig(mode, 0.5)
    for _ in range(20):
        ev = _random_ev(rng, p)
        alpha = ridge.alpha_hat(ev.sum())
        a = _a_hat_of(ev, n, p, ridge)
        fd = np.empty_like(ev)
        for i in range(p):
            h = 1e-6 * ev[i]
            up, dn = ev.copy(), ev.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (_a_hat_of(up, n, p, ridge) - _a_hat_of(dn, n, p, ridge)) / (2 * h)
        oracle = -a * a * np.sum(ev / (ev + alpha) ** 2) - 4 * np.sum(ev / (ev + alpha) * fd)
        got = sure_estimated_from_eigenvalues(ev, n, p, ridge, double=False)
        assert got == pytest.approx(oracle, rel=1e-3)


@pytest.mark.parametrize("mode", [CONST, TRACE])
def test_estimated_sure_matches_general_sure(mode):
    # estimated weights as a shrinkage function g(l), partials by finite differences
    rng = np.random.default_rng(9)
    n, p = 14, 5
    ridge = RidgeConfig(mode, 0.7)
    for double in (False, True):
        ev = _random_ev(rng, p)

        def g_of(e):
            a, _ = a_hat_gradient(e, n, p, ridge)
            alpha = ridge.alpha_hat(e.sum())
            trVW = np.sum(e / (e + alpha))
            b = ((n - 1) * p - 2 - trVW * a) if double else 0.0
            return a / (e + alpha) + b / e.sum()

        g = g_of(ev)
        dg = np.empty_like(ev)
        for i in range(p):
            h = 1e-6 * ev[i]
            up, dn = ev.copy(), ev.copy()
            up[i] += h
            dn[i] -= h
            dg[i] = (g_of(up)[i] - g_of(dn)[i]) / (2 * h)
        want = sure_general_from_eigenvalues(ev, n, p, g, dg)
        got = sure_estimated_from_eigenvalues(ev, n, p, ridge, double)
        assert got == pytest.approx(want, rel=1e-4)


def test_weights_minimize_sure_coordinatewise():
    # a_hat minimizes Delta in a at b = 0; b_hat minimizes it in b at a = a_hat
    rng = np.random.default_rng(10)
    for k in range(100):
        n, p = int(rng.integers(3, 30)), int(rng.integers(1, 30))
        m = min(p, n - 1)
        spec = spectrum_with(_random_ev(rng, m), n=n, p=p, seed=k)
        ridge = RidgeConfig(TRACE if k % 2 else CONST, float(rng.uniform(0.05, 2)))
        a = estimate_a_single(spec, ridge)
        b = estimate_b_double(spec, ridge, a)
        d = 1e-3 * (1 + abs(a))
        base_a = sure_delta(spec, ridge, Weights(a, 0.0))
        for s in (-d, d):
            assert sure_delta(spec, ridge, Weights(a + s, 0.0)) >= base_a - 1e-9 * abs(base_a)
        base_b = sure_delta(spec, ridge, Weights(a, b))
        db = 1e-3 * (1 + abs(b))
        for s in (-db, db):
            assert sure_delta(spec, ridge, Weights(a, b + s)) >= base_b - 1e-9 * abs(base_b)


def test_sure_fixed_weights_monte_carlo_small():
    # np * (risk difference) vs mean Delta, fixed Theta and weights (quick version)
    rng = np.random.default_rng(12)
    p, n = 5, 12
    theta = np.outer(rng.standard_normal(p), rng.standard_normal(n)) * 2
    ridge = RidgeConfig(CONST, 1.0)
    w = Weights(3.0, 2.0)
    diffs, deltas = [], []
    for _ in range(4000):
        x = theta + rng.standard_normal((p, n))
        spec = center_and_whiten(DataMatrix(x))
        rep = rls_apply(spec, ridge, w)
        diffs.append(n * p * (loss(rep.theta_hat, theta) - loss(x, theta)))
        deltas.append(rep.sure_delta)
    gap = np.array(deltas) - np.array(diffs)
    assert abs(gap.mean()) <= 3 * gap.std(ddof=1) / np.sqrt(gap.size)


# --- minimaxity ------------------------------------------------------------


def test_prop1_example():
    v = minimax_known(12, 4, RidgeConfig(CONST, 1.0), Weights(14, 0))
    assert not v.minimax and v.margin == -2 and v.status == "violates-known-bound"
    assert minimax_known(12, 4, RidgeConfig(CONST, 1.0), Weights(12, 0)).minimax


def test_prop1_square_case_trace_mode():
    n, p = 6, 5  # A0 = 0
    c = Fraction(1, 10)
    assert c > Fraction(1, (n - 1) * p - 2)
    # with A0 = 0 the bound is 2[((n-1)p - 2)c - 1], positive exactly when c > 1/((n-1)p - 2)
    a = 2 * (((n - 1) * p - 2) * c - 1) - Fraction(1, 1000)
    v = minimax_known(n, p, RidgeConfig(TRACE, float(c)), Weights(a, 0), c0=c)
    assert v.minimax and v.condition_id == "prop1"
    c_low = Fraction(1, (n - 1) * p - 2)
    assert not minimax_known(n, p, RidgeConfig(TRACE, float(c_low)), Weights(Fraction(1, 10**9), 0), c0=c_low).minimax


def test_prop2_boundary_inclusive():
    n, p = 30, 8
    c = Fraction(1, 8)
    a = (2 * (abs(n - p - 1) - 1 + ((n - 1) * p - 2) * c)) / 2
    bmax = prop2_bound(n, p, c, a)
    assert bmax == 2 * (n - 1) * p - 4 - 2 * a * 8 / (1 + c * 8)
    for b in (Fraction(1, 10**6), bmax):
        assert minimax_known(n, p, RidgeConfig(TRACE, 0.125), Weights(a, b), c0=c).minimax
    assert not minimax_known(n, p, RidgeConfig(TRACE, 0.125), Weights(a, bmax + 1), c0=c).minimax


def test_single_threshold_p4():
    thr = trace_mode_c_threshold(4, 0)
    assert thr == pytest.approx((31 + np.sqrt(1185)) / 8, abs=1e-9)
    assert thr == pytest.approx(8.178, abs=5e-4)
    assert single_rhs(4, Fraction(9)) < 0
    assert single_rhs(4, Fraction(8)) > 0
    v = minimax_estimated(5, 4, RidgeConfig(TRACE, 9.0), c=Fraction(9))
    assert v.minimax and v.condition_id == "thm:min(ii)"


def test_clause_rhs_golden_values():
    assert single_clause3_rhs(1) == Fraction(25, 2)
    assert single_clause3_rhs(2) == 10
    assert single_clause3_rhs(21) > 0 > single_clause3_rhs(22)
    assert double_clause2_rhs(1) == Fraction(25, 2)
    assert double_clause2_rhs(2) == Fraction(21, 2)


@pytest.mark.parametrize("double", [False, True])
def test_rational_and_quadratic_forms_agree(double):
    rhs, quad = (double_rhs, double_quadratic) if double else (single_rhs, single_quadratic)
    rng = np.random.default_rng(13)
    for _ in range(1000):
        n, p = int(rng.integers(2, 80)), int(rng.integers(1, 80))
        P, A0 = min(p, n - 1), abs(n - p - 1)
        c = Fraction(int(rng.integers(1, 2000)), int(rng.integers(1, 200)))
        assert (A0 >= rhs(P, c)) == (quad(P, A0, c) >= 0)


@pytest.mark.parametrize("double", [False, True])
def test_clause_at_inverse_p_is_the_quadratic(double):
    quad = double_quadratic if double else single_quadratic
    clause = double_clause2_rhs if double else single_clause3_rhs
    for P in range(1, 40):
        for A0 in range(0, 40):
            assert (A0 >= clause(P)) == (quad(P, A0, Fraction(1, P)) >= 0)


def test_minimax_clause_iii_p22():
    v = minimax_estimated(40, 22, RidgeConfig(TRACE, 1 / 22), c=Fraction(1, 22))
    assert v.minimax and v.condition_id == "thm:min(iii)"
    # float c equal to 1/P also triggers the clause
    assert minimax_estimated(23, 22, RidgeConfig(TRACE, 1 / 22)).condition_id == "thm:min(iii)"


def test_minimax_constant_mode():
    v = minimax_estimated(11, 5, RidgeConfig(CONST, 1.0))
    assert v.status == "not-covered" and v.margin == -5
    assert minimax_estimated(16, 5, RidgeConfig(CONST, 1.0)).minimax
    # p > n - 1 uses p - n + 1
    assert minimax_estimated(5, 14, RidgeConfig(CONST, 1.0)).minimax
    assert minimax_estimated(5, 13, RidgeConfig(CONST, 1.0)).status == "not-covered"
    assert minimax_estimated(40, 5, RidgeConfig(CONST, 1.0), double=True).status == "not-covered"


def test_threshold_none_and_zero():
    # large A0 holds for every c; p = 22 with A0 = 0 fails for small c only
    assert trace_mode_c_threshold(5, 30) == 0.0
    thr = trace_mode_c_threshold(22, 0)
    assert thr is not None and single_quadratic(22, 0, thr * 1.0001) >= 0


def _mc_risk(theta, eid_double, reps, rng):
    p, n = theta.shape
    ridge = RidgeConfig(TRACE, 1 / min(p, n - 1))
    losses = []
    for _ in range(reps):
        spec = center_and_whiten(DataMatrix(theta + rng.standard_normal(theta.shape)))
        a = estimate_a_single(spec, ridge)
        b = estimate_b_double(spec, ridge, a) if eid_double else 0.0
        losses.append(loss(rls_apply(spec, ridge, Weights(a, b)).theta_hat, theta))
    losses = np.array(losses)
    return losses.mean(), losses.std(ddof=1) / np.sqrt(reps)


@pytest.mark.parametrize("double", [False, True])
def test_minimax_verdict_survives_adversarial_means(double):
    n, p = 20, 5
    assert minimax_estimated(n, p, RidgeConfig(TRACE, 0.2), double=double, c=Fraction(1, 5)).minimax
    rng = np.random.default_rng(14)
    u = np.linalg.qr(rng.standard_normal((p, p)))[0]
    v = np.linalg.qr(rng.standard_normal((n, p)))[0]
    thetas = [
        np.zeros((p, n)),
        50 * np.outer(u[:, 0], v[:, 0]),
        5 * np.outer(u[:, 0], v[:, 0]),
        3 * u @ v.T,
        10 * u @ v.T,
    ]
    for theta in thetas:
        mean, se = _mc_risk(theta, double, 200, rng)
        assert mean <= 1 + 3 * se


# --- Bayes-optimal weights ----------------------------------------------------


def test_bayes_identity_equal_spectrum():
    spec = spectrum_with([4.0] * 3, n=10, p=3)
    ridge = RidgeConfig(TRACE, 0.5)
    alpha = ridge.alpha_hat(spec.trW)
    opt = bayes_optimal_weights(spec, ridge, np.ones(3), a_hat=0.0)
    assert opt.a_star == pytest.approx(4.0 + alpha)
    assert opt.b_star == pytest.approx(spec.trW)


def _l_em(delta, psi_inv, w, n, p):
    d = delta - psi_inv
    return np.trace(d @ d @ w) / (n * p)


def test_bayes_weights_match_grid_search():
    rng = np.random.default_rng(15)
    p, n = 10, 50
    q = np.linalg.qr(rng.standard_normal((p, p)))[0]
    psi = q @ np.diag(rng.uniform(1, 3, p)) @ q.T
    y = np.linalg.cholesky(psi) @ rng.standard_normal((p, n))
    spec = center_and_whiten(DataMatrix(y))
    ridge = RidgeConfig(TRACE, 1 / p)
    xc = y - y.mean(axis=1, keepdims=True)
    w = xc @ xc.T
    alpha = ridge.alpha_hat(np.trace(w))
    vinv = np.linalg.inv(w + alpha * np.eye(p))
    psi_inv = np.linalg.inv(psi)
    a_hat = estimate_a_single(spec, ridge)
    opt = bayes_optimal_weights(spec, ridge, psi, a_hat)

    step = 1e-3 * opt.a_star
    grid = opt.a_star + step * np.arange(-500, 501)
    vals = [_l_em(a * vinv, psi_inv, w, n, p) for a in grid]
    assert abs(grid[int(np.argmin(vals))] - opt.a_star) <= step

    stepb = 1e-3 * abs(opt.b_star)
    gridb = opt.b_star + stepb * np.arange(-500, 501)
    valsb = [_l_em(a_hat * vinv + b / np.trace(w) * np.eye(p), psi_inv, w, n, p) for b in gridb]
    assert abs(gridb[int(np.argmin(valsb))] - opt.b_star) <= stepb

    # eigenvalue input gives the same answer in the eigenbasis of Psi
    y2 = np.diag(np.sqrt(np.linalg.eigvalsh(psi))) @ rng.standard_normal((p, n))
    spec2 = center_and_whiten(DataMatrix(y2))
    dense = bayes_optimal_weights(spec2, ridge, np.diag(np.linalg.eigvalsh(psi)), 1.0)
    vec = bayes_optimal_weights(spec2, ridge, np.linalg.eigvalsh(psi), 1.0)
    assert dense.a_star == pytest.approx(vec.a_star, rel=1e-10)
    assert dense.b_star == pytest.approx(vec.b_star, rel=1e-10)


def test_bayes_requires_tall_data():
    spec = spectrum_with([3.0, 1.0], n=3, p=5)
    with pytest.raises(SettingError):
        bayes_optimal_weights(spec, RidgeConfig(TRACE, 0.2), np.ones(5), 0.0)


def test_sure_estimated_requires_spectrum():
    spec = center_and_whiten(DataMatrix(np.ones((2, 4))))
    with pytest.raises(DegenerateDataError):
        sure_estimated(spec, RidgeConfig(TRACE, 0.5))
