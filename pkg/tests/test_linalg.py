import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, quad_vec

from gcmaps import linalg
from gcmaps.errors import DimensionError, NoSolutionError, SingularEquationError, ValidationError


def test_expm_examples():
    assert np.array_equal(linalg.expm(np.zeros((3, 3)), 1.0), np.eye(3))
    np.testing.assert_allclose(linalg.expm(np.diag([-1.0, 2.0]), 1.0), np.diag([math.exp(-1), math.exp(2)]),
                               rtol=1e-14)
    np.testing.assert_allclose(linalg.expm([[0.0, 1.0], [0.0, 0.0]], 1.0), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


def test_expm_rejects_rectangular():
    with pytest.raises(DimensionError):
        linalg.expm(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 1), t=st.floats(0, 1))
def test_expm_semigroup(seed, s, t):
    M = np.random.default_rng(seed).normal(size=(4, 4))
    lhs = linalg.expm(M, s) @ linalg.expm(M, t)
    rhs = linalg.expm(M, s + t)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))


def test_lyapunov_examples():
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(linalg.lyapunov_solve(-np.eye(2), S), S / 2, rtol=1e-14)
    np.testing.assert_allclose(linalg.lyapunov_solve([[-1.0]], [[2.0]]), [[1.0]])


def test_lyapunov_random_residual(rng):
    for _ in range(10):
        A = rng.normal(size=(5, 5))
        A -= (linalg.spectrum(A).max_real_part + 0.5) * np.eye(5)
        L = rng.normal(size=(5, 5))
        Q = L @ L.T + np.eye(5)
        X = linalg.lyapunov_solve(A, Q)
        assert np.array_equal(X, X.T)
        assert np.max(np.abs(A @ X + X @ A.T + Q)) <= 1e-10 * max(1, np.max(np.abs(Q)))


def test_lyapunov_singular_reported():
    A = np.diag([1.0, -1.0])
    with pytest.raises(SingularEquationError):
        linalg.lyapunov_solve(A, np.eye(2))


def test_lyapunov_rejects_asymmetric_q():
    with pytest.raises(ValidationError):
        linalg.lyapunov_solve(-np.eye(2), [[1.0, 0.3], [0.0, 1.0]])


def test_care_lyapunov_limit():
    sol = linalg.care_solve([[-1.0]], [[0.0]], [[1.0]])
    assert sol.P[0, 0] == pytest.approx(0.5, rel=1e-14)
    np.testing.assert_allclose(sol.closed_loop.eigenvalues, [-1.0])


def test_care_scalar_quadratic():
    # P^2 + 2P - 1 = 0; oracle: numpy polynomial roots, positive one
    root = max(r.real for r in np.roots([1.0, 2.0, -1.0]))
    sol = linalg.care_solve([[-1.0]], [[1.0]], [[1.0]])
    assert sol.P[0, 0] == pytest.approx(root, rel=1e-12)
    p = sol.P[0, 0]
    assert abs(-2 * p - p * p + 1) < 1e-14


def test_care_random_detectable(rng):
    for _ in range(10):
        Ahat = rng.normal(size=(3, 3))
        C = rng.normal(size=(2, 3))
        assert linalg.pbh_detectable(Ahat, C)
        L = rng.normal(size=(3, 3))
        Q = L @ L.T + 0.1 * np.eye(3)
        sol = linalg.care_solve(Ahat, C.T @ C, Q)
        P = sol.P
        assert np.array_equal(P, P.T)
        res = Ahat @ P + P @ Ahat.T - P @ C.T @ C @ P + Q
        scale = max(np.max(np.abs(Ahat @ P)), np.max(np.abs(Q)))
        assert np.max(np.abs(res)) <= 1e-8 * scale
        assert sol.closed_loop.max_real_part < 0
        assert np.all(np.linalg.eigvalsh(P) > -1e-12)


def test_care_agrees_with_lyapunov_when_r_zero(rng):
    for _ in range(10):
        A = rng.normal(size=(4, 4))
        A -= (linalg.spectrum(A).max_real_part + 0.3) * np.eye(4)
        L = rng.normal(size=(4, 4))
        Q = L @ L.T + np.eye(4)
        P = linalg.care_solve(A, np.zeros((4, 4)), Q).P
        X = linalg.lyapunov_solve(A, Q)
        assert np.max(np.abs(P - X)) <= 1e-10 * np.max(np.abs(X))


def test_care_no_solution_carries_spectrum():
    # unstable mode invisible to R: no stabilising solution
    with pytest.raises(NoSolutionError) as info:
        linalg.care_solve([[1.0]], [[0.0]], [[1.0]])
    assert info.value.spectrum is not None


def test_dare_examples():
    assert linalg.dare_solve([[0.0]], [[0.0]], [[2.5]], [[0.0]], [[1.0]])[0, 0] == pytest.approx(2.5)
    a, q = 0.6, 1.3
    P = linalg.dare_solve([[a]], [[0.0]], [[q]], [[0.0]], [[0.7]])
    assert P[0, 0] == pytest.approx(q / (1 - a * a), rel=1e-12)


def test_dare_matches_brute_force_recursion(rng):
    # oracle: iterate the Riccati recursion to its fixed point
    for _ in range(5):
        A = rng.normal(size=(3, 3)) * 0.4
        C = rng.normal(size=(2, 3))
        L = rng.normal(size=(5, 5))
        W = L @ L.T + np.eye(5)
        Q, S, Rm = W[:3, :3], W[:3, 3:], W[3:, 3:]
        P = np.zeros((3, 3))
        for _ in range(5000):
            G = A @ P @ C.T + S
            P = A @ P @ A.T + Q - G @ np.linalg.solve(C @ P @ C.T + Rm, G.T)
        np.testing.assert_allclose(linalg.dare_solve(A, C, Q, S, Rm), P, rtol=1e-10, atol=1e-12)


def test_dare_small_dt_limit():
    from gcmaps.oracle import subsample
    from gcmaps.vougc import VouModel

    dt = 1e-3
    v = subsample(VouModel(np.array([[-1.0, 1.0], [0.0, -1.0]]), np.eye(2)), dt)
    Ab, Sb = v.Abar, v.SigmaBar
    P = linalg.dare_solve(Ab[1:, 1:], Ab[:1, 1:], Sb[1:, 1:], Sb[1:, :1], Sb[:1, :1])
    p33 = math.sqrt(2) - 1  # positive root of P^2 + 2P - 1 = 0
    # the discrete filter covariance itself converges; it is not O(dt)
    assert P[0, 0] == pytest.approx(p33, rel=1e-2)


def test_pbh_examples():
    assert not linalg.pbh_detectable([[1.0]], np.zeros((2, 1)))
    assert linalg.pbh_detectable([[1.0]], [[1.0]])


def test_pbh_hurwitz_full_matrix_implies_detectable(rng):
    for _ in range(30):
        n = rng.integers(2, 6)
        A = rng.normal(size=(n, n))
        A -= (linalg.spectrum(A).max_real_part + 0.1) * np.eye(n)
        k = rng.integers(1, n)
        # A33 = trailing block, C = the block above it
        assert linalg.pbh_detectable(A[k:, k:], A[:k, k:])


def test_pbh_true_for_hurwitz_a33(rng):
    for _ in range(20):
        A33 = rng.normal(size=(3, 3))
        A33 -= (linalg.spectrum(A33).max_real_part + 0.05) * np.eye(3)
        assert linalg.pbh_detectable(A33, np.zeros((2, 3)))


def test_van_loan_examples():
    A = np.array([[0.3, -2.0], [1.0, 0.1]])
    Q = np.array([[1.0, 0.2], [0.2, 3.0]])
    assert np.array_equal(linalg.van_loan_integral(A, Q, 0.0), np.zeros((2, 2)))
    np.testing.assert_allclose(linalg.van_loan_integral(np.zeros((2, 2)), Q, 0.7), 0.7 * Q, rtol=1e-14)
    exact, _ = quad(lambda u: 2 * math.exp(-2 * u), 0, 1)
    assert linalg.van_loan_integral([[-1.0]], [[2.0]], 1.0)[0, 0] == pytest.approx(exact, rel=1e-12)


def test_van_loan_matches_quadrature(rng):
    A = rng.normal(size=(3, 3))
    L = rng.normal(size=(3, 3))
    Q = L @ L.T
    h = 0.8
    exact, _ = quad_vec(lambda u: linalg.expm(A, u) @ Q @ linalg.expm(A, u).T, 0, h, epsabs=1e-13)
    np.testing.assert_allclose(linalg.van_loan_integral(A, Q, h), exact, rtol=1e-10, atol=1e-12)


def test_van_loan_negative_horizon():
    with pytest.raises(ValidationError):
        linalg.van_loan_integral([[-1.0]], [[1.0]], -0.1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_van_loan_small_h_limit(seed):
    r = np.random.default_rng(seed)
    # first-order error is h*(AQ + QA^T)/2, so bound the spectral norms
    A = r.normal(size=(3, 3))
    A *= r.uniform(0, 10) / np.linalg.norm(A, 2)
    Q = r.normal(size=(3, 3))
    Q = Q + Q.T
    Q *= r.uniform(0, 10) / np.linalg.norm(Q, 2)
    h = 1e-8
    assert np.max(np.abs(linalg.van_loan_integral(A, Q, h) / h - Q)) <= 1e-6


def test_spectrum_examples():
    s = linalg.spectrum(-np.eye(3))
    np.testing.assert_allclose(s.eigenvalues, [-1, -1, -1])
    s = linalg.spectrum([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(sorted(s.eigenvalues.imag), [-1, 1])
    assert s.max_real_part == pytest.approx(0.0, abs=1e-15)


def test_spectrum_lorenz_char_poly():
    from gcmaps.langevin import builtin_lorenz

    J = builtin_lorenz().jacobian([3.2, -1.5, 22.0])
    # characteristic polynomial from trace, principal 2x2 minors and det
    c1 = -np.trace(J)
    c2 = sum(J[i, i] * J[j, j] - J[i, j] * J[j, i] for i in range(3) for j in range(i + 1, 3))
    c3 = -np.linalg.det(J)
    for lam in linalg.spectrum(J).eigenvalues:
        val = lam**3 + c1 * lam**2 + c2 * lam + c3
        assert abs(val) <= 1e-9 * max(1.0, abs(lam) ** 3)


def test_symmetry_predicate():
    assert linalg.is_symmetric([[1.0, 2.0], [2.0, 1.0]])
    assert not linalg.is_symmetric([[1.0, 2.0], [2.0 + 1e-9, 1.0]])
