"""Dense matrix kernels and matrix-equation solvers.

All functions are pure: inputs are never modified and no state is shared,
so they can be called concurrently.

Sign conventions
----------------
Lyapunov:  ``A X + X A^T + Q = 0``
CARE (filter form):  ``Ahat P + P Ahat^T - P R P + Qhat = 0``
DARE:  ``P = A P A^T + Q - (A P C^T + S)(C P C^T + Rm)^{-1}(A P C^T + S)^T``
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (
    ConvergenceError,
    DimensionError,
    NoSolutionError,
    SingularEquationError,
    ValidationError,
)

log = logging.getLogger(__name__)

SYM_TOL = 1e-12
STAB_TOL = 1e-9
PBH_TOL = 1e-10
LYAP_SOLVABILITY_TOL = 1e-10


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    max_real_part: float

    @classmethod
    def of(cls, eigenvalues):
        ev = np.asarray(eigenvalues, dtype=complex)
        mrp = float(np.max(ev.real)) if ev.size else -math.inf
        return cls(ev, mrp)

    @property
    def hurwitz(self):
        return self.max_real_part < 0.0


@dataclass(frozen=True)
class CareSolution:
    """Stabilising CARE solution with diagnostics.

    ``residual`` is the max-abs residual divided by the magnitude of the
    largest term in the equation.
    """

    P: np.ndarray
    closed_loop: Spectrum
    residual: float
    marginal: bool


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array (a copy is not forced)."""
    a = np.asarray(M, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def _square(M, name):
    a = as_matrix(M, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def is_symmetric(M, tol=SYM_TOL):
    a = np.asarray(M, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if a.size == 0:
        return True
    return float(np.max(np.abs(a - a.T))) <= tol * max(1.0, float(np.max(np.abs(a))))


def _require_symmetric(M, name):
    if not is_symmetric(M):
        raise ValidationError(f"{name} is not symmetric")


def symmetrize(M):
    return 0.5 * (M + M.T)


def _maxabs(M):
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def spectrum(M):
    """Eigenvalues of a square matrix and their largest real part."""
    a = _square(M, "M")
    return Spectrum.of(spla.eigvals(a))


def expm(M, t=1.0):
    """Matrix exponential ``e^{M t}`` (scaling and squaring, Pade 13)."""
    a = _square(M, "M")
    return spla.expm(a * t)


def lyapunov_solve(A, Q):
    """Solve ``A X + X A^T + Q = 0`` by the Bartels-Stewart method.

    Raises
    ------
    SingularEquationError
        If two eigenvalues of ``A`` sum to (numerically) zero.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    if A.shape != Q.shape:
        raise DimensionError(f"A {A.shape} and Q {Q.shape} differ in size")
    _require_symmetric(Q, "Q")
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))

    ev = spla.eigvals(A)
    sums = np.abs(ev[:, None] + ev[None, :])
    scale = max(1.0, float(np.max(np.abs(ev))))
    if float(np.min(sums)) <= LYAP_SOLVABILITY_TOL * scale:
        raise SingularEquationError(
            "Lyapunov equation is singular: eigenvalues of A sum to "
            f"{float(np.min(sums)):.3g}"
        )

    X = symmetrize(spla.solve_continuous_lyapunov(A, -Q))
    res = _maxabs(A @ X + X @ A.T + Q)
    log.debug("lyapunov_solve residual %.3g", res)
    if res > 1e-10 * max(1.0, _maxabs(Q), 2 * _maxabs(A @ X)):
        raise ConvergenceError(f"Lyapunov residual {res:.3g} too large")
    return X


def _care_residual(Ahat, R, Qhat, P):
    AP = Ahat @ P
    PRP = P @ R @ P
    res = AP + AP.T - PRP + Qhat
    scale = max(2 * _maxabs(AP), _maxabs(PRP), _maxabs(Qhat), np.finfo(float).tiny)
    return _maxabs(res) / scale, res


def care_solve(Ahat, R, Qhat, polish=True):
    """Stabilising solution of ``Ahat P + P Ahat^T - P R P + Qhat = 0``.

    Uses the ordered real Schur form of the Hamiltonian
    ``[[Ahat^T, -R], [-Qhat, -Ahat]]``; the stable invariant subspace
    ``[U1; U2]`` gives ``P = U2 U1^{-1}``. ``Qhat`` and ``R`` are rebalanced
    by a power of two before forming the Hamiltonian so that rescaling the
    noise intensity changes ``P`` by exactly that factor.

    Parameters
    ----------
    Ahat : (m, m) array_like
    R, Qhat : (m, m) array_like
        Symmetric positive-semidefinite.
    polish : bool
        Apply one Newton step when the relative residual exceeds 1e-13.

    Returns
    -------
    CareSolution
    """
    Ahat = _square(Ahat, "Ahat")
    R = _square(R, "R")
    Qhat = _square(Qhat, "Qhat")
    m = Ahat.shape[0]
    if R.shape != (m, m) or Qhat.shape != (m, m):
        raise DimensionError("Ahat, R and Qhat must all be m x m")
    _require_symmetric(R, "R")
    _require_symmetric(Qhat, "Qhat")

    qmax = _maxabs(Qhat)
    s = 2.0 ** round(math.log2(qmax)) if qmax > 0 else 1.0
    Qs = Qhat / s
    Rs = R * s

    H = np.block([[Ahat.T, -Rs], [-Qs, -Ahat]])
    T, Z, sdim = spla.schur(H, output="real", sort="lhp")
    if sdim != m:
        raise NoSolutionError(
            f"Hamiltonian has {sdim} stable eigenvalues, need {m}; "
            "no stabilising solution",
            spectrum=spla.eigvals(H),
        )
    U1 = Z[:m, :m]
    U2 = Z[m:, :m]
    if 1.0 / np.linalg.cond(U1) < np.finfo(float).eps * 10:
        raise NoSolutionError(
            "stable invariant subspace is not a graph (U1 singular)",
            spectrum=spla.eigvals(H),
        )
    P = symmetrize(np.linalg.solve(U1.T, U2.T).T)

    rel, res = _care_residual(Ahat, Rs, Qs, P)
    if polish and rel > 1e-13:
        Acl = Ahat - P @ Rs
        try:
            dP = spla.solve_continuous_lyapunov(Acl, -res)
        except (np.linalg.LinAlgError, ValueError):
            dP = None
        if dP is not None and np.all(np.isfinite(dP)):
            P_new = symmetrize(P + dP)
            rel_new, _ = _care_residual(Ahat, Rs, Qs, P_new)
            if rel_new < rel:
                P, rel = P_new, rel_new

    P = P * s
    cl = Spectrum.of(spla.eigvals(Ahat - P @ R))
    if cl.max_real_part >= STAB_TOL:
        raise NoSolutionError(
            f"closed loop not Hurwitz (max Re = {cl.max_real_part:.3g})",
            spectrum=spla.eigvals(H),
        )
    if rel > 1e-8:
        raise ConvergenceError(f"CARE relative residual {rel:.3g} exceeds 1e-8")
    log.debug("care_solve residual %.3g, closed-loop max Re %.3g", rel, cl.max_real_part)
    return CareSolution(P, cl, rel, cl.max_real_part > -STAB_TOL)


def dare_solve(A, C, Q, S, Rm, max_iter=100):
    """Stabilising solution of the filter DARE with cross term ``S``.

    The cross term is removed (``A - S Rm^{-1} C``, ``Q - S Rm^{-1} S^T``)
    and the resulting equation ``P = At P (I + G P)^{-1} At^T + Qt`` with
    ``G = C^T Rm^{-1} C`` is solved by the structure-preserving doubling
    algorithm, which converges quadratically.
    """
    A = _square(A, "A")
    m = A.shape[0]
    C = as_matrix(C, "C")
    Q = _square(Q, "Q")
    S = as_matrix(S, "S")
    Rm = _square(Rm, "Rm")
    p = Rm.shape[0]
    if C.shape != (p, m) or Q.shape != (m, m) or S.shape != (m, p):
        raise DimensionError("DARE dimensions are not conformant")
    _require_symmetric(Rm, "Rm")
    _require_symmetric(Q, "Q")
    try:
        Rc = spla.cho_factor(Rm)
    except np.linalg.LinAlgError:
        raise ValidationError("Rm is not positive-definite") from None

    At = A - S @ spla.cho_solve(Rc, C)
    Qt = symmetrize(Q - S @ spla.cho_solve(Rc, S.T))
    G = symmetrize(C.T @ spla.cho_solve(Rc, C))

    # doubling on  X = Ak^T X (I + G X)^{-1} Ak + H  with Ak = At^T
    Ak, Gk, Hk = At.T.copy(), G, Qt
    eye = np.eye(m)
    for _ in range(max_iter):
        W = eye + Gk @ Hk
        try:
            WA = np.linalg.solve(W, Ak)
            WG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError:
            raise NoSolutionError("doubling iteration hit a singular step") from None
        H_next = symmetrize(Hk + Ak.T @ Hk @ WA)
        G_next = symmetrize(Gk + Ak @ WG @ Ak.T)
        Ak = Ak @ WA
        if not (np.all(np.isfinite(H_next)) and np.all(np.isfinite(Ak))):
            raise NoSolutionError("doubling iteration diverged")
        delta = _maxabs(H_next - Hk)
        Hk, Gk = H_next, G_next
        if delta <= 1e-15 * max(_maxabs(Hk), np.finfo(float).tiny):
            break
    else:
        raise NoSolutionError(f"doubling iteration did not converge in {max_iter} steps")

    P = Hk
    APC = A @ P @ C.T + S
    V = C @ P @ C.T + Rm
    res = P - (A @ P @ A.T + Q - APC @ np.linalg.solve(V, APC.T))
    scale = max(_maxabs(P), _maxabs(Q), _maxabs(A @ P @ A.T), np.finfo(float).tiny)
    rel = _maxabs(res) / scale
    if rel > 1e-10:
        raise ConvergenceError(f"DARE relative residual {rel:.3g} exceeds 1e-10")
    K = APC @ np.linalg.inv(V)
    rho = float(np.max(np.abs(spla.eigvals(A - K @ C)))) if m else 0.0
    if rho >= 1.0:
        raise NoSolutionError(f"DARE solution not stabilising (spectral radius {rho:.6g})")
    return P


def pbh_detectable(A33, C, tol=PBH_TOL):
    """Popov-Belevitch-Hautus detectability test for the pair ``(A33, C)``.

    Every eigenvalue of ``A33`` with real part ``>= -tol`` must leave
    ``[lambda I - A33; C]`` with full column rank; rank counts singular
    values above ``tol * sigma_max``.
    """
    A33 = _square(A33, "A33")
    m = A33.shape[0]
    C = np.asarray(C, dtype=float).reshape(-1, m)
    for lam in spla.eigvals(A33):
        if lam.real < -tol:
            continue
        stacked = np.vstack([lam * np.eye(m) - A33, C.astype(complex)])
        sv = np.linalg.svd(stacked, compute_uv=False)
        smax = sv[0] if sv.size else 0.0
        rank = int(np.sum(sv > tol * smax)) if smax > 0 else 0
        if rank < m:
            return False
    return True


def van_loan_integral(A, Q, h):
    """``int_0^h e^{A u} Q e^{A^T u} du`` via the Van Loan block exponential."""
    A = _square(A, "A")
    Q = _square(Q, "Q")
    n = A.shape[0]
    if Q.shape != (n, n):
        raise DimensionError("A and Q differ in size")
    if h < 0:
        raise ValidationError(f"domain error: horizon h={h} is negative")
    if h == 0:
        return np.zeros((n, n))
    M = np.block([[A, Q], [np.zeros((n, n)), -A.T]]) * h
    E = spla.expm(M)
    G = E[:n, n:]
    F = E[:n, :n]
    return symmetrize(G @ F.T)
