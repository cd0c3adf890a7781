"""Granger-causality rates for vector Ornstein-Uhlenbeck (VOU) processes.

A VOU process ``dy = A y dt + dw``, ``dw ~ N(0, Sigma dt)``, is split into
target, conditioning and source blocks. The GC rate from source to target
given the conditioning block is

    rate = trace[Sigma_tt^{-1} A_ts P A_ts^T]

where ``P`` (source x source) is the stabilising solution of

    A_ss P + P A_ss^T + Sigma_ss
        = (P A_rs^T + Sigma_sr) Sigma_rr^{-1} (P A_rs^T + Sigma_sr)^T

and ``r`` is the reduced block (target and conditioning together). The
solution exists whenever ``Sigma`` is positive-definite and the pair
``(A_ss, A_rs)`` is detectable, so ``A`` itself may be unstable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as spla

from . import linalg
from .errors import (
    ConsistencyError,
    DimensionError,
    GcError,
    IllConditionedCovarianceError,
    NoSolutionError,
    NotDetectableError,
    NumericalDegeneracyError,
    ValidationError,
)

PD_TOL = 1e-12
NEG_FLOOR = 1e-10


def _chol(M, name, pd_tol=PD_TOL):
    """Lower Cholesky factor with a relative pivot threshold."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise IllConditionedCovarianceError(f"{name} is not positive-definite") from None
    if M.size and np.min(np.diag(L)) ** 2 <= pd_tol * np.max(np.diag(M)):
        raise IllConditionedCovarianceError(f"{name} is numerically singular")
    return L


def _solve_chol(L, B):
    return spla.cho_solve((L, True), B)


@dataclass(frozen=True)
class VouModel:
    """Drift ``A`` and noise intensity ``Sigma`` of ``dy = A y dt + dw``."""

    A: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        A = linalg.as_matrix(self.A, "A")
        S = linalg.as_matrix(self.Sigma, "Sigma")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if S.shape != A.shape:
            raise DimensionError(f"Sigma {S.shape} does not match A {A.shape}")
        if A.shape[0] == 0:
            raise DimensionError("empty model")
        if not linalg.is_symmetric(S):
            raise ValidationError("Sigma is not symmetric")
        try:
            _chol(S, "Sigma")
        except IllConditionedCovarianceError as exc:
            raise ValidationError(str(exc)) from None
        A = A.copy()
        S = S.copy()
        A.flags.writeable = False
        S.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Sigma", S)

    @property
    def n(self):
        return self.A.shape[0]

    def scaled(self, nu):
        """Same drift with noise intensity multiplied by ``nu``."""
        return VouModel(self.A, self.Sigma * nu)


@dataclass(frozen=True)
class Partition:
    """Disjoint target / conditioning / source index lists (0-based)."""

    target: tuple
    source: tuple
    cond: tuple = ()

    def __post_init__(self):
        for name in ("target", "source", "cond"):
            vals = tuple(int(i) for i in getattr(self, name))
            object.__setattr__(self, name, vals)

    @property
    def reduced(self):
        return tuple(sorted(self.target + self.cond))

    def validate(self, n):
        if not self.target or not self.source:
            raise ValidationError("target and source must be non-empty")
        for name in ("target", "source", "cond"):
            vals = getattr(self, name)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValidationError(f"{name} indices must be strictly increasing")
        allidx = self.target + self.cond + self.source
        if len(set(allidx)) != len(allidx):
            raise ValidationError("partition blocks overlap")
        if sorted(allidx) != list(range(n)):
            raise ValidationError(f"partition does not cover exactly 0..{n - 1}")


@dataclass(frozen=True)
class GcResult:
    rate: float
    te_rate: float
    P33: np.ndarray
    kalman_gain: np.ndarray
    closed_loop_max_re: float
    detectable: bool
    source_decoupled: bool
    marginal: bool
    residual: float


@dataclass
class GcGraph:
    """Matrix of rates ``rates[i, j]`` from ``y_j`` to ``y_i``.

    The diagonal and failed cells are NaN; failures are explained in
    ``errors`` keyed by ``(i, j)``.
    """

    n: int
    rates: np.ndarray
    detectable: np.ndarray
    errors: dict = field(default_factory=dict)

    def ok(self, i, j):
        return i != j and (i, j) not in self.errors


@dataclass(frozen=True)
class _SourceSolution:
    P: np.ndarray
    K: np.ndarray
    closed_loop_max_re: float
    detectable: bool
    decoupled: bool
    marginal: bool
    residual: float


def _scalar_care(a, b, q):
    """Stabilising root of ``a P^2 - 2 b P - q = 0`` (a >= 0, q > 0).

    Returns ``(P, closed-loop eigenvalue b - a P)``.
    """
    if a > 0.0:
        root = math.sqrt(b * b + a * q)
        # pick the algebraically equivalent form without cancellation
        P = q / (root - b) if b <= 0.0 else (b + root) / a
        return P, b - a * P
    if b < 0.0:
        return -q / (2.0 * b), b
    raise NoSolutionError(
        f"no stabilising solution: source decoupled with non-negative drift {b:.6g}",
        spectrum=np.array([b, -b], dtype=complex),
    )


def _solve_source(model, reduced, source, method="auto"):
    A, S = model.A, model.Sigma
    r = list(reduced)
    s = list(source)
    A33 = A[np.ix_(s, s)]
    Ar3 = A[np.ix_(r, s)]
    S33 = S[np.ix_(s, s)]
    S3r = S[np.ix_(s, r)]
    Srr = S[np.ix_(r, r)]
    Lr = _chol(Srr, "Sigma_RR")

    decoupled = not np.any(Ar3)
    detectable = linalg.pbh_detectable(A33, Ar3)
    if decoupled and not linalg.spectrum(A33).hurwitz:
        m = len(s)
        return _SourceSolution(
            P=np.zeros((m, m)),
            K=_solve_chol(Lr, S3r.T).T,
            closed_loop_max_re=linalg.spectrum(A33).max_real_part,
            detectable=detectable,
            decoupled=True,
            marginal=False,
            residual=0.0,
        )
    if not detectable:
        raise NotDetectableError("(A_ss, A_rs) is not detectable")

    SinvA = _solve_chol(Lr, Ar3)
    Ahat = A33 - S3r @ SinvA
    R = linalg.symmetrize(Ar3.T @ SinvA)
    Qhat = linalg.symmetrize(S33 - S3r @ _solve_chol(Lr, S3r.T))

    if method == "auto":
        method = "quadratic" if len(s) == 1 else "schur"
    if method == "quadratic":
        if len(s) != 1:
            raise ValidationError("quadratic path needs a univariate source")
        a, b, q = float(R[0, 0]), float(Ahat[0, 0]), float(Qhat[0, 0])
        p, cl = _scalar_care(a, b, q)
        if cl >= linalg.STAB_TOL:
            raise NoSolutionError(f"closed loop not stable ({cl:.3g})")
        P = np.array([[p]])
        terms = max(abs(a * p * p), abs(2 * b * p), abs(q), np.finfo(float).tiny)
        residual = abs(a * p * p - 2 * b * p - q) / terms
        cl_max, marginal = cl, cl > -linalg.STAB_TOL
    elif method == "schur":
        sol = linalg.care_solve(Ahat, R, Qhat)
        P = sol.P
        cl_max, marginal, residual = sol.closed_loop.max_real_part, sol.marginal, sol.residual
    else:
        raise ValidationError(f"unknown CARE method {method!r}")

    K = _solve_chol(Lr, (P @ Ar3.T + S3r).T).T
    return _SourceSolution(P, K, cl_max, detectable, decoupled, marginal, residual)


def _trace_rate(model, target, source, P):
    t = list(target)
    s = list(source)
    A13 = model.A[np.ix_(t, s)]
    L1 = _chol(model.Sigma[np.ix_(t, t)], "Sigma_11")
    return float(np.trace(_solve_chol(L1, A13 @ P @ A13.T)))


def _result(rate, sol):
    if rate < -NEG_FLOOR:
        raise ConsistencyError(f"negative GC rate {rate:.3g}")
    return GcResult(
        rate=rate,
        te_rate=rate / 2,
        P33=sol.P,
        kalman_gain=sol.K,
        closed_loop_max_re=sol.closed_loop_max_re,
        detectable=sol.detectable,
        source_decoupled=sol.decoupled,
        marginal=sol.marginal,
        residual=sol.residual,
    )


def conditional_rate(model: VouModel, part: Partition, method: str = "auto") -> GcResult:
    """GC rate from ``part.source`` to ``part.target`` given ``part.cond``.

    ``method`` selects the Riccati solver: ``"quadratic"`` (univariate
    source only), ``"schur"`` (Hamiltonian Schur) or ``"auto"``.

    If ``A_rs`` is exactly zero and ``A_ss`` is not Hurwitz the rate is
    reported as 0 with ``source_decoupled`` set, since the reduced dynamics
    do not see the source at all.
    """
    part.validate(model.n)
    sol = _solve_source(model, part.reduced, part.source, method)
    if sol.decoupled and not np.any(sol.P):
        rate = 0.0
    else:
        rate = _trace_rate(model, part.target, part.source, sol.P)
    return _result(rate, sol)


def _complement(n, *blocks):
    used = set().union(*map(set, blocks))
    return tuple(i for i in range(n) if i not in used)


def unconditional_rate(model: VouModel, target: Sequence[int], source: Sequence[int]) -> GcResult:
    """Unconditional GC rate from ``source`` to ``target``.

    Every remaining variable plays the role of a second source, and

        R(source -> target) = R(source+rest -> target) - R(rest -> target | source).

    The returned diagnostics are those of the first term, except that
    ``residual`` and ``closed_loop_max_re`` take the worse of the two
    solves and the flags are combined.
    """
    target = tuple(sorted(target))
    source = tuple(sorted(source))
    rest = _complement(model.n, target, source)
    if not rest:
        return conditional_rate(model, Partition(target, source))
    full = conditional_rate(model, Partition(target, tuple(sorted(source + rest))))
    part = conditional_rate(model, Partition(target, rest, cond=source))
    rate = full.rate - part.rate
    if rate < -1e-8:
        raise ConsistencyError(f"unconditional rate {rate:.3g} is negative")
    return GcResult(
        rate=rate,
        te_rate=rate / 2,
        P33=full.P33,
        kalman_gain=full.kalman_gain,
        closed_loop_max_re=max(full.closed_loop_max_re, part.closed_loop_max_re),
        detectable=full.detectable and part.detectable,
        source_decoupled=full.source_decoupled,
        marginal=full.marginal or part.marginal,
        residual=max(full.residual, part.residual),
    )


def _empty_graph(n):
    rates = np.full((n, n), np.nan)
    return GcGraph(n, rates, np.zeros((n, n), dtype=bool))


def pairwise_graph(model: VouModel) -> GcGraph:
    """Pairwise-conditional rates ``G[i, j] = R(y_j -> y_i | rest)``.

    The Riccati equation for source ``j`` does not depend on ``i``, so it
    is solved once per column. Failures are recorded per cell.
    """
    n = model.n
    if n < 2:
        raise ValidationError("graph needs n >= 2")
    g = _empty_graph(n)
    for j in range(n):
        reduced = tuple(k for k in range(n) if k != j)
        try:
            sol = _solve_source(model, reduced, (j,))
        except GcError as exc:
            for i in reduced:
                g.errors[(i, j)] = f"{type(exc).__name__}: {exc}"
            continue
        for i in reduced:
            g.detectable[i, j] = sol.detectable
            try:
                if sol.decoupled and not np.any(sol.P):
                    rate = 0.0
                else:
                    rate = _trace_rate(model, (i,), (j,), sol.P)
                g.rates[i, j] = _result(rate, sol).rate
            except GcError as exc:
                g.errors[(i, j)] = f"{type(exc).__name__}: {exc}"
    return g


def unconditional_graph(model: VouModel) -> GcGraph:
    """Unconditional pairwise rates ``U[i, j] = R(y_j -> y_i)``.

    For each target ``i`` the rate from all other variables is obtained
    from one (n-1)-dimensional Riccati solve; the part of it carried by
    ``y_[ij]`` given ``y_j`` is then subtracted.
    """
    n = model.n
    if n < 2:
        raise ValidationError("graph needs n >= 2")
    g = _empty_graph(n)
    for i in range(n):
        others = tuple(k for k in range(n) if k != i)
        try:
            full = conditional_rate(model, Partition((i,), others))
        except GcError as exc:
            for j in others:
                g.errors[(i, j)] = f"{type(exc).__name__}: {exc}"
            continue
        for j in others:
            rest = tuple(k for k in others if k != j)
            try:
                if rest:
                    part = conditional_rate(model, Partition((i,), rest, cond=(j,)))
                    rate = full.rate - part.rate
                    if rate < -1e-8:
                        raise ConsistencyError(f"unconditional rate {rate:.3g} is negative")
                    det = full.detectable and part.detectable
                else:
                    rate, det = full.rate, full.detectable
                g.rates[i, j] = rate
                g.detectable[i, j] = det
            except GcError as exc:
                g.errors[(i, j)] = f"{type(exc).__name__}: {exc}"
    return g


def _logdet_pd(M, what):
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyError(
            f"{what} is not positive-definite; horizon too small or too large"
        ) from None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def finite_horizon_gc(model: VouModel, part: Partition, h: float) -> float:
    """GC at prediction horizon ``h``: log det ratio of reduced and full
    prediction-error covariances restricted to the target.

    Exact for VOU processes (kernel ``e^{A u}``); the reduced kernel is
    ``[I 0] e^{A u} [I; K]`` with ``K`` the Kalman gain from the Riccati
    solution. ``F(h)/h`` tends to :func:`conditional_rate` as ``h -> 0``.
    """
    if not h > 0:
        raise ValidationError(f"horizon must be positive, got {h}")
    res = conditional_rate(model, part)
    n = model.n
    r = list(part.reduced)
    M = np.zeros((n, len(r)))
    M[r, np.arange(len(r))] = 1.0
    M[list(part.source), :] = res.kalman_gain
    Srr = model.Sigma[np.ix_(r, r)]
    E = linalg.van_loan_integral(model.A, model.Sigma, h)
    ER = linalg.van_loan_integral(model.A, linalg.symmetrize(M @ Srr @ M.T), h)
    t = list(part.target)
    return _logdet_pd(ER[np.ix_(t, t)], "reduced error covariance") - _logdet_pd(
        E[np.ix_(t, t)], "full error covariance"
    )
