"""Langevin systems ``dy = f(y) dt + dw(y, t)`` and their local linearisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .. import linalg
from ..errors import DiffusionError, DimensionError, DomainError, GcError, ValidationError
from ..vougc import VouModel
from . import expr as E
from .parser import parse_document

SING_TOL = 1e-10

_EVAL_ERRORS = (ValueError, ZeroDivisionError, OverflowError)


def fd_jacobian(f, y):
    """Central finite-difference Jacobian with step ``cbrt(eps) * max(1, |y_i|)``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    J = np.empty((n, n))
    base = np.finfo(float).eps ** (1 / 3)
    for i in range(n):
        h = base * max(1.0, abs(y[i]))
        yp = y.copy()
        ym = y.copy()
        yp[i] += h
        ym[i] -= h
        J[:, i] = (np.asarray(f(yp)) - np.asarray(f(ym))) / (yp[i] - ym[i])
    return J


class LangevinSystem:
    """An autonomous Langevin system.

    Parameters
    ----------
    n : int
    drift : callable
        ``drift(y) -> sequence of n floats``.
    jacobian : callable or None
        ``jacobian(y) -> (n, n) array``; central finite differences of
        ``drift`` are used when omitted.
    sigma : ("scalar", nu) | ("matrix", array) | ("expr", callable)
        Diffusion covariance specification.
    params : dict
        Named parameter values (informational for hand-coded systems).
    """

    def __init__(self, n, drift, jacobian=None, sigma=("scalar", 1.0), params=None,
                 drift_exprs=None, jacobian_exprs=None, name="system"):
        self.n = int(n)
        self._drift = drift
        self._jacobian = jacobian
        self.params = dict(params or {})
        self.drift_exprs = drift_exprs
        self.jacobian_exprs = jacobian_exprs
        self.name = name
        kind, value = sigma
        if kind == "scalar":
            nu = float(value)
            if not (math.isfinite(nu) and nu > 0):
                raise DiffusionError(f"scalar diffusion must be positive, got {nu}")
            self._sigma_const = nu * np.eye(self.n)
        elif kind == "matrix":
            S = linalg.as_matrix(value, "sigma")
            if S.shape != (self.n, self.n):
                raise DimensionError(f"diffusion matrix must be {self.n}x{self.n}")
            _check_pd(S, None)
            self._sigma_const = S
        elif kind == "expr":
            self._sigma_const = None
        else:
            raise ValidationError(f"unknown diffusion kind {kind!r}")
        self.sigma_kind = kind
        self._sigma_fn = value if kind == "expr" else None

    @property
    def has_symbolic_jacobian(self):
        return self._jacobian is not None

    @property
    def constant_sigma(self):
        return self._sigma_const

    def drift(self, y):
        return self._drift(y)

    def jacobian(self, y):
        if self._jacobian is not None:
            return np.asarray(self._jacobian(y), dtype=float)
        return fd_jacobian(self._drift, y)

    def sigma(self, y):
        if self._sigma_const is not None:
            return self._sigma_const
        S = np.asarray(self._sigma_fn(y), dtype=float).reshape(self.n, self.n)
        _check_pd(S, y)
        return S

    @classmethod
    def from_text(cls, text, name="system"):
        """Build a system from a definition document (see :mod:`.parser`)."""
        doc = parse_document(text)
        return cls.from_exprs(doc["n"], doc["drift"], doc["sigma"], doc["params"], name=name)

    @classmethod
    def from_exprs(cls, n, drift_exprs, sigma_spec, params, name="system"):
        names = list(params)
        pvals = tuple(params[k] for k in names)
        jac_exprs = [[E.differentiate(f, j) for j in range(n)] for f in drift_exprs]
        f_c = E.compile_exprs(drift_exprs, names)
        j_c = E.compile_exprs([e for row in jac_exprs for e in row], names)

        def drift(y):
            return f_c(y, pvals)

        def jacobian(y):
            return np.array(j_c(y, pvals), dtype=float).reshape(n, n)

        kind, value = sigma_spec
        if kind == "expr":
            s_c = E.compile_exprs([e for row in value for e in row], names)
            sigma = ("expr", lambda y: s_c(y, pvals))
        else:
            sigma = (kind, value)
        return cls(n, drift, jacobian, sigma, params, drift_exprs, jac_exprs, name=name)


def _check_pd(S, y):
    where = "" if y is None else f" at y={list(np.asarray(y, dtype=float))}"
    if not np.all(np.isfinite(S)):
        raise DomainError(f"non-finite diffusion{where}")
    if not linalg.is_symmetric(S):
        raise DiffusionError(f"diffusion matrix not symmetric{where}")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DiffusionError(f"diffusion matrix not positive-definite{where}") from None
    if np.min(np.diag(L)) ** 2 <= 1e-12 * np.max(np.diag(S)):
        raise DiffusionError(f"diffusion matrix numerically singular{where}")


@dataclass(frozen=True)
class LocalLinearization:
    point: np.ndarray
    vou: VouModel
    det_j: float
    stability_exponent: float
    singular: bool


def linearize(system: LangevinSystem, y0) -> LocalLinearization:
    """Local VOU model ``(J(y0), Sigma(y0))`` at ``y0``.

    The shift to the mean-reversion level is not applied; it changes only
    the mean, not the drift matrix or covariance, so rates are computed at
    singular-Jacobian points too and those points are flagged instead.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (system.n,):
        raise DimensionError(f"point must have {system.n} entries")
    try:
        f = system.drift(y0)
        J = system.jacobian(y0)
    except _EVAL_ERRORS as exc:
        raise DomainError(f"drift or Jacobian evaluation failed at y={list(y0)}: {exc}") from None
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(J))):
        raise DomainError(f"non-finite drift or Jacobian at y={list(y0)}")
    try:
        S = system.sigma(y0)
    except GcError:
        raise
    except _EVAL_ERRORS as exc:
        raise DomainError(f"diffusion evaluation failed at y={list(y0)}: {exc}") from None
    det = float(np.linalg.det(J))
    lam = linalg.spectrum(J).max_real_part
    scale = max(1.0, float(np.max(np.sum(np.abs(J), axis=1))))
    singular = abs(det) <= SING_TOL * scale**system.n
    try:
        vou = VouModel(J, S)
    except ValidationError as exc:
        raise DiffusionError(f"{exc} at y={list(y0)}") from None
    return LocalLinearization(y0, vou, det, lam, singular)


LORENZ_TEXT = """\
# Lorenz system with isotropic notional noise
[system]
n = 3
[params]
sigma = 10
rho = 28
beta = 8/3
[drift]
dy1 = sigma*(y2 - y1)
dy2 = y1*(rho - y3) - y2
dy3 = y1*y2 - beta*y3
[sigma]
scalar = 1
"""


def builtin_lorenz(sigma=10.0, rho=28.0, beta=8.0 / 3.0, nu=1.0) -> LangevinSystem:
    """Lorenz system with hand-coded Jacobian and diffusion ``nu * I``."""
    for name, v in (("sigma", sigma), ("rho", rho), ("beta", beta), ("nu", nu)):
        if not math.isfinite(v):
            raise ValidationError(f"{name} must be finite")

    def drift(y):
        y1, y2, y3 = y[0], y[1], y[2]
        return (sigma * (y2 - y1), y1 * (rho - y3) - y2, y1 * y2 - beta * y3)

    def jacobian(y):
        y1, y2, y3 = float(y[0]), float(y[1]), float(y[2])
        return np.array(
            [[-sigma, sigma, 0.0], [rho - y3, -1.0, -y1], [y2, y1, -beta]]
        )

    params = {"sigma": sigma, "rho": rho, "beta": beta, "nu": nu}
    return LangevinSystem(3, drift, jacobian, ("scalar", nu), params, name="lorenz")


def lorenz_det(y, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    """Closed-form Jacobian determinant of the Lorenz system."""
    y1, y2, y3 = y
    return sigma * (beta * (rho - 1 - y3) - y1 * (y1 + y2))


def linear_system(A, Sigma) -> LangevinSystem:
    """Globally linear system ``f(y) = A y`` with constant diffusion."""
    A = linalg.as_matrix(A, "A")
    n = A.shape[0]
    rows = [tuple(r) for r in A.tolist()]

    def drift(y):
        return tuple(sum(a * yi for a, yi in zip(r, y)) for r in rows)

    return LangevinSystem(n, drift, lambda y: A.copy(), ("matrix", Sigma), name="linear")
