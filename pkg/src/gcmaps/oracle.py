"""Discrete-time cross-check of the VOU GC rate.

Sampling a stable VOU every ``dt`` gives a VAR(1) process. Its GC follows
from a reduced DARE, and ``F(dt)/dt`` converges to the continuous-time rate
at first order in ``dt``. This path shares no Riccati code with the CARE
route in :mod:`gcmaps.vougc`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import NumericalDegeneracyError, UnsupportedError, ValidationError
from .vougc import Partition, VouModel


@dataclass(frozen=True)
class Var1Model:
    Abar: np.ndarray
    SigmaBar: np.ndarray
    Omega: np.ndarray


def subsample(model: VouModel, dt: float) -> Var1Model:
    """Exact VAR(1) form of a stable VOU sampled at interval ``dt``."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not linalg.spectrum(model.A).hurwitz:
        raise UnsupportedError("subsampling oracle requires a Hurwitz-stable drift matrix")
    Abar = linalg.expm(model.A, dt)
    Omega = linalg.lyapunov_solve(model.A, model.Sigma)
    SigmaBar = linalg.symmetrize(Omega - Abar @ Omega @ Abar.T)
    lo = float(np.min(np.linalg.eigvalsh(SigmaBar)))
    if lo < -1e-12 * max(1.0, float(np.max(np.abs(Omega)))):
        raise NumericalDegeneracyError(f"innovation covariance not PSD (min eig {lo:.3g})")
    return Var1Model(Abar, SigmaBar, Omega)


def _logdet(M, what):
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyError(f"{what} is not positive-definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def discrete_ss_gc(var1: Var1Model, part: Partition) -> float:
    """State-space GC of a VAR(1) model via the reduced DARE."""
    n = var1.Abar.shape[0]
    part.validate(n)
    r = list(part.reduced)
    s = list(part.source)
    t = list(part.target)
    Ab, Sb = var1.Abar, var1.SigmaBar
    A33 = Ab[np.ix_(s, s)]
    Ar3 = Ab[np.ix_(r, s)]
    P = linalg.dare_solve(
        A33,
        Ar3,
        Sb[np.ix_(s, s)],
        Sb[np.ix_(s, r)],
        Sb[np.ix_(r, r)],
    )
    SigR = Ar3 @ P @ Ar3.T + Sb[np.ix_(r, r)]
    # positions of the target inside the reduced block
    pos = [r.index(i) for i in t]
    SigR11 = linalg.symmetrize(SigR[np.ix_(pos, pos)])
    return _logdet(SigR11, "reduced innovation covariance") - _logdet(
        Sb[np.ix_(t, t)], "innovation covariance"
    )


def rate_via_subsampling(model: VouModel, part: Partition, dt: float) -> float:
    """``F(dt) / dt`` from the subsampled VAR(1) model."""
    return discrete_ss_gc(subsample(model, dt), part) / dt


def convergence_slope(dts, errors):
    """Least-squares slope of ``log|error|`` against ``log dt``."""
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.abs(np.asarray(errors, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])
