"""Trajectories, GC / stability maps and trajectory-averaged global rates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import linalg
from .errors import CoverageError, DivergenceError, DomainError, GcError, ValidationError
from .langevin.system import LangevinSystem, linearize
from .vougc import GcGraph, Partition, conditional_rate, pairwise_graph

OVERFLOW_GUARD = 1e12
DEFAULT_SUBSTEPS = 10
MAX_EXCLUDED = 0.01
RNG_ALGORITHM = "PCG64"

_EVAL_ERRORS = (OverflowError, ZeroDivisionError, FloatingPointError, ValueError)


def _eval_failure(exc, y, t):
    if isinstance(exc, GcError):
        return exc
    if isinstance(exc, (OverflowError, FloatingPointError)):
        return DivergenceError(f"state overflowed near t={t:.6g}: {exc}", state=list(y), time=t)
    return DomainError(f"drift evaluation failed near t={t:.6g} at y={list(y)}: {exc}")


@dataclass(frozen=True)
class Trajectory:
    dt: float
    times: np.ndarray
    states: np.ndarray  # (samples, n)
    transient_dropped: float
    integrator: str
    substeps: int
    seed: Optional[int] = None
    rng: Optional[str] = None


def _check_times(duration, dt, transient):
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not transient >= 0:
        raise ValidationError(f"transient must be non-negative, got {transient}")
    if not duration > transient:
        raise ValidationError(f"duration ({duration}) must exceed transient ({transient})")
    n_skip = int(round(transient / dt))
    n_keep = int(round((duration - transient) / dt))
    if n_keep < 2:
        raise ValidationError("trajectory would have fewer than 2 samples")
    return n_skip, n_keep


def _guard(y, t):
    norm = math.sqrt(math.fsum(v * v for v in y))
    if not norm <= OVERFLOW_GUARD:  # also catches NaN
        raise DivergenceError(f"state diverged at t={t:.6g} (|y|={norm:.3g})", state=list(y), time=t)


def integrate_ode(system: LangevinSystem, y0, duration: float, dt: float,
                  transient: float = 0.0, substeps: int = DEFAULT_SUBSTEPS) -> Trajectory:
    """Noise-free trajectory by fixed-step classical RK4.

    Each sampling interval ``dt`` is split into ``substeps`` RK4 steps.
    Samples are taken at ``t = transient + k dt`` for
    ``k = 0 .. round((duration - transient)/dt) - 1``.
    """
    n_skip, n_keep = _check_times(duration, dt, transient)
    n = system.n
    y = [float(v) for v in y0]
    if len(y) != n:
        raise ValidationError(f"y0 must have {n} entries")
    f = system.drift
    h = dt / substeps
    h2 = 0.5 * h
    h6 = h / 6.0
    rng = range(n)
    out = np.empty((n_keep, n))
    for step in range(n_skip + n_keep):
        if step >= n_skip:
            out[step - n_skip] = y
        try:
            for _ in range(substeps):
                k1 = f(y)
                k2 = f([y[i] + h2 * k1[i] for i in rng])
                k3 = f([y[i] + h2 * k2[i] for i in rng])
                k4 = f([y[i] + h * k3[i] for i in rng])
                y = [y[i] + h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) for i in rng]
        except _EVAL_ERRORS as exc:
            raise _eval_failure(exc, y, step * dt) from None
        _guard(y, (step + 1) * dt)
    times = (n_skip + np.arange(n_keep)) * dt
    return Trajectory(dt, times, out, n_skip * dt, "rk4", substeps)


def integrate_sde(system: LangevinSystem, y0, duration: float, dt: float,
                  transient: float = 0.0, seed: int = 0, substeps: int = DEFAULT_SUBSTEPS,
                  noise_scale: float = 1.0) -> Trajectory:
    """Euler-Maruyama trajectory; noise increments have covariance
    ``noise_scale * Sigma(y) * (dt/substeps)``.

    Random numbers come from numpy's ``PCG64`` bit generator seeded with
    ``seed``, so equal seeds give identical trajectories.
    """
    n_skip, n_keep = _check_times(duration, dt, transient)
    if noise_scale < 0:
        raise ValidationError("noise_scale must be non-negative")
    n = system.n
    y = np.array([float(v) for v in y0])
    if y.shape != (n,):
        raise ValidationError(f"y0 must have {n} entries")
    gen = np.random.Generator(np.random.PCG64(seed))
    h = dt / substeps
    sq = math.sqrt(h * noise_scale)
    const = system.constant_sigma
    L_const = np.linalg.cholesky(const) if const is not None else None
    out = np.empty((n_keep, n))
    for step in range(n_skip + n_keep):
        if step >= n_skip:
            out[step - n_skip] = y
        z = gen.standard_normal((substeps, n))
        try:
            for k in range(substeps):
                L = L_const if L_const is not None else np.linalg.cholesky(system.sigma(y))
                y = y + h * np.asarray(system.drift(y)) + sq * (L @ z[k])
        except _EVAL_ERRORS as exc:
            raise _eval_failure(exc, y, step * dt) from None
        _guard(y, (step + 1) * dt)
    times = (n_skip + np.arange(n_keep)) * dt
    return Trajectory(dt, times, out, n_skip * dt, "euler-maruyama", substeps, seed, RNG_ALGORITHM)


Analysis = Union[str, Partition]


@dataclass
class GcMapSample:
    """Local analysis at one phase-space point.

    ``values`` is a :class:`GcGraph` (graph analysis), a float (partition
    analysis) or ``None`` when ``status`` is not ``"ok"``.
    """

    point: np.ndarray
    lam: float
    det_j: float
    singular: bool
    values: object
    status: str = "ok"
    detectable: bool = True


def _analyse(system, y, analysis):
    try:
        lin = linearize(system, y)
    except GcError as exc:
        return GcMapSample(np.asarray(y, dtype=float), math.nan, math.nan, False, None,
                           f"{type(exc).__name__}: {exc}", False)
    if analysis == "graph":
        g = pairwise_graph(lin.vou)
        det = bool(all(g.detectable[i, j] for i in range(g.n) for j in range(g.n)
                       if i != j and (i, j) not in g.errors))
        return GcMapSample(lin.point, lin.stability_exponent, lin.det_j, lin.singular, g, "ok", det)
    try:
        res = conditional_rate(lin.vou, analysis)
    except GcError as exc:
        return GcMapSample(lin.point, lin.stability_exponent, lin.det_j, lin.singular, None,
                           f"{type(exc).__name__}: {exc}", False)
    return GcMapSample(lin.point, lin.stability_exponent, lin.det_j, lin.singular, res.rate,
                       "ok", res.detectable)


def gc_map(system: LangevinSystem, points, analysis: Analysis = "graph",
           workers: Optional[int] = None) -> list:
    """Linearise at each point and compute the requested GC quantity.

    ``analysis`` is ``"graph"`` (pairwise-conditional graph) or a
    :class:`Partition`. Failures are stored per sample; the sweep never
    aborts. Results do not depend on ``workers``.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    if isinstance(analysis, Partition):
        analysis.validate(system.n)
    elif analysis != "graph":
        raise ValidationError(f"unknown analysis {analysis!r}")
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda p: _analyse(system, p, analysis), pts))
    return [_analyse(system, p, analysis) for p in pts]


@dataclass(frozen=True)
class GlobalRate:
    """Mean of local rates over ok samples.

    ``values`` is an ``(n, n)`` array (NaN diagonal) for graph analysis or
    a float; ``excluded`` is the largest fraction of samples dropped for
    any single entry.
    """

    values: object
    excluded: float
    count: int


def _mean(vals):
    return math.fsum(vals) / len(vals) if vals else math.nan


def global_rate(samples: Sequence[GcMapSample], analysis: Analysis = "graph",
                max_excluded: float = MAX_EXCLUDED) -> GlobalRate:
    """Rectangle-rule time average of a map over equally spaced samples."""
    total = len(samples)
    if total == 0:
        raise CoverageError("no samples")
    if analysis == "graph":
        n = next((s.values.n for s in samples if s.status == "ok"), None)
        if n is None:
            raise CoverageError("no valid samples")
        values = np.full((n, n), np.nan)
        worst = 0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                vals = [s.values.rates[i, j] for s in samples
                        if s.status == "ok" and s.values.ok(i, j)]
                worst = max(worst, total - len(vals))
                values[i, j] = _mean(vals)
        excluded = worst / total
    else:
        vals = [s.values for s in samples if s.status == "ok"]
        excluded = (total - len(vals)) / total
        values = _mean(vals)
    if excluded > max_excluded:
        raise CoverageError(f"{excluded:.2%} of samples invalid (limit {max_excluded:.2%})")
    return GlobalRate(values, excluded, total)


@dataclass(frozen=True)
class StabilityPoint:
    point: np.ndarray
    lam: float
    det_j: float

    @property
    def unstable(self):
        return self.lam >= 0.0


def stability_map(system: LangevinSystem, points) -> list:
    """Largest real part of the Jacobian spectrum and ``det J`` per point.

    Points where the Jacobian cannot be evaluated get NaN values.
    """
    out = []
    for p in points:
        y = np.asarray(p, dtype=float)
        try:
            J = system.jacobian(y)
            out.append(StabilityPoint(y, linalg.spectrum(J).max_real_part, float(np.linalg.det(J))))
        except (GcError, ValueError, ZeroDivisionError, OverflowError):
            out.append(StabilityPoint(y, math.nan, math.nan))
    return out
