import time

import numpy as np
import pytest

from gcmaps import linalg
from gcmaps.vougc import Partition, VouModel

ACCEPTANCE = []
_START = time.perf_counter()


def record(criterion, ok, detail=""):
    """Log one acceptance criterion outcome and fail the test if it did not hold."""
    ACCEPTANCE.append((criterion, bool(ok), detail))
    assert ok, f"{criterion}: {detail}"


def _noise(rng, n):
    L = rng.normal(size=(n, n))
    return L @ L.T / n + 0.5 * np.eye(n)


def random_stable(rng, n):
    A = rng.normal(size=(n, n))
    A -= (linalg.spectrum(A).max_real_part + rng.uniform(0.2, 1.0)) * np.eye(n)
    return VouModel(A, _noise(rng, n))


def default_partition(n):
    """target y1, conditioning y2, source the rest."""
    return Partition((0,), tuple(range(2, n)), cond=(1,))


def random_unstable_detectable(rng, n, part=None):
    part = part or default_partition(n)
    s, r = list(part.source), list(part.reduced)
    while True:
        A = rng.normal(size=(n, n))
        A += (rng.uniform(0.2, 1.0) - linalg.spectrum(A).max_real_part) * np.eye(n)
        if linalg.pbh_detectable(A[np.ix_(s, s)], A[np.ix_(r, s)]):
            return VouModel(A, _noise(rng, n))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    stats = tr.stats
    failed = len(stats.get("failed", [])) + len(stats.get("error", []))
    passed = len(stats.get("passed", []))
    elapsed = time.perf_counter() - _START
    ok9 = failed == 0 and elapsed < 120.0
    tr.write_line(
        f"{'PASS' if ok9 else 'FAIL'}  AC9 property suite  "
        f"{passed} passed, {failed} failed, {elapsed:.1f} s (limit 120 s)"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def lorenz_run():
    """Attractor sweep shared by the map tests and the acceptance suite."""
    from gcmaps.langevin import builtin_lorenz
    from gcmaps.maps import gc_map, global_rate, integrate_ode

    system = builtin_lorenz(10.0, 28.0, 8.0 / 3.0, nu=1.0)
    t0 = time.perf_counter()
    traj = integrate_ode(system, [1.0, 1.0, 1.0], duration=200.0, dt=0.01, transient=100.0)
    samples = gc_map(system, traj.states, "graph")
    glob = global_rate(samples, "graph")
    elapsed = time.perf_counter() - t0
    return {"system": system, "traj": traj, "samples": samples, "global": glob, "elapsed": elapsed}


def scipy_care_rate(model, part):
    """Conditional rate with P33 from scipy's CARE solver (test oracle).

    Solves the filter Riccati equation in its original cross-term form
    A33 P + P A33^T - (P Ar3^T + S3r) Srr^-1 (Ar3 P + Sr3) + S33 = 0,
    independently of the package's reduced Hamiltonian path.
    """
    from scipy.linalg import solve_continuous_are

    A, S = model.A, model.Sigma
    t, s, r = list(part.target), list(part.source), list(part.reduced)
    P = solve_continuous_are(A[np.ix_(s, s)].T, A[np.ix_(r, s)].T, S[np.ix_(s, s)], S[np.ix_(r, r)],
                             s=S[np.ix_(s, r)])
    A13 = A[np.ix_(t, s)]
    return float(np.trace(np.linalg.solve(S[np.ix_(t, t)], A13 @ P @ A13.T)))
