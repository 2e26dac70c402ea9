import numpy as np
import pytest
from hypothesis import settings

from tfim_entanglement.free_fermion import CorrelatorSet

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def _min_eps(sz, xx, yy):
    zz = sz * sz - xx * yy
    root = np.sqrt(4 * sz * sz + (xx - yy) ** 2)
    return min((1 + zz - root) / 4, (1 - zz - abs(xx + yy)) / 4)


def valid_correlators(sz, xx, yy, shrink):
    """Scale (xx, yy) toward the always-valid point (xx, yy) = 0 until the state is PSD.

    ``shrink`` in [0, 1] picks how far inside the admissible segment to land.
    """
    lo, hi = 0.0, 1.0
    if _min_eps(sz, xx, yy) >= 0:
        lo = 1.0
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _min_eps(sz, mid * xx, mid * yy) >= 0:
                lo = mid
            else:
                hi = mid
    t = lo * shrink
    return CorrelatorSet.from_sums(sz, t * xx, t * yy)


def random_correlator_sets(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        sz, xx, yy = rng.uniform(-1, 1, size=3)
        out.append(valid_correlators(sz, xx, yy, rng.uniform(0, 1)))
    return out


def fd_oracle(f, lam, h=None):
    """Richardson central difference with a step small against the distance to lambda = 1."""
    from tfim_entanglement.entanglement import richardson_derivative

    if h is None:
        h = 1e-3 * min(1.0, abs(lam - 1.0))
    return richardson_derivative(f, lam, h)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
