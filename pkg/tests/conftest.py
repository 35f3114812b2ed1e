import numpy as np
import pytest

from delayring.continuation import child_branch, continue_branch
from delayring.equilibria import RelativeEquilibrium, expand_primary, newton_solve, primary_oracle
from delayring.model import preset


@pytest.fixture(scope="session")
def relax():
    return preset("relaxation")


@pytest.fixture(scope="session")
def smooth():
    return preset("smooth")


@pytest.fixture(scope="session")
def primary_eq(relax):
    """Converged primary state of the relaxation preset, cached per (m, tau)."""
    cache = {}

    def get(m, tau):
        key = (m, round(tau, 12))
        if key not in cache:
            ans = primary_oracle(relax, m, 1.7, 2.43, tau=tau)
            cache[key] = newton_solve(relax, expand_primary(ans))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def compressed_eq(relax, primary_eq):
    """Compressed 2-cluster at tau = 0.7, on the child of the first 2-cluster pitchfork."""
    br = continue_branch(relax, primary_eq(2, 0.75), (0.6, 1.0))
    bif = next(b for b in br.bifurcations if b.kind == "pitchfork")
    child = child_branch(relax, bif, (0.6, 1.0), detect=False)
    taus = child.taus
    i = np.flatnonzero((taus[:-1] - 0.7) * (taus[1:] - 0.7) <= 0)[0]
    q = child.points[i].eq
    return newton_solve(relax, RelativeEquilibrium(q.r, q.psi, q.omega_collective, 0.7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def report():
    """Record one pass/fail line per acceptance criterion."""

    def add(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

