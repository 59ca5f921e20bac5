import numpy as np
import pytest

from hypmesh import generate as gen
from hypmesh.angles import derive_targets, induce_angles
from hypmesh.energy import build_linear_constraints

CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, title, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}  [{detail}]")


class _Criterion:
    def __init__(self, store, number, title):
        self.store, self.number, self.title = store, number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        self.store[self.number] = (status, self.title, self.detail)
        print(f"criterion {self.number}: {status} {self.title} [{self.detail}]")
        return False


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as c: ...`` records a pass/fail line."""
    store = request.config.stash[CRITERIA]
    return lambda number, title: _Criterion(store, number, title)


@pytest.fixture(scope="session")
def jittered_square():
    return gen.square(20, jitter=0.3, seed=1)


@pytest.fixture(scope="session")
def small_meshes():
    """Three small topologies: disk fan, jittered grid, annulus."""
    return {
        "fan": gen.fan(6),
        "grid": gen.square(4, jitter=0.3, seed=7),
        "annulus": gen.small_annulus(),
    }


def random_feasible(mesh, rng, scale=0.05):
    """Induced angles moved randomly within the angle-sum constraint set."""
    A = induce_angles(mesh)
    rows = build_linear_constraints(mesh.topology, derive_targets(mesh)).matrix.toarray()
    _, s, vt = np.linalg.svd(rows)
    rank = int(np.sum(s > 1e-10 * s[0]))
    basis = vt[rank:]
    step = basis.T @ rng.standard_normal(len(basis))
    step *= scale / max(np.max(np.abs(step)), 1e-300)
    return (A.ravel() + step).reshape(-1, 3)


@pytest.fixture
def feasible():
    return random_feasible
