import numpy as np
import pytest
from scipy.spatial import Delaunay

from bcmortar.mesh import build_complex

_CRITERIA = []


def random_delaunay(n_interior, seed, boundary_per_side=None):
    """Delaunay triangulation of the unit square with random interior points."""
    rng = np.random.default_rng(seed)
    k = boundary_per_side or max(2, int(np.sqrt(n_interior)))
    t = np.linspace(0.0, 1.0, k + 1)[1:-1]
    side = [(s, 0.0) for s in t] + [(1.0, s) for s in t] + [(s, 1.0) for s in t] + [(0.0, s) for s in t]
    pts = np.vstack([[(0, 0), (1, 0), (1, 1), (0, 1)], side,
                     rng.uniform(0.02, 0.98, (n_interior, 2))])
    return build_complex(pts, Delaunay(pts).simplices)


def grid(n, diagonal="ne"):
    from bcmortar.experiments import structured_square
    return structured_square(n, diagonal)


@pytest.fixture(scope="session")
def delaunay_meshes():
    """Twenty random meshes between roughly 50 and 500 triangles."""
    sizes = np.linspace(20, 220, 20).astype(int)
    meshes = [random_delaunay(int(n), seed) for seed, n in enumerate(sizes)]
    assert all(50 <= m.n_facets <= 500 for m in meshes), [m.n_facets for m in meshes]
    return meshes


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    def record(number, passed, detail):
        line = f"criterion {number:>4}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
