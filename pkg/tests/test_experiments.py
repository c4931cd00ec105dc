import csv
import math

import numpy as np
import pytest

from bcmortar.cli import COLUMNS, main
from bcmortar.experiments import (ExperimentConfig, condition_report, experiment1, gen_test_meshes,
                                  initial_data, regression_rate, verify_report)
from bcmortar.mesh import read_mesh


def _interior_segments(m):
    x = m.node_coords
    inner = ~m.boundary_edges
    return x[m.edges[inner, 0]], x[m.edges[inner, 1]]


def _collinear_overlap(a0, a1, b0, b1):
    """Total length of collinear overlap between two segment sets."""
    total = 0.0
    for p, q in zip(a0, a1):
        d = q - p
        L = np.hypot(*d)
        u = d / L
        cr0 = u[0] * (b0[:, 1] - p[1]) - u[1] * (b0[:, 0] - p[0])
        cr1 = u[0] * (b1[:, 1] - p[1]) - u[1] * (b1[:, 0] - p[0])
        on_line = (np.abs(cr0) < 1e-12) & (np.abs(cr1) < 1e-12)
        s0 = (b0[on_line] - p) @ u
        s1 = (b1[on_line] - p) @ u
        lo, hi = np.minimum(s0, s1), np.maximum(s0, s1)
        total += np.clip(np.minimum(hi, L) - np.maximum(lo, 0), 0, None).sum()
    return total


def test_mesh_pair_sizes():
    mi, mj = gen_test_meshes(0)
    assert (mi.n_facets, mj.n_facets) == (8, 18)
    for level in range(4):
        mi, mj = gen_test_meshes(level)
        assert mi.area == pytest.approx(1.0, abs=1e-12)
        assert mj.area == pytest.approx(1.0, abs=1e-12)
        assert mi.n_facets == 8 * 4**level


def test_mesh_pair_nonconforming():
    # no interior edge is shared by both meshes at any level
    for level in range(4):
        mi, mj = gen_test_meshes(level)
        ei = {tuple(np.round(np.sort(mi.node_coords[e], axis=0).ravel(), 12)) for e in mi.edges[~mi.boundary_edges]}
        ej = {tuple(np.round(np.sort(mj.node_coords[e], axis=0).ravel(), 12)) for e in mj.edges[~mj.boundary_edges]}
        assert not ei & ej
    # at the base level the interior edges only cross in points
    assert _collinear_overlap(*_interior_segments(gen_test_meshes(0)[0]),
                              *_interior_segments(gen_test_meshes(0)[1])) == 0.0


def test_mesh_size_halves():
    h = [gen_test_meshes(level)[0].max_edge_length for level in range(4)]
    np.testing.assert_allclose(np.array(h[:-1]) / h[1:], 2.0)


def test_initial_data_values():
    w0, dw0 = initial_data(0)
    assert w0([(0.5, 0.5)])[0] == pytest.approx(1.0)
    t = np.linspace(0, 1, 11)
    edge = np.concatenate([np.stack([t, 0 * t], 1), np.stack([t, 0 * t + 1], 1),
                           np.stack([0 * t, t], 1), np.stack([0 * t + 1, t], 1)])
    np.testing.assert_allclose(w0(edge), 0.0, atol=1e-15)
    w1, dw1 = initial_data(1)
    assert dw1([(0.5, 0.5)])[0] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(dw0([(0.25, 0.5)])[0], [math.pi * math.cos(math.pi / 4), 0.0], atol=1e-15)
    with pytest.raises(ValueError):
        initial_data(2)


def test_initial_data_derivatives_by_finite_differences():
    h = 1e-6
    p = np.array([[0.3, 0.7]])
    w0, dw0 = initial_data(0)
    grad = [(w0(p + [[h, 0]]) - w0(p - [[h, 0]]))[0] / (2 * h),
            (w0(p + [[0, h]]) - w0(p - [[0, h]]))[0] / (2 * h)]
    np.testing.assert_allclose(dw0(p)[0], grad, rtol=1e-8)
    w1, dw1 = initial_data(1)
    curl = ((w1(p + [[h, 0]])[0, 1] - w1(p - [[h, 0]])[0, 1])
            - (w1(p + [[0, h]])[0, 0] - w1(p - [[0, h]])[0, 0])) / (2 * h)
    assert dw1(p)[0] == pytest.approx(curl, rel=1e-8)


@pytest.mark.parametrize("kwargs", [dict(level=-1), dict(steps=0), dict(degree=2),
                                    dict(methods=("bc", "fem"))])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_experiment1_short_series():
    series, iterations = experiment1(ExperimentConfig(degree=0, level=1, steps=4))
    for method, errs in series.items():
        assert errs[0] == 0.0
        assert np.all(np.diff(errs) >= -1e-10)
    assert iterations["derham"] == []
    assert len(iterations["bc"]) == 8


def test_regression_rate_exact_power_law():
    h = np.array([0.5, 0.25, 0.125])
    assert regression_rate(h, 3 * h**2) == pytest.approx(2.0)


def test_condition_report_rows():
    rows = condition_report(1)
    assert len(rows) == 8
    bc = [r["kappa"] for r in rows if r["method"] == "bc"]
    assert all(1 < k < 10 for k in bc)


def test_verify_report_and_mutation():
    rows = verify_report(0)
    assert all(r.passed for r in rows if r.hard)
    soft = [r for r in rows if not r.hard]
    assert soft and all(r.status == "FAIL-BY-DESIGN" for r in soft)
    bad = [r.check for r in verify_report(0, tamper=True) if r.hard and not r.passed]
    assert bad and all(c.startswith("bc_extder") for c in bad)


# --- CLI --------------------------------------------------------------------

def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_cli_mesh(tmp_path):
    out = tmp_path / "j.mesh"
    assert main(["mesh", "--level", "1", "--which", "j", "--out", str(out)]) == 0
    assert read_mesh(out).n_facets == 72


def test_cli_mesh_stdout(capsys):
    assert main(["mesh", "--which", "i"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "9 0 8"


def test_cli_exp1_csv(tmp_path):
    out = tmp_path / "e1.csv"
    assert main(["exp1", "--degree", "1", "--methods", "bc,derham", "--level", "0",
                 "--steps", "3", "--out", str(out)]) == 0
    rows = _read(out)
    assert list(rows[0].keys()) == COLUMNS
    assert len(rows) == 8
    assert {r["method"] for r in rows} == {"bc", "derham"}
    assert float(rows[0]["value"]) == 0.0


def test_cli_exp2_and_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["exp2", "--degree", "0", "--methods", "galerkin,bc", "--max-level", "2",
                     "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _read(a)
    assert {r["norm"] for r in rows} == {"L2", "Hd"}
    assert len(rows) == 2 * 2 * 2


def test_cli_cond(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["cond", "--max-level", "1", "--out", str(out)]) == 0
    assert {r["experiment"] for r in _read(out)} == {"cond"}


def test_cli_verify(capsys):
    assert main(["verify", "--level", "0"]) == 0
    text = capsys.readouterr().out
    assert "FAIL-BY-DESIGN" in text and "commuting[bc,r=1]" in text


def test_cli_rejects_bad_input():
    with pytest.raises(SystemExit):
        main(["exp1", "--degree", "0", "--methods", "fem"])
    assert main(["exp1", "--degree", "0", "--steps", "0"]) == 2
