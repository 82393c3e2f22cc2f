import json
import os

import numpy as np
import pytest

import holodisc


def test_version_and_catalog():
    assert holodisc.__version__ == "0.3.0"
    assert len(holodisc.catalog_names()) >= 3


def test_standard_structure_has_zero_matrix():
    a = holodisc.complex_matrix_of(holodisc.standard_structure(2))
    assert a.shape == (2, 2)
    assert np.all(a == 0)


def test_structure_round_trip():
    f = holodisc.a_lambda(0.3)
    a = f(np.array([0.2 + 0.1j, -0.3j]))
    j = holodisc.structure_from_complex_matrix(a)
    assert np.allclose(j @ j, -np.eye(4), atol=1e-12)
    assert np.allclose(holodisc.complex_matrix_of(j), a, atol=1e-12)


def test_cauchy_green_of_one_is_conjugate():
    g = holodisc.grid("disc", 32)
    t = holodisc.cauchy_green(g, np.ones((g.size, 1), dtype=complex))
    assert np.max(np.abs(t[:, 0] - np.conj(g.nodes))) <= 5e-3
    assert abs(g.weights.sum() - np.pi) <= 1e-6 * np.pi


def test_newton_one_step():
    g = holodisc.grid("disc", 32)
    z = g.nodes
    u, cert = holodisc.newton_solve(holodisc.standard(), g, (z + 0.05 * np.conj(z))[:, None])
    assert cert["iterations"] == 1
    assert np.max(np.abs(u[:, 0] - z)) <= 1e-3


def test_graft_circle_identity():
    r = 0.1
    for t in np.linspace(0, 2 * np.pi, 50):
        d = r * np.exp(1j * t)
        h = holodisc.graft_value(0, 0, 1, 0.2, r, d)
        assert abs(h - (d + 0.2 * np.conj(d))) <= 1e-12


def test_config_errors_raise():
    with pytest.raises(holodisc.ConfigError, match="line 3"):
        holodisc.validate_config('{\n "command": "solve",\n "nope": 1\n}')


def test_run_catalog_and_solve(tmp_path):
    code, report, files = holodisc.run({"command": "catalog"}, str(tmp_path / "cat"))
    assert code == 0 and len(report["entries"]) >= 3
    with open(os.path.join(os.environ.get("HOLODISC_CONFIG_DIR", "configs"), "solve.json")) as fh:
        text = fh.read()
    code, report, files = holodisc.run(text, str(tmp_path / "solve"), sequential=True)
    assert code == 0
    assert report["certificate"]["iterations"] == 1
    assert "u.csv" in files
    assert json.loads(holodisc.validate_config(text)) == report["config"]
