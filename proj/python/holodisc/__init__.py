"""Python access to the holodisc solver.

The compiled module does the work; this wrapper decodes the JSON pieces.
"""

import json as _json

from . import _core
from ._core import (  # noqa: F401
    ConfigError,
    HolodiscError,
    __version__,
    a_lambda,
    catalog_field,
    catalog_names,
    cauchy_green,
    complex_matrix_of,
    constant,
    fnv1a,
    force_sequential,
    graft_value,
    grid,
    holder_norm,
    residual,
    standard,
    standard_structure,
    structure_from_complex_matrix,
    thread_count,
    validate_config,
    wirtinger,
)


def newton_solve(field, grid, phi, alpha=0.5, tol=0.0, centered=False):
    """Solve from the initial guess ``phi``; returns (u, certificate dict)."""
    u, cert = _core.newton_solve(field, grid, phi, alpha, tol, centered)
    return u, _json.loads(cert)


def run(config, output_dir="", sequential=False):
    """Run a config (dict or JSON text); returns (exit_code, report dict, files)."""
    text = config if isinstance(config, str) else _json.dumps(config)
    code, report, files, _ = _core.run_config(text, output_dir, sequential)
    return code, _json.loads(report), list(files)
