import itertools

import numpy as np
import pytest

from curvcert.expr import evaluate
from curvcert.models import build_model, catalog


@pytest.fixture(scope="session")
def models():
    return {name: entry.model for name, entry in catalog().items()}


@pytest.fixture(scope="session")
def polar():
    return build_model("polar", ["rho", "th"], ["1", "rho^2"], domain=[(0.5, 3.0), (0.0, 6.0)])


@pytest.fixture(scope="session")
def euclid4():
    return build_model("euclid4", ["x1", "x2", "x3", "x4"], ["1"] * 4, domain=[(-1.0, 1.0)] * 4)


# --- brute-force oracle --------------------------------------------------------
# Plain float evaluation of the metric, nested five-point stencils for the
# derivatives.  Shares no code with the jet pipeline.

def _d5(fn, x, i, h):
    e = np.zeros_like(x)
    e[i] = h
    return (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)


def metric_at(model, x):
    n = model.dimension
    return np.array([[evaluate(model.metric[i][j], x) for j in range(n)] for i in range(n)])


def christoffel_fd(model, x, h=1e-3):
    """Gamma[k, i, j] by finite differences of the metric."""
    n = model.dimension
    x = np.asarray(x, dtype=float)
    dg = np.array([_d5(lambda y: metric_at(model, y), x, c, h) for c in range(n)])  # dg[c, i, j]
    ginv = np.linalg.inv(metric_at(model, x))
    first = 0.5 * (dg + np.swapaxes(dg, 0, 1) - np.moveaxis(dg, 0, 2))  # [i, j, l]
    return np.einsum("kl,ijl->kij", ginv, first)


def riemann_fd(model, x, h=2e-3):
    """R_ijkl with R^m_jkl = d_k G^m_lj - d_l G^m_kj + G^m_ke G^e_lj - G^m_le G^e_kj."""
    n = model.dimension
    x = np.asarray(x, dtype=float)
    gam = christoffel_fd(model, x)
    dgam = np.array([_d5(lambda y: christoffel_fd(model, y), x, c, h) for c in range(n)])  # [c, m, i, j]
    up = np.zeros((n,) * 4)
    for m, j, k, l in itertools.product(range(n), repeat=4):
        up[m, j, k, l] = (dgam[k, m, l, j] - dgam[l, m, k, j]
                          + gam[m, k, :] @ gam[:, l, j] - gam[m, l, :] @ gam[:, k, j])
    return np.einsum("im,mjkl->ijkl", metric_at(model, x), up)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}")
