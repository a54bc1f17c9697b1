"""Fallback kernels built on numpy and LAPACK.

Same contracts as the compiled module.  ``thomas_reference`` is a plain loop
used only as a test oracle and in the benchmark.
"""
import numpy as np
from scipy.linalg import solve_banded


def solve_tridiagonal(lower, diag, upper, rhs):
    n = diag.shape[0]
    if n == 0:
        return np.empty(0)
    if n == 1:
        return np.array([rhs[0] / diag[0]])
    ab = np.empty((3, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    ab[2, -1] = 0.0
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def assemble_phase(n, dy, y0, jac_new, jac_old, cap, cond, dt, velocity, mesh_a, mesh_b, u_old, first_half, last_half):
    vol = np.full(n, dy)
    if first_half:
        vol[0] *= 0.5
    if last_half:
        vol[-1] *= 0.5
    diag = cap * jac_new / dt * vol
    rhs = cap * jac_old / dt * vol * u_old
    lower = np.zeros(n)
    upper = np.zeros(n)
    a = cond / (jac_new * dy)
    yf = y0 + (np.arange(n - 1) + 0.5) * dy
    m = cap * velocity * (mesh_a + mesh_b * yf)
    central = np.abs(m) <= 2.0 * a
    mp = np.where(central, 0.5 * m, np.maximum(m, 0.0))
    mm = np.where(central, 0.5 * m, np.minimum(m, 0.0))
    upper[:-1] += -a - mp
    diag[:-1] += a - mm
    diag[1:] += a + mp
    lower[1:] += -a + mm
    return lower, diag, upper, rhs


def thomas_reference(lower, diag, upper, rhs):
    """Textbook Thomas algorithm in pure Python."""
    n = len(diag)
    cp = [0.0] * n
    dp = [0.0] * n
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
    x = [0.0] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)
