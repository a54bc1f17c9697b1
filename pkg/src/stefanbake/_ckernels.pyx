# cython: language_level=3
"""Compiled inner loops: finite-volume row assembly and the Thomas solve."""
import numpy as np
from libc.math cimport fabs


def solve_tridiagonal(double[::1] lower, double[::1] diag, double[::1] upper, double[::1] rhs):
    """Solve ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``.

    ``lower[0]`` and ``upper[n-1]`` are ignored.  No pivoting; the callers only
    build diagonally dominant systems.
    """
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double m
    out = np.empty(n)
    cdef double[::1] x = out
    cdef double[::1] cp = np.empty(n)
    if n == 0:
        return out
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    x[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / m
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / m
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return out


def assemble_phase(Py_ssize_t n, double dy, double y0, double jac_new, double jac_old,
                   double cap, double cond, double dt, double velocity,
                   double mesh_a, double mesh_b, double[::1] u_old,
                   bint first_half, bint last_half):
    """Backward-Euler finite-volume rows for one phase on the reference grid.

    Node ``i`` sits at ``y0 + i*dy``; the mesh velocity at a face is
    ``velocity * (mesh_a + mesh_b * y)``.  Boundary fluxes are left to the
    caller.  The mesh flux is central where ``|m| <= 2a`` and upwinded
    elsewhere, so off-diagonals stay nonpositive.
    """
    lower_arr = np.zeros(n)
    diag_arr = np.empty(n)
    upper_arr = np.zeros(n)
    rhs_arr = np.empty(n)
    cdef double[::1] lower = lower_arr
    cdef double[::1] diag = diag_arr
    cdef double[::1] upper = upper_arr
    cdef double[::1] rhs = rhs_arr
    cdef Py_ssize_t i
    cdef double vol, a, m, mp, mm, yf
    cdef double mass_new = cap * jac_new / dt
    cdef double mass_old = cap * jac_old / dt
    a = cond / (jac_new * dy)
    for i in range(n):
        vol = dy
        if (i == 0 and first_half) or (i == n - 1 and last_half):
            vol = 0.5 * dy
        diag[i] = mass_new * vol
        rhs[i] = mass_old * vol * u_old[i]
    for i in range(n - 1):
        yf = y0 + (i + 0.5) * dy
        m = cap * velocity * (mesh_a + mesh_b * yf)
        if fabs(m) <= 2.0 * a:
            # central while the cell Peclet number keeps the matrix an M-matrix
            mp = 0.5 * m
            mm = 0.5 * m
        elif m > 0:
            mp = m
            mm = 0.0
        else:
            mp = 0.0
            mm = m
        upper[i] += -a - mp
        diag[i] += a - mm
        diag[i + 1] += a + mp
        lower[i + 1] += -a + mm
    return lower_arr, diag_arr, upper_arr, rhs_arr
