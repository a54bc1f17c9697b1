"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy/LAPACK
fallback.  ``STEFANBAKE_BACKEND=numpy`` forces the fallback.
"""
import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"numpy": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        name = os.environ.get("STEFANBAKE_BACKEND") or ("cython" if "cython" in BACKENDS else "numpy")
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


_active = get_backend()
BACKEND = "cython" if _active is _ckernels and _ckernels is not None else "numpy"


def set_backend(name: str) -> str:
    """Switch the active backend for this process; returns the previous name."""
    global _active, BACKEND
    previous = BACKEND
    _active = get_backend(name)
    BACKEND = name
    return previous


def active_backend() -> str:
    return BACKEND


def solve_tridiagonal(lower, diag, upper, rhs):
    return _active.solve_tridiagonal(lower, diag, upper, rhs)


def assemble_phase(n, dy, y0, jac_new, jac_old, cap, cond, dt, velocity, mesh_a, mesh_b, u_old, first_half, last_half):
    return _active.assemble_phase(
        n, dy, y0, jac_new, jac_old, cap, cond, dt, velocity, mesh_a, mesh_b, u_old, first_half, last_half
    )
