import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stefanbake import kernels
from stefanbake._pykernels import thomas_reference

BACKENDS = sorted(kernels.BACKENDS)


def _dominant_system(n, seed):
    rng = np.random.default_rng(seed)
    lower = rng.uniform(-1, 0, n)
    upper = rng.uniform(-1, 0, n)
    lower[0] = upper[-1] = 0.0
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.1, 2.0, n)
    rhs = rng.normal(size=n)
    return lower, diag, upper, rhs


def _dense(lower, diag, upper):
    return np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("n", [1, 2, 3, 17, 400])
def test_tridiagonal_matches_dense_and_thomas(name, n):
    lo, d, up, rhs = _dominant_system(n, n)
    x = kernels.BACKENDS[name].solve_tridiagonal(lo, d, up, rhs)
    assert np.allclose(x, np.linalg.solve(_dense(lo, d, up), rhs), rtol=1e-12, atol=1e-12)
    assert np.allclose(x, thomas_reference(lo, d, up, rhs), rtol=1e-12, atol=1e-12)


def _assembly_args(n, velocity, seed=0):
    rng = np.random.default_rng(seed)
    return dict(
        n=n, dy=1.0 / (n - 1), y0=1.0, jac_new=0.4, jac_old=0.41, cap=1.3, cond=0.8, dt=1e-2,
        velocity=velocity, mesh_a=2.0, mesh_b=-1.0, u_old=rng.normal(size=n), first_half=True, last_half=True,
    )


@pytest.mark.parametrize("velocity", [0.0, 0.3, -5.0, 400.0])
def test_backends_assemble_identically(velocity):
    args = _assembly_args(31, velocity)
    out = [kernels.BACKENDS[b].assemble_phase(**args) for b in BACKENDS]
    for other in out[1:]:
        for a, b in zip(out[0], other):
            assert np.allclose(a, b, rtol=1e-14, atol=1e-14)


@settings(max_examples=60)
@given(st.floats(-1e3, 1e3), st.integers(3, 60))
def test_assembled_matrix_is_m_matrix(velocity, n):
    """Nonpositive off-diagonals and a positive diagonal dominating by the storage term."""
    lower, diag, upper, _ = kernels.assemble_phase(**_assembly_args(n, velocity))
    assert np.all(lower[1:] <= 0.0) and np.all(upper[:-1] <= 0.0)
    # column sums equal the storage term (conservative fluxes)
    A = _dense(lower, diag, upper)
    vol = np.full(n, 1.0 / (n - 1))
    vol[0] *= 0.5
    vol[-1] *= 0.5
    assert np.allclose(A.sum(axis=0), 1.3 * 0.4 / 1e-2 * vol, rtol=1e-10, atol=1e-8)


def test_central_flux_below_cell_peclet_two():
    # |m| <= 2a everywhere: the mesh flux is split evenly between neighbours
    args = _assembly_args(11, 0.05)
    lower, diag, upper, _ = kernels.assemble_phase(**args)
    a = args["cond"] / (args["jac_new"] * args["dy"])
    yf = args["y0"] + (np.arange(10) + 0.5) * args["dy"]
    m = args["cap"] * args["velocity"] * (args["mesh_a"] + args["mesh_b"] * yf)
    assert np.allclose(upper[:-1], -a - 0.5 * m)
    assert np.allclose(lower[1:], -a + 0.5 * m)


def test_set_backend_round_trip():
    before = kernels.active_backend()
    try:
        prev = kernels.set_backend("numpy")
        assert prev == before
        assert kernels.active_backend() == "numpy"
        with pytest.raises(ValueError):
            kernels.set_backend("fortran")
    finally:
        kernels.set_backend(before)
    assert kernels.active_backend() == before


def test_compiled_backend_is_default_when_built(monkeypatch):
    if "cython" not in kernels.BACKENDS:
        pytest.skip("extension not built")
    monkeypatch.delenv("STEFANBAKE_BACKEND", raising=False)
    assert kernels.get_backend() is kernels.BACKENDS["cython"]
