import numpy as np
import pytest

from stefanbake.problem import InitialData, OvenSchedule, PhysicalParams, ProblemSetup, SorptionFunction


def make_setup(e0=0.5, u_fn=None, w_fn=None, ub=1.0, params=None, sorption=None, horizon=0.1, n=201, **kw):
    params = params or PhysicalParams()
    u_fn = u_fn or np.zeros_like
    w_fn = w_fn or (lambda x: np.ones_like(x))
    init = InitialData.from_functions(e0, u_fn, w_fn, n=n)
    oven = ub if isinstance(ub, OvenSchedule) else OvenSchedule.constant_at(ub)
    return ProblemSetup(params, sorption or SorptionFunction.constant(0.5), oven, init, horizon=horizon, **kw)


@pytest.fixture
def equilibrium_setup():
    return make_setup()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
