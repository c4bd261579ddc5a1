import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record_criterion():
    def rec(num, ok, detail):
        ACCEPTANCE.append((num, bool(ok), detail))
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return rec


@pytest.fixture(scope="session")
def disk3():
    """Level-3 unit disk, sigma = |x|^0.5: operators, eigenpair and u_lambda at 2 lambda_1."""
    from degenlab.assembly import WeightedOperatorSet
    from degenlab.coefficients import DiffusionCoefficient, ProblemParams
    from degenlab.geometry import DomainSpec, build_mesh
    from degenlab.spectral import principal_eigenpair
    from degenlab.stationary import amplitude_seed, solve_stationary

    ops = WeightedOperatorSet(build_mesh(DomainSpec.disk(1.0), 3), DiffusionCoefficient.power(0.5))
    eig = principal_eigenpair(ops)
    params = ProblemParams(2.0 * eig.lam, 1.0)
    u = solve_stationary(params, amplitude_seed(params.lam, eig, params, ops) * eig.u, ops,
                         lambda_1=eig.lam).u
    return ops, eig, params, u


@pytest.fixture(scope="session")
def disk2():
    from degenlab.assembly import WeightedOperatorSet
    from degenlab.coefficients import DiffusionCoefficient
    from degenlab.geometry import DomainSpec, build_mesh
    from degenlab.spectral import principal_eigenpair

    ops = WeightedOperatorSet(build_mesh(DomainSpec.disk(1.0), 2), DiffusionCoefficient.power(0.5))
    return ops, principal_eigenpair(ops)
