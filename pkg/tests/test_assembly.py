import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab import assembly
from degenlab.assembly import (WeightedOperatorSet, assemble_mass, assemble_stiffness, gradient_consistency,
                               jacobian, lyapunov, nonlinear_residual, norms, read_field, write_field)
from degenlab.coefficients import DiffusionCoefficient, ProblemParams
from degenlab.geometry import DomainSpec, build_mesh
from oracles import cotangent_laplacian


@pytest.fixture(scope="module")
def mesh2():
    return build_mesh(DomainSpec.disk(1.0), 2)


def test_alpha_zero_matches_cotangent_laplacian():
    m = build_mesh(DomainSpec.annulus(1.0, 0.3), 1)
    K = assemble_stiffness(m, DiffusionCoefficient.power(0.0)).toarray()
    assert np.max(np.abs(K - cotangent_laplacian(m.vertices, m.triangles))) <= 1e-12


@pytest.mark.parametrize("coeff", [DiffusionCoefficient.power(0.5), DiffusionCoefficient.power(1.5)])
def test_stiffness_symmetric_and_constant_kernel(mesh2, coeff):
    K = assemble_stiffness(mesh2, coeff)
    assert abs(K - K.T).max() <= 1e-14 * abs(K).max()
    assert np.max(np.abs(K @ np.ones(mesh2.nv))) <= 1e-10


def test_mass_matrix():
    v = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    from degenlab.geometry import Mesh
    m = Mesh(v, np.array([[0, 1, 2]]), np.array([True, True, True]), DomainSpec.disk(1.0), ())
    M = assemble_mass(m).toarray()
    A = 1.0
    assert np.allclose(np.diag(M), A / 6) and np.isclose(M[0, 1], A / 12)


def test_mass_sum_and_definiteness(mesh2):
    M = assemble_mass(mesh2)
    one = np.ones(mesh2.nv)
    assert abs(one @ M @ one - mesh2.areas().sum()) <= 1e-12
    assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_residual_and_jacobian_basics(disk3):
    ops, eig, params, _ = disk3
    z = np.zeros(ops.mesh.nv)
    assert np.all(nonlinear_residual(z, params, ops) == 0)
    J0 = jacobian(z, params, ops)
    assert abs(J0 - (ops.K_int - params.lam * ops.M_int)).max() == 0
    u = 0.3 * eig.u
    J = jacobian(u, params, ops)
    assert abs(J - J.T).max() <= 1e-13
    assert lyapunov(z, params, ops) == 0


def test_residual_scaling_at_eigenfunction(disk3):
    # linear part cancels at lambda = lambda_1: |r(t u_1)| = O(t^3) for gamma = 1
    ops, eig, params, _ = disk3
    p = params.with_lambda(eig.lam)
    r = [np.linalg.norm(nonlinear_residual(t * eig.u, p, ops)) for t in (1e-2, 5e-3)]
    assert r[0] / r[1] == pytest.approx(8.0, rel=1e-3)


def test_energy_along_eigenfunction(disk3):
    ops, eig, params, _ = disk3
    t = 0.2
    l2sq = eig.u @ ops.M @ eig.u
    p4 = ops.power_integral(eig.u, 4.0)
    expect = -(params.lam - eig.lam) * t * t / 2 * l2sq + t ** 4 / 4 * p4
    assert lyapunov(t * eig.u, params, ops) == pytest.approx(expect, rel=1e-8)
    assert expect < 0


def test_norms(disk3):
    ops, eig, _, _ = disk3
    assert norms(np.zeros(ops.mesh.nv), ops) == {"l2": 0.0, "weighted_h1": 0.0}
    n = norms(eig.u, ops, p=2)
    assert n["l2"] == pytest.approx(1.0, abs=1e-12)
    assert n["lp"] == pytest.approx(n["l2"], rel=1e-10)


def test_gradient_consistency(disk3):
    _, _, params, _ = disk3
    ops = disk3[0]
    ge, je = gradient_consistency(params, ops, n_fields=10)
    assert ge <= 1e-6 and je <= 1e-6


def test_gradient_consistency_detects_sign_error(disk3, monkeypatch):
    ops, _, params, _ = disk3
    orig = assembly.nonlinear_residual

    def broken(u, p, o):
        return orig(u, p, o) - 2 * o.nonlinear_load(u, 2 * p.gamma)[o.interior]

    monkeypatch.setattr(assembly, "nonlinear_residual", broken)
    ge, _ = gradient_consistency(params, ops, n_fields=3)
    assert ge > 1e-3




def test_discrete_poincare_random_fields(disk3):
    ops, eig, _, _ = disk3
    rng = np.random.default_rng(3)
    for _ in range(100):
        v = rng.normal(size=ops.n_interior) * rng.uniform(0, 1, ops.n_interior) ** 3
        assert v @ ops.K_int @ v >= eig.lam * (v @ ops.M_int @ v) * (1 - 1e-10)


def test_boundary_check(disk3):
    ops = disk3[0]
    u = np.ones(ops.mesh.nv)
    with pytest.raises(ValueError):
        nonlinear_residual(u, ProblemParams(1.0), ops)


def test_field_round_trip(tmp_path, disk3):
    u = disk3[1].u
    text = write_field(u, tmp_path / "u.field")
    assert text.startswith(f"FIELD {len(u)}\n")
    assert np.array_equal(read_field((tmp_path / "u.field").read_text()), u)


def test_backends_assemble_identically():
    m = build_mesh(DomainSpec.disk(1.0), 2)
    c = DiffusionCoefficient.power(0.5)
    a = WeightedOperatorSet(m, c)
    b = WeightedOperatorSet(m, c, backend="python")
    assert abs(a.K - b.K).max() <= 1e-14 * abs(a.K).max()
